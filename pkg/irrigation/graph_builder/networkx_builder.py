import logging
from typing import Optional, Set

import networkx as nx
import numpy as np

from ..measure_core.polygonal_flow import PolygonalFlow

logger = logging.getLogger(__name__)


class NetworkXBuilder:
    """
    Class for building NetworkX graph objects from polygonal flows.
    """

    def __init__(self, config: dict = None):
        """
        Initialize the NetworkX graph builder.

        Args:
            config: Drawing options (figure_size, dpi, cmap)
        """
        self.config = config or {}

    def build_graph(self, flow: PolygonalFlow) -> nx.MultiDiGraph:
        """
        Build a directed multigraph from a flow.

        Args:
            flow: Polygonal flow

        Returns:
            Graph keyed by node id with 'pos' and 't' node attributes and a
            'flux' edge attribute; edges point forward in time
        """
        G = nx.MultiDiGraph(eps=flow.eps, rooted=flow.rooted)
        for node_id, pos, t in zip(flow.node_ids, flow.positions, flow.times):
            G.add_node(int(node_id), pos=(float(pos[0]), float(pos[1])), t=float(t))
        for (a, b), flux in zip(flow.edges, flow.fluxes):
            G.add_edge(int(flow.node_ids[a]), int(flow.node_ids[b]), flux=float(flux))
        return G

    def cycle_rank(self, graph: nx.MultiDiGraph) -> int:
        """Number of independent undirected cycles (0 for a forest)."""
        undirected = nx.MultiGraph(graph)
        return (undirected.number_of_edges() - undirected.number_of_nodes()
                + nx.number_connected_components(undirected))

    def cycle_nodes(self, graph: nx.MultiDiGraph) -> Set[int]:
        """Nodes lying on some undirected cycle, parallel edges included."""
        nodes: Set[int] = set()
        for u, v, k in graph.edges(keys=True):
            if k > 0 or graph.has_edge(v, u):
                nodes.update((u, v))
        for cycle in nx.cycle_basis(nx.Graph(graph)):
            nodes.update(cycle)
        return nodes

    def upstream(self, graph: nx.MultiDiGraph, node_id: int) -> Set[int]:
        """Nodes whose mass reaches the given node."""
        return nx.ancestors(graph, node_id)

    def downstream(self, graph: nx.MultiDiGraph, node_id: int) -> Set[int]:
        """Nodes reachable forward in time from the given node."""
        return nx.descendants(graph, node_id)

    def save_graph(self, graph: nx.MultiDiGraph, output_path: str, format: str = "gexf") -> None:
        """
        Save the graph to a file.
        Converts all tuple attributes to list for serialization.
        """
        graph_to_save = nx.DiGraph() if format == "gml" else graph.copy()
        if format == "gml":
            # gml keys must be strings and parallel edges are not expected here
            graph_to_save.add_nodes_from(graph.nodes(data=True))
            graph_to_save.add_edges_from((u, v, d) for u, v, d in graph.edges(data=True))
            graph_to_save = nx.relabel_nodes(graph_to_save, str)
        for n, attrs in graph_to_save.nodes(data=True):
            for k, v in list(attrs.items()):
                if isinstance(v, tuple):
                    attrs[k] = list(v)
        if format in ("gexf", "graphml"):
            # neither format stores list-valued attributes
            for n, attrs in graph_to_save.nodes(data=True):
                pos = attrs.pop("pos", None)
                if pos is not None:
                    attrs["x"], attrs["y"] = float(pos[0]), float(pos[1])
            graph_to_save.graph.clear()
        if format == "gexf":
            nx.write_gexf(graph_to_save, output_path)
        elif format == "graphml":
            nx.write_graphml(graph_to_save, output_path)
        elif format == "gml":
            nx.write_gml(graph_to_save, output_path)
        else:
            raise ValueError(f"Unsupported format: {format}")

    def visualize_flow(self, flow: PolygonalFlow, output_path: Optional[str] = None,
                       with_labels: bool = False) -> None:
        """
        Draw the planar projection of a flow.

        Edge width grows like flux^{1/2}, edge colour encodes the mean time of
        the edge and leaves are drawn as disks of radius ε.

        Args:
            flow: Polygonal flow
            output_path: Path to save the figure; nothing is saved if None
            with_labels: Whether to show node ids
        """
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        from matplotlib.collections import LineCollection

        graph = self.build_graph(flow)
        pos = nx.get_node_attributes(graph, "pos")
        fig, ax = plt.subplots(figsize=self.config.get("figure_size", (8, 8)))
        segments = flow.positions[flow.edges]
        mid_times = flow.times[flow.edges].mean(axis=1) if flow.n_edges else np.zeros(0)
        lines = LineCollection(
            segments, linewidths=1.0 + 6.0 * np.sqrt(flow.fluxes / max(flow.mass, 1e-300)),
            cmap=self.config.get("cmap", "viridis"), array=mid_times)
        ax.add_collection(lines)
        if flow.eps > 0:
            for leaf in flow.leaves:
                ax.add_patch(plt.Circle(flow.positions[leaf], flow.eps,
                                        color="tab:orange", alpha=0.4))
        if with_labels:
            nx.draw_networkx_labels(nx.Graph(graph), pos, ax=ax, font_size=7)
        ax.autoscale()
        ax.set_aspect("equal")
        fig.colorbar(lines, ax=ax, label="t")
        if output_path:
            fig.savefig(output_path, dpi=self.config.get("dpi", 150))
            logger.info("Flow drawing saved to %s", output_path)
        plt.close(fig)
