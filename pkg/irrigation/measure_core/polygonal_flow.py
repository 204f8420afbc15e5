import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import FlowError
from .atomic_measure import point_set_diameter


@dataclass(frozen=True)
class FlowNode:
    id: int
    x: Tuple[float, float]
    t: float


@dataclass(frozen=True)
class FlowEdge:
    tail: int
    head: int
    flux: float


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PolygonalFlow:
    """
    A locally polygonal flow: a time-stamped forest with fluxes on edges.

    Nodes are addressed by integer ids in files and public operations and by
    row index internally. Atoms travel on straight segments between the
    endpoints of an edge.

    Attributes:
        node_ids: (n,) integer ids
        positions: (n, 2) node positions
        times: (n,) node times
        edges: (m, 2) tail and head row indices
        fluxes: (m,) edge fluxes
        eps: leaf regularization radius used by the boundary norm
        rooted: whether the flow must end in a single root at the horizon
    """

    node_ids: np.ndarray
    positions: np.ndarray
    times: np.ndarray
    edges: np.ndarray
    fluxes: np.ndarray
    eps: float = 0.0
    rooted: bool = True

    @classmethod
    def from_records(cls, nodes: Iterable[Sequence], edges: Iterable[Sequence],
                     eps: float = 0.0, rooted: bool = True) -> "PolygonalFlow":
        """
        Build a flow from plain records.

        Args:
            nodes: (id, (x, y), t) tuples
            edges: (tail id, head id, flux) tuples
            eps: Leaf regularization radius
            rooted: Single-root flag

        Returns:
            PolygonalFlow
        """
        nodes = list(nodes)
        ids = np.array([int(n[0]) for n in nodes], dtype=np.int64)
        if len(np.unique(ids)) != len(ids):
            raise FlowError("Duplicate node ids")
        positions = np.array([[float(n[1][0]), float(n[1][1])] for n in nodes],
                             dtype=float).reshape(-1, 2)
        times = np.array([float(n[2]) for n in nodes], dtype=float)
        index = {int(i): k for k, i in enumerate(ids)}
        edge_rows, fluxes = [], []
        for tail, head, flux in edges:
            if int(tail) not in index or int(head) not in index:
                raise FlowError(f"Edge ({tail}, {head}) references an unknown node")
            edge_rows.append((index[int(tail)], index[int(head)]))
            fluxes.append(float(flux))
        return cls.from_arrays(ids, positions, times,
                               np.array(edge_rows, dtype=np.int64).reshape(-1, 2),
                               np.array(fluxes, dtype=float), eps, rooted)

    @classmethod
    def from_arrays(cls, node_ids, positions, times, edges, fluxes,
                    eps: float = 0.0, rooted: bool = True) -> "PolygonalFlow":
        node_ids = np.asarray(node_ids, dtype=np.int64).copy()
        positions = np.asarray(positions, dtype=float).reshape(-1, 2).copy()
        times = np.asarray(times, dtype=float).reshape(-1).copy()
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2).copy()
        fluxes = np.asarray(fluxes, dtype=float).reshape(-1).copy()
        if not (len(node_ids) == len(positions) == len(times)):
            raise FlowError("Node arrays differ in length")
        if len(edges) != len(fluxes):
            raise FlowError("Edge arrays differ in length")
        if len(edges) and (edges.min() < 0 or edges.max() >= len(node_ids)):
            raise FlowError("Edge endpoints out of range")
        if eps < 0.0 or not math.isfinite(eps):
            raise FlowError(f"Leaf regularization must be finite and >= 0, got {eps}")
        return cls(_frozen(node_ids), _frozen(positions), _frozen(times),
                   _frozen(edges), _frozen(fluxes), float(eps), bool(rooted))

    def with_geometry(self, positions=None, times=None, fluxes=None,
                      eps: Optional[float] = None) -> "PolygonalFlow":
        """Same topology with replaced coordinates, times or fluxes."""
        return PolygonalFlow.from_arrays(
            self.node_ids,
            self.positions if positions is None else positions,
            self.times if times is None else times,
            self.edges,
            self.fluxes if fluxes is None else fluxes,
            self.eps if eps is None else eps,
            self.rooted)

    # --- sizes and lookups -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def index_of(self) -> Dict[int, int]:
        return {int(i): k for k, i in enumerate(self.node_ids)}

    def node_index(self, node_id: int) -> int:
        try:
            return self.index_of[int(node_id)]
        except KeyError:
            raise FlowError(f"Unknown node id {node_id}") from None

    @cached_property
    def in_edges(self) -> List[List[int]]:
        result: List[List[int]] = [[] for _ in range(self.n_nodes)]
        for e, head in enumerate(self.edges[:, 1]):
            result[head].append(e)
        return result

    @cached_property
    def out_edges(self) -> List[List[int]]:
        result: List[List[int]] = [[] for _ in range(self.n_nodes)]
        for e, tail in enumerate(self.edges[:, 0]):
            result[tail].append(e)
        return result

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.n_nodes)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.n_nodes)

    @cached_property
    def leaves(self) -> np.ndarray:
        """Row indices of nodes with outgoing but no incoming edges."""
        return np.flatnonzero((self.in_degree == 0) & (self.out_degree > 0))

    @cached_property
    def roots(self) -> np.ndarray:
        """Row indices of nodes with incoming but no outgoing edges."""
        return np.flatnonzero((self.out_degree == 0) & (self.in_degree > 0))

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero((self.in_degree > 0) & (self.out_degree > 0))

    @property
    def root(self) -> int:
        """Row index of the single root."""
        if len(self.roots) != 1:
            raise FlowError(f"Flow has {len(self.roots)} roots, expected one")
        return int(self.roots[0])

    @cached_property
    def topological_order(self) -> np.ndarray:
        """Rows sorted by time (edges strictly increase time)."""
        return np.lexsort((self.node_ids, self.times))

    # --- geometry ----------------------------------------------------------

    @property
    def horizon(self) -> float:
        """Time T of the final node(s)."""
        return float(self.times.max()) if self.n_nodes else 0.0

    @property
    def t_start(self) -> float:
        return float(self.times.min()) if self.n_nodes else 0.0

    @cached_property
    def durations(self) -> np.ndarray:
        return self.times[self.edges[:, 1]] - self.times[self.edges[:, 0]]

    @cached_property
    def displacements(self) -> np.ndarray:
        return self.positions[self.edges[:, 1]] - self.positions[self.edges[:, 0]]

    @cached_property
    def scene_diameter(self) -> float:
        return point_set_diameter(self.positions)

    @property
    def mass(self) -> float:
        """Total mass Φ leaving the leaves."""
        if self.n_edges == 0:
            return 0.0
        leaf_edges = [e for leaf in self.leaves for e in self.out_edges[leaf]]
        return math.fsum(self.fluxes[leaf_edges])

    @property
    def is_in_forest(self) -> bool:
        """Every node has at most one outgoing edge."""
        return bool(np.all(self.out_degree <= 1))

    def leaf_weights(self) -> np.ndarray:
        """Outgoing flux of each leaf, ordered like `leaves`."""
        return np.array([math.fsum(self.fluxes[self.out_edges[leaf]])
                         for leaf in self.leaves])

    def nodes(self) -> List[FlowNode]:
        return [FlowNode(int(i), (float(p[0]), float(p[1])), float(t))
                for i, p, t in zip(self.node_ids, self.positions, self.times)]

    def edge_records(self) -> List[FlowEdge]:
        return [FlowEdge(int(self.node_ids[a]), int(self.node_ids[b]), float(f))
                for (a, b), f in zip(self.edges, self.fluxes)]

    def next_node_id(self) -> int:
        return int(self.node_ids.max()) + 1 if self.n_nodes else 0

    def breakpoints(self, a: Optional[float] = None, b: Optional[float] = None) -> np.ndarray:
        """Sorted distinct node times, clipped to [a, b] with both ends included."""
        a = self.t_start if a is None else a
        b = self.horizon if b is None else b
        inner = self.times[(self.times > a) & (self.times < b)]
        return np.unique(np.concatenate([[a], inner, [b]]))

    def active_edges(self, t: float) -> np.ndarray:
        """Edges whose atom exists at time t (see `slice_flow`)."""
        tails = self.times[self.edges[:, 0]]
        heads = self.times[self.edges[:, 1]]
        active = (tails <= t) & (t < heads)
        ending = (heads == t) & (self.out_degree[self.edges[:, 1]] == 0)
        return np.flatnonzero(active | ending)

    def edge_positions_at(self, edge_rows: np.ndarray, t: float) -> np.ndarray:
        tails = self.edges[edge_rows, 0]
        heads = self.edges[edge_rows, 1]
        t0 = self.times[tails]
        d = self.times[heads] - t0
        frac = np.clip((t - t0) / d, 0.0, 1.0)[:, None]
        return self.positions[tails] + frac * (self.positions[heads] - self.positions[tails])
