"""Local search over flow topologies: coalesce, split and re-parent moves."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ..errors import IrrigationError, OptimizerError
from ..measure_core import PolygonalFlow
from ..potential import RegularizedKernelSpec
from .config import Constraints, OptimizerConfig
from .objective import MIN_DURATION_RTOL
from .position_optimizer import Trace, TraceRow, objective_value, optimize_positions

logger = logging.getLogger(__name__)

# candidates closer than this in 𝓔 tie; ties go to the flow with fewer edges
ACCEPT_TOL = 1e-10


@dataclass
class _InTree:
    """Mutable parent-array view of a rooted in-tree."""

    ids: List[int]
    x: List[np.ndarray]
    t: List[float]
    parent: List[int]
    weight: List[float]
    eps: float
    next_id: int

    @classmethod
    def of(cls, flow: PolygonalFlow) -> "_InTree":
        if not flow.is_in_forest or len(flow.roots) != 1:
            raise OptimizerError("Topology moves need a rooted in-tree")
        parent = [-1] * flow.n_nodes
        for tail, head in flow.edges:
            parent[int(tail)] = int(head)
        weight = [0.0] * flow.n_nodes
        for v, w in zip(flow.leaves, flow.leaf_weights()):
            weight[int(v)] = float(w)
        return cls([int(i) for i in flow.node_ids], [np.array(p) for p in flow.positions],
                   [float(s) for s in flow.times], parent, weight, flow.eps, flow.next_node_id())

    def children(self, v: int) -> List[int]:
        return [u for u, p in enumerate(self.parent) if p == v]

    def ancestors(self, v: int) -> List[int]:
        out = []
        while self.parent[v] >= 0:
            v = self.parent[v]
            out.append(v)
        return out

    def add_node(self, x, t: float, parent: int) -> int:
        self.ids.append(self.next_id)
        self.next_id += 1
        self.x.append(np.asarray(x, dtype=float))
        self.t.append(float(t))
        self.parent.append(parent)
        self.weight.append(0.0)
        return len(self.ids) - 1

    def remove(self, v: int) -> None:
        """Drop a node whose children were already re-attached."""
        self.parent = [p if p < v else p - 1 for k, p in enumerate(self.parent) if k != v]
        for arr in (self.ids, self.x, self.t, self.weight):
            del arr[v]

    def to_flow(self) -> PolygonalFlow:
        n = len(self.ids)
        order = np.argsort(self.t, kind="stable")
        carried = np.array(self.weight, dtype=float)
        for v in order:
            if self.parent[v] >= 0:
                carried[self.parent[v]] += carried[v]
        edges = [(v, p) for v, p in enumerate(self.parent) if p >= 0]
        return PolygonalFlow.from_arrays(
            self.ids, np.array(self.x).reshape(n, 2), self.t,
            np.array(edges, dtype=np.int64).reshape(-1, 2),
            [carried[v] for v, _ in edges], self.eps, True)


def _coalesce_moves(flow: PolygonalFlow, merge_tol: float) -> List[PolygonalFlow]:
    interior = flow.interior
    if len(interior) < 2:
        return []
    points = np.column_stack([flow.positions[interior], flow.times[interior]])
    moves = []
    d_min = MIN_DURATION_RTOL * (flow.horizon - flow.t_start)
    for i, j in sorted(cKDTree(points).query_pairs(merge_tol)):
        u, v = int(interior[i]), int(interior[j])
        tree = _InTree.of(flow)
        if tree.parent[v] == u:
            u, v = v, u
        if tree.parent[u] == v:
            # contract the edge into the later node
            for c in tree.children(u):
                tree.parent[c] = v
        elif tree.parent[u] == tree.parent[v]:
            for c in tree.children(u):
                tree.parent[c] = v
            kids = tree.children(v)
            lo = max(tree.t[c] for c in kids) + d_min
            hi = tree.t[tree.parent[v]] - d_min
            tree.x[v] = 0.5 * (tree.x[u] + tree.x[v])
            tree.t[v] = min(max(0.5 * (tree.t[u] + tree.t[v]), lo), hi)
            if lo > hi:
                continue
        else:
            continue
        tree.remove(u)
        moves.append(tree.to_flow())
    return moves


def _split_moves(flow: PolygonalFlow) -> List[PolygonalFlow]:
    moves = []
    weights = flow.fluxes
    for v in np.flatnonzero(flow.in_degree >= 3):
        tree = _InTree.of(flow)
        kids = [(int(flow.edges[e, 0]), float(weights[e])) for e in flow.in_edges[v]]
        best, pair = np.inf, None
        for a in range(len(kids)):
            for b in range(a + 1, len(kids)):
                dist = float(np.linalg.norm(tree.x[kids[a][0]] - tree.x[kids[b][0]]))
                if dist < best:
                    best, pair = dist, (kids[a], kids[b])
        (a, wa), (b, wb) = pair
        mean = (wa * tree.x[a] + wb * tree.x[b]) / (wa + wb)
        t_new = tree.t[v] - 0.5 * (tree.t[v] - max(tree.t[a], tree.t[b]))
        node = tree.add_node(0.5 * (mean + tree.x[v]), t_new, int(v))
        tree.parent[a] = node
        tree.parent[b] = node
        moves.append(tree.to_flow())
    return moves


def _reparent_moves(flow: PolygonalFlow) -> List[PolygonalFlow]:
    moves = []
    d_min = MIN_DURATION_RTOL * (flow.horizon - flow.t_start)
    tails, heads = flow.edges[:, 0], flow.edges[:, 1]
    mid_x = 0.5 * (flow.positions[tails] + flow.positions[heads])
    mid_t = 0.5 * (flow.times[tails] + flow.times[heads])
    for leaf in flow.leaves:
        tree = _InTree.of(flow)
        p = tree.parent[leaf]
        if flow.in_degree[p] < 2:
            continue
        on_path = set([int(leaf)] + tree.ancestors(int(leaf)))
        allowed = np.array([int(c) not in on_path and mid_t[e] > tree.t[leaf] + d_min
                            for e, c in enumerate(tails)])
        if not allowed.any():
            continue
        dist = np.linalg.norm(mid_x - flow.positions[leaf], axis=1)
        e = int(np.argmin(np.where(allowed, dist, np.inf)))
        c, head = int(tails[e]), int(heads[e])
        node = tree.add_node(mid_x[e], mid_t[e], head)
        tree.parent[c] = node
        tree.parent[leaf] = node
        if len(tree.children(p)) == 1 and tree.parent[p] >= 0:
            # passthrough left behind
            tree.parent[tree.children(p)[0]] = tree.parent[p]
            tree.remove(p)
        moves.append(tree.to_flow())
    return moves


class TopologySearch:
    """
    Alternates optimize_positions with local topology moves.

    A candidate replaces the current flow when its optimized 𝓔 is lower by
    more than ACCEPT_TOL, or ties within ACCEPT_TOL with fewer edges.
    """

    def __init__(self, cfg: Optional[OptimizerConfig] = None,
                 constraints: Optional[Constraints] = None,
                 spec: Optional[RegularizedKernelSpec] = None):
        self.cfg = cfg or OptimizerConfig()
        self.constraints = constraints
        self.spec = spec
        self.rng = np.random.default_rng(self.cfg.seed)
        self.trace = Trace()

    def candidates(self, flow: PolygonalFlow) -> List[Tuple[str, PolygonalFlow]]:
        moves = [("coalesce", f) for f in _coalesce_moves(flow, self.cfg.merge_tol)]
        moves += [("split", f) for f in _split_moves(flow)]
        moves += [("reparent", f) for f in _reparent_moves(flow)]
        order = self.rng.permutation(len(moves))
        return [moves[k] for k in order[:self.cfg.moves_per_round]]

    def _better(self, value: float, flow: PolygonalFlow,
                best_value: float, best: PolygonalFlow) -> bool:
        if value < best_value - ACCEPT_TOL:
            return True
        return abs(value - best_value) <= ACCEPT_TOL and flow.n_edges < best.n_edges

    def run(self, flow: PolygonalFlow) -> Tuple[PolygonalFlow, Trace]:
        start_value = objective_value(flow, self.spec)
        best, trace = optimize_positions(flow, self.cfg, self.constraints, self.spec)
        self.trace = trace
        best_value = trace.final.total
        if best_value > start_value:
            best, best_value = flow, start_value
        for round_ in range(self.cfg.max_rounds):
            accepted = False
            for tag, candidate in self.candidates(best):
                try:
                    optimized, sub_trace = optimize_positions(candidate, self.cfg,
                                                              self.constraints, self.spec)
                except IrrigationError as exc:
                    logger.debug("Skipping %s candidate: %s", tag, exc)
                    continue
                value = sub_trace.final.total
                if self._better(value, optimized, best_value, best):
                    logger.debug("Round %d: %s move lowers 𝓔 from %.10g to %.10g",
                                 round_, tag, best_value, value)
                    best, best_value = optimized, value
                    last = sub_trace.final
                    self.trace.extend(sub_trace)
                    self.trace.append(TraceRow(self.trace.final.iter + 1, last.total, last.P,
                                               last.E, last.boundary, last.grad_norm, tag))
                    self.trace.converged = sub_trace.converged
                    accepted = True
                    break
            if not accepted:
                break
        logger.info("Topology search finished with 𝓔 = %.10g and %d edges",
                    best_value, best.n_edges)
        return best, self.trace


def topology_search(flow: PolygonalFlow, cfg: Optional[OptimizerConfig] = None,
                    constraints: Optional[Constraints] = None,
                    spec: Optional[RegularizedKernelSpec] = None) -> PolygonalFlow:
    """
    Search topologies around a rooted in-tree.

    Args:
        flow: Valid rooted flow
        cfg: Optimizer settings (merge_tol, moves_per_round, max_rounds, seed)
        constraints: Constraints applied to every optimization
        spec: Kernel of the boundary norm

    Returns:
        Best flow found; its 𝓔 never exceeds the input's
    """
    best, _ = TopologySearch(cfg, constraints, spec).run(flow)
    return best
