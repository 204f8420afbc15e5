"""Slices, subsystems and geometric transforms of polygonal flows."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import FlowError
from .atomic_measure import AtomicMeasure
from .polygonal_flow import PolygonalFlow


class Direction(Enum):
    BACKWARD = "backward"
    FORWARD = "forward"


def _require_edges(flow: PolygonalFlow) -> None:
    if flow.n_edges == 0:
        raise FlowError("Flow has no edges")


def slice_flow(flow: PolygonalFlow, t: float) -> AtomicMeasure:
    """
    Return the slice μ_t of the flow.

    One atom per edge alive at t, at the affine interpolant of its endpoints;
    an edge is alive on [t_tail, t_head), and also at t_head when its head
    has no outgoing edge. Coincident atoms are merged.

    Args:
        flow: A valid flow
        t: Time in [t_start, T]

    Returns:
        AtomicMeasure with total mass Φ
    """
    _require_edges(flow)
    if not (flow.t_start <= t <= flow.horizon):
        raise FlowError(
            f"Time {t} outside [{flow.t_start}, {flow.horizon}]")
    rows = flow.active_edges(t)
    if len(rows) == 0:
        raise FlowError(f"No mass alive at time {t}")
    return AtomicMeasure.from_arrays(flow.edge_positions_at(rows, t),
                                     flow.fluxes[rows],
                                     merge_scale=flow.scene_diameter)


def boundary_measure(flow: PolygonalFlow) -> AtomicMeasure:
    """Initial slice μ_0 with each atom regularized to radius ε."""
    return slice_flow(flow, flow.t_start).with_radii(flow.eps)


@dataclass(frozen=True, eq=False)
class PiecewiseAffinePath:
    """Continuous piecewise-affine curve t -> X(t) in the plane."""

    times: np.ndarray
    points: np.ndarray

    @classmethod
    def constant(cls, point=(0.0, 0.0), t0: float = 0.0, t1: float = 1.0) -> "PiecewiseAffinePath":
        p = np.asarray(point, dtype=float)
        return cls(np.array([t0, t1], dtype=float), np.vstack([p, p]))

    def __call__(self, t: Union[float, np.ndarray]) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.stack([np.interp(t, self.times, self.points[:, 0]),
                        np.interp(t, self.times, self.points[:, 1])], axis=-1)
        return out

    @property
    def interior_breakpoints(self) -> np.ndarray:
        return self.times[1:-1]

    def slopes(self) -> np.ndarray:
        return np.diff(self.points, axis=0) / np.diff(self.times)[:, None]

    def kinetic_integral(self) -> float:
        """∫ |X'(t)|² dt."""
        dt = np.diff(self.times)
        dx = np.diff(self.points, axis=0)
        return math.fsum(np.einsum("ij,ij->i", dx, dx) / dt)


def barycenter_path(flow: PolygonalFlow) -> PiecewiseAffinePath:
    """Barycenter of the slices, affine between consecutive node times."""
    _require_edges(flow)
    times = flow.breakpoints()
    points = np.empty((len(times), 2))
    for k, t in enumerate(times):
        rows = flow.active_edges(t)
        w = flow.fluxes[rows]
        points[k] = (w @ flow.edge_positions_at(rows, t)) / w.sum()
    return PiecewiseAffinePath(times, points)


def barycenter_velocity(flow: PolygonalFlow, t: float) -> np.ndarray:
    """Total momentum over total mass, Σ φ_e v_e / Σ φ_e, at time t."""
    _require_edges(flow)
    tails = flow.times[flow.edges[:, 0]]
    heads = flow.times[flow.edges[:, 1]]
    if t >= flow.horizon:
        rows = np.flatnonzero((tails < t) & (t <= heads))
    else:
        rows = np.flatnonzero((tails <= t) & (t < heads))
    w = flow.fluxes[rows]
    v = flow.displacements[rows] / flow.durations[rows][:, None]
    return (w @ v) / w.sum()


def refine_at_times(flow: PolygonalFlow, times, id_start: Optional[int] = None) -> PolygonalFlow:
    """
    Split edges at the given times by inserting passthrough nodes.

    Slices, fluxes and energies are unchanged; edges crossing none of the
    times are kept as they are.
    """
    cuts_all = np.unique(np.asarray(times, dtype=float))
    if flow.n_edges == 0 or len(cuts_all) == 0:
        return flow
    next_id = flow.next_node_id() if id_start is None else int(id_start)
    ids = list(flow.node_ids)
    positions = [flow.positions]
    node_times = [flow.times]
    new_positions, new_times = [], []
    edges, fluxes = [], []
    n = flow.n_nodes
    for e, (tail, head) in enumerate(flow.edges):
        a, b = flow.times[tail], flow.times[head]
        lo = np.searchsorted(cuts_all, a, side="right")
        hi = np.searchsorted(cuts_all, b, side="left")
        cuts = cuts_all[lo:hi]
        if len(cuts) == 0:
            edges.append((tail, head))
            fluxes.append(flow.fluxes[e])
            continue
        frac = ((cuts - a) / (b - a))[:, None]
        pts = flow.positions[tail] + frac * (flow.positions[head] - flow.positions[tail])
        prev = tail
        for p, c in zip(pts, cuts):
            row = n + len(new_times)
            ids.append(next_id)
            next_id += 1
            new_positions.append(p)
            new_times.append(c)
            edges.append((prev, row))
            fluxes.append(flow.fluxes[e])
            prev = row
        edges.append((prev, head))
        fluxes.append(flow.fluxes[e])
    if not new_times:
        return flow
    return PolygonalFlow.from_arrays(
        ids,
        np.vstack(positions + [np.array(new_positions)]),
        np.concatenate(node_times + [np.array(new_times)]),
        np.array(edges), np.array(fluxes), flow.eps, flow.rooted)


def barycenter_shift(flow: PolygonalFlow) -> Tuple[PolygonalFlow, PiecewiseAffinePath]:
    """
    Recentre every slice at the origin.

    Returns:
        (shifted flow, barycenter path); the shifted flow is refined at the
        path's breakpoints so that the shift is exact on every slice
    """
    path = barycenter_path(flow)
    refined = refine_at_times(flow, path.interior_breakpoints)
    shifted = refined.with_geometry(positions=refined.positions - path(refined.times))
    return shifted, path


def shrink(flow: PolygonalFlow, factor: float,
           center: Optional[PiecewiseAffinePath] = None) -> PolygonalFlow:
    """
    Contract the flow about a centre path: x -> c(t) + factor (x - c(t)).

    Args:
        flow: A valid flow
        factor: Contraction factor in (0, 1]
        center: Centre path, default the barycenter path of the flow

    Returns:
        Shrunk flow, refined at the centre path's breakpoints
    """
    if not (0.0 < factor <= 1.0):
        raise FlowError(f"Shrink factor must lie in (0, 1], got {factor}")
    if factor == 1.0:
        return flow
    if center is None:
        center = barycenter_path(flow)
    refined = refine_at_times(flow, center.interior_breakpoints)
    c = center(refined.times)
    return refined.with_geometry(positions=c + factor * (refined.positions - c))


def extract_subsystem(flow: PolygonalFlow, node_id: int,
                      direction: Union[Direction, str] = Direction.BACKWARD) -> PolygonalFlow:
    """
    Sub-flow of the mass passing through a node.

    Mass is apportioned proportionally to edge fluxes wherever it splits or
    merges, so on in-trees the backward subsystem inherits fluxes exactly
    and the forward subsystem carries the node's mass.

    Args:
        flow: A valid flow
        node_id: Id of the node
        direction: backward (history) or forward (future)

    Returns:
        PolygonalFlow; a single node without edges when nothing flows
    """
    direction = Direction(direction)
    v = flow.node_index(node_id)
    through = np.zeros(flow.n_nodes)
    sub_flux = np.zeros(flow.n_edges)
    inflow = np.zeros(flow.n_nodes)
    outflow = np.zeros(flow.n_nodes)
    np.add.at(inflow, flow.edges[:, 1], flow.fluxes)
    np.add.at(outflow, flow.edges[:, 0], flow.fluxes)
    order = flow.topological_order
    if direction is Direction.BACKWARD:
        through[v] = inflow[v]
        for u in order[::-1]:
            if through[u] <= 0.0 or inflow[u] <= 0.0:
                continue
            frac = 1.0 if u == v else through[u] / inflow[u]
            for e in flow.in_edges[u]:
                sub_flux[e] = flow.fluxes[e] * frac
                through[flow.edges[e, 0]] += sub_flux[e]
    else:
        through[v] = outflow[v]
        for u in order:
            if through[u] <= 0.0 or outflow[u] <= 0.0:
                continue
            frac = 1.0 if u == v else through[u] / outflow[u]
            for e in flow.out_edges[u]:
                sub_flux[e] = flow.fluxes[e] * frac
                through[flow.edges[e, 1]] += sub_flux[e]
    keep_edges = np.flatnonzero(sub_flux > 0.0)
    keep_nodes = np.union1d(flow.edges[keep_edges].ravel(), [v]).astype(np.int64)
    remap = -np.ones(flow.n_nodes, dtype=np.int64)
    remap[keep_nodes] = np.arange(len(keep_nodes))
    return PolygonalFlow.from_arrays(
        flow.node_ids[keep_nodes], flow.positions[keep_nodes], flow.times[keep_nodes],
        remap[flow.edges[keep_edges]], sub_flux[keep_edges], flow.eps,
        rooted=True if direction is Direction.BACKWARD else flow.rooted)


def subsystem_fluxes(flow: PolygonalFlow, sub: PolygonalFlow) -> np.ndarray:
    """Fluxes of `sub` aligned with the edges of `flow` (0 where absent)."""
    lookup = {}
    for (a, b), f in zip(sub.edges, sub.fluxes):
        lookup[(int(sub.node_ids[a]), int(sub.node_ids[b]))] = f
    return np.array([lookup.get((int(flow.node_ids[a]), int(flow.node_ids[b])), 0.0)
                     for a, b in flow.edges])


def complement_flow(flow: PolygonalFlow, sub: PolygonalFlow) -> PolygonalFlow:
    """μ' = μ - μ̃ as a flow; edges left without flux are dropped."""
    remaining = flow.fluxes - subsystem_fluxes(flow, sub)
    if np.any(remaining < -1e-12 * max(1.0, flow.mass)):
        raise FlowError("Subsystem carries more flux than the flow")
    keep_edges = np.flatnonzero(remaining > 0.0)
    keep_nodes = np.unique(flow.edges[keep_edges].ravel())
    remap = -np.ones(flow.n_nodes, dtype=np.int64)
    remap[keep_nodes] = np.arange(len(keep_nodes))
    return PolygonalFlow.from_arrays(
        flow.node_ids[keep_nodes], flow.positions[keep_nodes], flow.times[keep_nodes],
        remap[flow.edges[keep_edges]], remaining[keep_edges], flow.eps, flow.rooted)


def dilate_space(flow: PolygonalFlow, s: float) -> PolygonalFlow:
    """x -> s x; the leaf radius scales alike."""
    return flow.with_geometry(positions=flow.positions * s, eps=flow.eps * s)


def dilate_time(flow: PolygonalFlow, lam: float) -> PolygonalFlow:
    """t -> λ t."""
    return flow.with_geometry(times=flow.times * lam)


def translate(flow: PolygonalFlow, offset) -> PolygonalFlow:
    return flow.with_geometry(positions=flow.positions + np.asarray(offset, dtype=float))
