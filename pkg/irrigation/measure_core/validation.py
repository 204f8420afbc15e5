import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .polygonal_flow import PolygonalFlow

KIRCHHOFF_TOL = 1e-12


class ViolationKind(Enum):
    """Kinds of structural defects of a flow."""
    TIME_ORDER = "time-order"
    KIRCHHOFF = "kirchhoff"
    CYCLE = "cycle"
    MASS = "mass"
    FLUX = "flux"
    ROOTED = "rooted"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    ids: Tuple[int, ...]
    magnitude: float

    def describe(self) -> str:
        return f"{self.kind.value} at {list(self.ids)} (magnitude {self.magnitude:.3e})"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"kind": v.kind.value, "ids": list(v.ids), "magnitude": v.magnitude}
                for v in self.violations
            ],
        }


def validate_flow(flow: PolygonalFlow, rooted: Optional[bool] = None) -> ValidationReport:
    """
    Check the structural invariants of a flow.

    Args:
        flow: Flow to check
        rooted: Enforce a single root at the horizon (default: flow.rooted)

    Returns:
        ValidationReport listing every violation found
    """
    # local import: graph_builder depends on measure_core
    from ..graph_builder import NetworkXBuilder

    report = ValidationReport()
    rooted = flow.rooted if rooted is None else rooted
    ids = flow.node_ids
    if not (np.all(np.isfinite(flow.positions)) and np.all(np.isfinite(flow.times))):
        bad = np.flatnonzero(~(np.isfinite(flow.positions).all(axis=1) & np.isfinite(flow.times)))
        report.violations.append(Violation(
            ViolationKind.TIME_ORDER, tuple(int(ids[i]) for i in bad), math.inf))
        return report

    for e in np.flatnonzero(~np.isfinite(flow.fluxes) | (flow.fluxes <= 0.0)):
        a, b = flow.edges[e]
        report.violations.append(Violation(
            ViolationKind.FLUX, (int(ids[a]), int(ids[b])), float(flow.fluxes[e])))

    for e in np.flatnonzero(flow.durations <= 0.0):
        a, b = flow.edges[e]
        report.violations.append(Violation(
            ViolationKind.TIME_ORDER, (int(ids[a]), int(ids[b])), float(-flow.durations[e])))

    inflow = np.zeros(flow.n_nodes)
    outflow = np.zeros(flow.n_nodes)
    np.add.at(inflow, flow.edges[:, 1], flow.fluxes)
    np.add.at(outflow, flow.edges[:, 0], flow.fluxes)
    for i in flow.interior:
        imbalance = abs(inflow[i] - outflow[i])
        if imbalance > KIRCHHOFF_TOL:
            report.violations.append(Violation(
                ViolationKind.KIRCHHOFF, (int(ids[i]),), float(imbalance)))

    builder = NetworkXBuilder()
    graph = builder.build_graph(flow)
    rank = builder.cycle_rank(graph)
    if rank > 0:
        report.violations.append(Violation(
            ViolationKind.CYCLE, tuple(sorted(builder.cycle_nodes(graph))), float(rank)))

    if flow.n_edges and not report.kinds() & {ViolationKind.TIME_ORDER, ViolationKind.FLUX}:
        _check_mass(flow, report)

    if rooted and flow.n_edges:
        _check_rooted(flow, report)
    return report


def _check_mass(flow: PolygonalFlow, report: ValidationReport) -> None:
    phi = flow.mass
    tol = KIRCHHOFF_TOL * max(1.0, phi)
    tails = flow.times[flow.edges[:, 0]]
    heads = flow.times[flow.edges[:, 1]]
    grid = flow.breakpoints()
    times = np.concatenate([grid, 0.5 * (grid[1:] + grid[:-1])])
    for t in np.sort(times):
        alive = (tails <= t) & (t < heads)
        if t == flow.horizon:
            alive = (tails < t) & (heads == t)
        level_mass = math.fsum(flow.fluxes[alive])
        if abs(level_mass - phi) > tol:
            report.violations.append(Violation(ViolationKind.MASS, (), float(level_mass - phi)))
            return


def _check_rooted(flow: PolygonalFlow, report: ValidationReport) -> None:
    roots = flow.roots
    horizon = flow.horizon
    if len(roots) != 1 or flow.times[roots[0]] != horizon:
        report.violations.append(Violation(
            ViolationKind.ROOTED, tuple(int(flow.node_ids[r]) for r in roots), float(len(roots))))
    late = [int(flow.node_ids[leaf]) for leaf in flow.leaves
            if flow.times[leaf] != flow.t_start]
    if late:
        report.violations.append(Violation(ViolationKind.ROOTED, tuple(late), float(len(late))))
    isolated = np.flatnonzero((flow.in_degree == 0) & (flow.out_degree == 0))
    if len(isolated):
        report.violations.append(Violation(
            ViolationKind.ROOTED, tuple(int(flow.node_ids[i]) for i in isolated),
            float(len(isolated))))
