import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import ot

from ..errors import FlowError, TransportError
from ..measure_core import AtomicMeasure, PolygonalFlow, slice_flow
from ..measure_core.serialization import save_csv

logger = logging.getLogger(__name__)

MAX_ATOMS = 1000
MASS_TOL = 1e-10
PLAN_CSV_HEADER = ("source", "target", "mass")


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse coupling between two atomic measures."""

    sources: np.ndarray
    targets: np.ndarray
    masses: np.ndarray
    cost: float

    def entries(self) -> List[Tuple[int, int, float]]:
        return [(int(i), int(j), float(m))
                for i, j, m in zip(self.sources, self.targets, self.masses)]

    def marginals(self, n_sources: int, n_targets: int) -> Tuple[np.ndarray, np.ndarray]:
        return (np.bincount(self.sources, weights=self.masses, minlength=n_sources),
                np.bincount(self.targets, weights=self.masses, minlength=n_targets))

    def to_csv_rows(self) -> List[Tuple[int, int, float]]:
        return self.entries()


def plan_to_csv(plan: TransportPlan, path: str) -> None:
    """Write the plan entries as (source, target, mass) rows."""
    save_csv(path, PLAN_CSV_HEADER, plan.to_csv_rows())


def _refit_on_forest(support: np.ndarray, wa: np.ndarray, wb: np.ndarray):
    """
    Recompute plan masses from the marginals on a forest support.

    Leaf elimination determines every entry uniquely; returns None when the
    support is not a forest or a mass turns negative.
    """
    m = len(wa)
    rows, cols = support
    n_edges = len(rows)
    adjacency = [[] for _ in range(m + len(wb))]
    for e, (i, j) in enumerate(zip(rows, cols)):
        adjacency[i].append(e)
        adjacency[m + j].append(e)
    degree = np.array([len(a) for a in adjacency])
    residual = np.concatenate([wa, wb]).astype(float)
    masses = np.full(n_edges, np.nan)
    done = np.zeros(n_edges, dtype=bool)
    queue = deque(int(u) for u in np.flatnonzero(degree == 1))
    while queue:
        u = queue.popleft()
        if degree[u] != 1:
            continue
        e = next(e for e in adjacency[u] if not done[e])
        v = m + cols[e] if u < m else rows[e]
        masses[e] = residual[u]
        residual[u] = 0.0
        residual[v] -= masses[e]
        done[e] = True
        degree[u] -= 1
        degree[v] -= 1
        if degree[v] == 1:
            queue.append(int(v))
    if not done.all() or np.any(masses < -1e-12):
        return None
    return np.clip(masses, 0.0, None)


def wasserstein2(a: AtomicMeasure, b: AtomicMeasure) -> Tuple[float, TransportPlan]:
    """
    Exact quadratic Wasserstein cost between two atomic measures.

    Solved by POT's network simplex; the returned plan is a vertex of the
    transportation polytope.

    Args:
        a: Source measure
        b: Target measure with the same total mass

    Returns:
        (cost, plan)
    """
    if len(a) == 0 or len(b) == 0:
        raise TransportError("Transport needs nonempty measures")
    if len(a) > MAX_ATOMS or len(b) > MAX_ATOMS:
        raise TransportError(
            f"Exact solver limited to {MAX_ATOMS} atoms per side, got {len(a)} and {len(b)}")
    mass_a, mass_b = a.mass, b.mass
    if abs(mass_a - mass_b) > MASS_TOL:
        raise TransportError(f"Mass mismatch: {mass_a!r} vs {mass_b!r}")
    wa = np.array(a.weights, dtype=np.float64)
    wb = np.array(b.weights, dtype=np.float64) * (mass_a / mass_b)
    cost_matrix = ot.dist(np.asarray(a.positions, dtype=np.float64),
                          np.asarray(b.positions, dtype=np.float64), metric="sqeuclidean")
    coupling = ot.emd(wa, wb, cost_matrix, numItermax=10_000_000)
    support = np.nonzero(coupling > 0.0)
    masses = _refit_on_forest(support, wa, wb)
    if masses is None:
        logger.warning("Transport plan support is not a forest, keeping raw coupling")
        masses = coupling[support]
    keep = masses > 0.0
    sources, targets, masses = support[0][keep], support[1][keep], masses[keep]
    cost = math.fsum(masses * cost_matrix[sources, targets])
    return cost, TransportPlan(sources, targets, masses, cost)


def bb_gap(flow: PolygonalFlow, a: float, b: float) -> float:
    """
    Kinetic energy on (a, b) minus its Benamou-Brenier lower bound.

    Returns:
        E(flow, (a, b)) - W²(μ_a, μ_b) / (b - a), nonnegative up to rounding
    """
    # local import: energy is evaluated per interval
    from ..energy import energy_breakdown

    if not (flow.t_start <= a < b <= flow.horizon):
        raise FlowError(f"Invalid interval ({a}, {b}) for horizon {flow.horizon}")
    kinetic = energy_breakdown(flow, a, b).E
    cost, _ = wasserstein2(slice_flow(flow, a), slice_flow(flow, b))
    return kinetic - cost / (b - a)


def straight_transport_flow(a: AtomicMeasure, b: AtomicMeasure, T: float = 1.0) -> PolygonalFlow:
    """Move every plan entry of the optimal coupling on a straight edge over (0, T)."""
    _, plan = wasserstein2(a, b)
    m = len(a)
    nodes = [(i, a.positions[i], 0.0) for i in range(m)]
    nodes += [(m + j, b.positions[j], T) for j in range(len(b))]
    edges = [(i, m + j, w) for i, j, w in plan.entries()]
    return PolygonalFlow.from_records(nodes, edges, eps=0.0, rooted=len(b) == 1)
