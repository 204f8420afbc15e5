import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..errors import FlowError, MeasureError
from ..measure_core import AtomicMeasure, PolygonalFlow, boundary_measure

CSV_HEADER = ("a", "b", "P", "E", "I", "boundary_norm_sq", "total")


@dataclass(frozen=True)
class EnergyBreakdown:
    """Perimeter, kinetic and internal energy of a flow over an interval."""

    P: float
    E: float
    I: float
    interval: Tuple[float, float]
    boundary_norm_sq: Optional[float] = None
    total: Optional[float] = None

    def as_row(self) -> tuple:
        return (self.interval[0], self.interval[1], self.P, self.E, self.I,
                "" if self.boundary_norm_sq is None else self.boundary_norm_sq,
                "" if self.total is None else self.total)

    def to_dict(self) -> dict:
        return dict(zip(CSV_HEADER, (self.interval[0], self.interval[1], self.P, self.E,
                                     self.I, self.boundary_norm_sq, self.total)))


def perimeter_rate(m: AtomicMeasure) -> float:
    """Σ w_i^{1/2} - Φ^{1/2}; zero exactly for a single atom."""
    if len(m) == 0:
        raise MeasureError("Perimeter rate of an empty measure")
    if len(m) == 1:
        return 0.0
    return math.fsum(np.sqrt(m.weights)) - math.sqrt(m.mass)


def _kinetic(weights: np.ndarray, velocities: np.ndarray) -> float:
    return math.fsum(weights * np.einsum("ij,ij->i", velocities, velocities))


def kinetic_rate(m: AtomicMeasure, velocities) -> float:
    """Σ w_i |v_i|² for atoms of ``m`` moving with the given planar velocities."""
    try:
        v = np.asarray(velocities, dtype=float).reshape(len(m), 2)
    except ValueError:
        raise MeasureError(f"Expected {len(m)} planar velocities, got shape "
                           f"{np.shape(velocities)}") from None
    if not np.all(np.isfinite(v)):
        raise MeasureError("Velocities must be finite")
    return _kinetic(m.weights, v)


def _interval(flow: PolygonalFlow, a: Optional[float], b: Optional[float]) -> Tuple[float, float]:
    a = flow.t_start if a is None else float(a)
    b = flow.horizon if b is None else float(b)
    if not (flow.t_start <= a < b <= flow.horizon):
        raise FlowError(f"Invalid interval ({a}, {b}) for flow on "
                        f"[{flow.t_start}, {flow.horizon}]")
    return a, b


def _level_masses(flow: PolygonalFlow, grid: np.ndarray) -> np.ndarray:
    """Mass alive on each open interval between consecutive grid times."""
    tails = flow.times[flow.edges[:, 0]]
    heads = flow.times[flow.edges[:, 1]]
    mids = 0.5 * (grid[1:] + grid[:-1])
    alive = (tails[:, None] < mids[None, :]) & (mids[None, :] < heads[:, None])
    return np.array([math.fsum(flow.fluxes[alive[:, k]]) for k in range(len(mids))])


def energy_breakdown(flow: PolygonalFlow, a: Optional[float] = None,
                     b: Optional[float] = None) -> EnergyBreakdown:
    """
    Exact P, E and I of a polygonal flow over (a, b).

    P is the sum of flux^{1/2} times the part of each edge inside (a, b),
    minus Φ_k^{1/2} Δt over each constant-topology interval k; E sums
    flux |velocity|² over the same edge portions.

    Args:
        flow: A valid flow
        a: Interval start, default the start time
        b: Interval end, default the horizon

    Returns:
        EnergyBreakdown without boundary term
    """
    if flow.n_edges == 0:
        if a is None and b is None:
            return EnergyBreakdown(0.0, 0.0, 0.0, (flow.t_start, flow.horizon))
        raise FlowError("Flow without edges has no time interval")
    a, b = _interval(flow, a, b)
    tails = flow.times[flow.edges[:, 0]]
    heads = flow.times[flow.edges[:, 1]]
    overlap = np.clip(np.minimum(b, heads) - np.maximum(a, tails), 0.0, None)
    d = flow.durations
    disp = flow.displacements
    speed_sq = np.einsum("ij,ij->i", disp, disp) / (d * d)
    kinetic = math.fsum(flow.fluxes * speed_sq * overlap)

    grid = flow.breakpoints(a, b)
    masses = _level_masses(flow, grid)
    perimeter = (math.fsum(np.sqrt(flow.fluxes) * overlap)
                 - math.fsum(np.sqrt(masses) * np.diff(grid)))
    return EnergyBreakdown(perimeter, kinetic, perimeter + kinetic, (a, b))


def rate_profile(flow: PolygonalFlow) -> List[Tuple[float, float, float, float]]:
    """(a, b, perimeter rate, kinetic rate) on each constant-topology interval."""
    grid = flow.breakpoints()
    tails = flow.times[flow.edges[:, 0]]
    heads = flow.times[flow.edges[:, 1]]
    velocities = flow.displacements / flow.durations[:, None]
    rows = []
    for lo, hi in zip(grid[:-1], grid[1:]):
        mid = 0.5 * (lo + hi)
        alive = (tails < mid) & (mid < heads)
        phi = flow.fluxes[alive]
        rows.append((float(lo), float(hi),
                     math.fsum(np.sqrt(phi)) - math.sqrt(math.fsum(phi)),
                     _kinetic(phi, velocities[alive])))
    return rows


def internal_energy(flow: PolygonalFlow) -> float:
    """I over the full time span (0 for a flow without edges)."""
    return energy_breakdown(flow).I


def total_energy(flow: PolygonalFlow, spec=None) -> EnergyBreakdown:
    """
    Internal energy plus the H^{-1/2} norm² of the regularized initial slice.

    A flow with ε = 0 carries no boundary term: boundary_norm_sq is None and
    total equals I.

    Args:
        flow: A valid rooted flow
        spec: RegularizedKernelSpec for the boundary norm (default disk mode)

    Returns:
        EnergyBreakdown with boundary_norm_sq and total filled in
    """
    from ..potential import RegularizedKernelSpec, hminus_half_norm_sq

    base = energy_breakdown(flow)
    if flow.eps <= 0.0 or flow.n_edges == 0:
        return EnergyBreakdown(base.P, base.E, base.I, base.interval, None, base.I)
    spec = spec or RegularizedKernelSpec()
    norm_sq = hminus_half_norm_sq(boundary_measure(flow), spec)
    return EnergyBreakdown(base.P, base.E, base.I, base.interval, norm_sq, base.I + norm_sq)
