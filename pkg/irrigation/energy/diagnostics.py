"""Equipartition, concentration and first-moment diagnostics."""

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.optimize import bisect

from ..errors import FlowError, IrrigationError
from ..measure_core import (PolygonalFlow, extract_subsystem, slice_flow)
from .breakdown import energy_breakdown

CONCENTRATION_CUTOFF = 0.2


def equipartition_residual(flow: PolygonalFlow) -> float:
    """
    Λ = P - E + Φ |X_root - X_0|² / (T - t_0) over the full span.

    Nonpositive on minimizers; zero on a static atom.
    """
    if flow.n_edges == 0:
        return 0.0
    breakdown = energy_breakdown(flow)
    x0 = slice_flow(flow, flow.t_start).barycenter()
    x_root = flow.positions[flow.root]
    drift = x_root - x0
    span = flow.horizon - flow.t_start
    return breakdown.P - breakdown.E + flow.mass * float(drift @ drift) / span


@dataclass(frozen=True)
class SubsystemEquipartition:
    node_id: int
    time: float
    residual: float
    internal_energy: float


def subsystem_equipartition(flow: PolygonalFlow) -> List[SubsystemEquipartition]:
    """Λ of the backward subsystem of every node with incoming edges."""
    records = []
    for row in np.flatnonzero(flow.in_degree > 0):
        node_id = int(flow.node_ids[row])
        sub = extract_subsystem(flow, node_id, "backward")
        records.append(SubsystemEquipartition(
            node_id, float(flow.times[row]), equipartition_residual(sub),
            energy_breakdown(sub).I))
    return records


def concentration_threshold(epsilon: float, method: str = "closed") -> float:
    """
    Smaller root δ(ε) of (1 - t)^{1/2} + t^{1/2} - 1 = ε.

    Args:
        epsilon: Value in (0, √2 - 1)
        method: "closed" for the closed form, "bisection" for the numeric root

    Returns:
        δ(ε) in (0, 1/2)
    """
    if not (0.0 < epsilon < math.sqrt(2.0) - 1.0):
        raise IrrigationError(f"Threshold defined for 0 < ε < √2 - 1, got {epsilon}")
    if method == "bisection":
        return bisect(lambda t: math.sqrt(1.0 - t) + math.sqrt(t) - 1.0 - epsilon,
                      0.0, 0.5, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    c = 1.0 + epsilon
    root = 0.5 * (c - math.sqrt(2.0 - c * c))
    return root * root


def concentration_bound(weights: Sequence[float], epsilon: float) -> float:
    """
    Mass fraction outside the heaviest atom of a slice with small perimeter.

    Args:
        weights: Positive atom masses
        epsilon: Perimeter budget; requires Σ w^{1/2} - Φ^{1/2} <= ε Φ^{1/2}

    Returns:
        δ = (Φ - max w) / Φ, checked against δ(ε) when ε <= 0.2
    """
    w = np.asarray(weights, dtype=float)
    if len(w) == 0 or np.any(w <= 0.0):
        raise IrrigationError("Weights must be a nonempty list of positive masses")
    phi = math.fsum(w)
    rate = 0.0 if len(w) == 1 else math.fsum(np.sqrt(w)) - math.sqrt(phi)
    if rate > epsilon * math.sqrt(phi) * (1.0 + 1e-12):
        raise IrrigationError(
            f"Perimeter rate {rate:.6g} exceeds ε Φ^(1/2) = {epsilon * math.sqrt(phi):.6g}")
    delta = (phi - float(w.max())) / phi
    if 0.0 < epsilon <= CONCENTRATION_CUTOFF:
        threshold = concentration_threshold(epsilon)
        if delta > threshold * (1.0 + 1e-9):
            raise RuntimeError(
                f"Concentration bound violated: δ = {delta:.6g} > δ(ε) = {threshold:.6g}")
    return delta


def first_moment_diagnostic(flow: PolygonalFlow, t: float) -> float:
    """
    Φ^{-1/4} Σ w_i |x_i| over μ_t divided by I over the full span.

    Meant for recentred flows rooted at the origin; 0/0 is reported as 0.
    """
    m = slice_flow(flow, t)
    numerator = m.mass ** -0.25 * math.fsum(m.weights * np.linalg.norm(m.positions, axis=1))
    energy = energy_breakdown(flow).I
    if energy == 0.0:
        if numerator == 0.0:
            return 0.0
        raise FlowError("Zero internal energy with a nonzero first moment")
    return numerator / energy
