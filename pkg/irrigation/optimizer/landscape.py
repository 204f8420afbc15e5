"""Landscape function z, the first-variation residual z + 2u - K and a-priori diagnostics."""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import FlowError
from ..measure_core import PolygonalFlow, slice_flow
from ..potential import RegularizedKernelSpec, leaf_potentials
from .objective import FlowObjective, path_incidence
from .config import Constraints

# converged minimizers keep the mass-weighted variation of z + 2u below this
FIRST_VARIATION_CV = 0.02


@dataclass(frozen=True)
class ResidualStats:
    """Mass-weighted mean and max of |z + 2u - K| and the variation coefficient of z + 2u."""

    mean: float
    max: float
    cv: float

    def fires(self, threshold: float = FIRST_VARIATION_CV) -> bool:
        return self.cv > threshold

    def to_dict(self) -> Dict[str, float]:
        return {"mean": self.mean, "max": self.max, "cv": self.cv}


@dataclass(frozen=True)
class LandscapeValues:
    """
    Per-leaf landscape values of a rooted flow.

    Attributes:
        leaf_ids: Leaf node ids
        z: Landscape value of each leaf
        u: Disk-averaged potential of the boundary measure at each leaf
        weights: Leaf masses
        constant_K: Mass-weighted mean of z + 2u
        residual_stats: Statistics of z + 2u - K
    """

    leaf_ids: Tuple[int, ...]
    z: np.ndarray
    u: np.ndarray
    weights: np.ndarray
    constant_K: float
    residual_stats: ResidualStats

    def rows(self) -> List[Tuple[int, float, float, float]]:
        return [(int(i), float(z), float(u), float(w))
                for i, z, u, w in zip(self.leaf_ids, self.z, self.u, self.weights)]


def _leaf_z(flow: PolygonalFlow) -> np.ndarray:
    d = flow.durations
    disp = flow.displacements
    per_edge = 0.5 * d / np.sqrt(flow.fluxes) + np.einsum("ij,ij->i", disp, disp) / d
    return path_incidence(flow).T @ per_edge


def landscape(flow: PolygonalFlow, spec: Optional[RegularizedKernelSpec] = None) -> LandscapeValues:
    """
    z along every leaf-to-root path and the constant K.

    z = Σ over path edges of ½ φ^{-1/2} duration + |displacement|² / duration,
    and K = [½ P + ½ Φ^{1/2} (T - t_0) + E + 2 ‖μ_0‖²] / Φ, which is the
    mass-weighted mean of z + 2u (Φ = 1 gives ½ P + E + T/2 + 2 ‖μ_0‖²).
    Without a leaf radius u vanishes.
    """
    if not flow.rooted or len(flow.roots) != 1:
        raise FlowError("Landscape needs a rooted flow")
    if flow.n_edges == 0:
        raise FlowError("Landscape of a flow without edges")
    z = _leaf_z(flow)
    objective = FlowObjective(flow, Constraints(), spec)
    weights = flow.leaf_weights()
    ev = objective.evaluate(objective.pack())
    phi = math.fsum(weights)
    if flow.eps > 0.0:
        m = objective.boundary_measure(flow.positions, weights)
        u = leaf_potentials(m, objective.spec)
    else:
        u = np.zeros(len(weights))
    K = (0.5 * ev.P + 0.5 * math.sqrt(phi) * objective.span + ev.E + 2.0 * ev.boundary) / phi
    values = z + 2.0 * u
    residual = values - K
    mean = math.fsum(weights * values) / phi
    var = math.fsum(weights * (values - mean) ** 2) / phi
    stats = ResidualStats(mean=math.fsum(weights * np.abs(residual)) / phi,
                          max=float(np.max(np.abs(residual))),
                          cv=math.sqrt(var) / abs(mean) if mean != 0.0 else 0.0)
    leaf_ids = tuple(int(flow.node_ids[v]) for v in flow.leaves)
    return LandscapeValues(leaf_ids, z, u, weights, K, stats)


def first_variation_residual(flow: PolygonalFlow,
                             spec: Optional[RegularizedKernelSpec] = None) -> ResidualStats:
    """Statistics of z + 2u - K over the leaves."""
    return landscape(flow, spec).residual_stats


@dataclass(frozen=True)
class AprioriDiagnostics:
    """
    Attributes:
        last_merge_time: Latest time at which the slice has more than one atom
        scaled_spread: max leaf distance from the initial barycenter over (T - t_0)^{1/2}
        max_z_excess: max over leaves of z - (T - t_0)/2
    """

    last_merge_time: float
    scaled_spread: float
    max_z_excess: float

    def to_dict(self) -> Dict[str, float]:
        return {"last_merge_time": self.last_merge_time,
                "scaled_spread": self.scaled_spread,
                "max_z_excess": self.max_z_excess}


def apriori_diagnostics(flow: PolygonalFlow) -> AprioriDiagnostics:
    merges = np.flatnonzero(flow.in_degree >= 2)
    t_merge = float(flow.times[merges].max()) if len(merges) else flow.t_start
    span = flow.horizon - flow.t_start
    mu0 = slice_flow(flow, flow.t_start)
    centre = mu0.barycenter()
    leaf_x = flow.positions[flow.leaves]
    spread = float(np.max(np.linalg.norm(leaf_x - centre, axis=1))) / math.sqrt(span)
    z = _leaf_z(flow)
    return AprioriDiagnostics(t_merge, spread, float(np.max(z)) - 0.5 * span)
