"""Shrink competitor: contract a backward subsystem about its barycenter path."""

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..energy import energy_breakdown, total_energy
from ..errors import FlowError
from ..measure_core import (PolygonalFlow, barycenter_path, barycenter_shift, complement_flow,
                            extract_subsystem, shrink)
from ..potential import RegularizedKernelSpec

logger = logging.getLogger(__name__)

IMPROVEMENT_RTOL = 1e-6


@dataclass(frozen=True)
class ShrinkReport:
    """
    Outcome of one shrink competitor.

    gap = 𝓔(competitor) - 𝓔(flow), split into ΔP, ΔE and Δboundary.
    The kinetic change equals -(1 - λ²) E_centered of the subsystem.
    """

    node_id: int
    lam: float
    energy: float
    gap: float
    delta_P: float
    delta_E: float
    delta_boundary: float
    E_centered: float

    @property
    def expected_delta_E(self) -> float:
        return -(1.0 - self.lam ** 2) * self.E_centered

    @property
    def improvable(self) -> bool:
        """The competitor beats the flow beyond tolerance."""
        return self.gap < -IMPROVEMENT_RTOL * abs(self.energy)

    def to_dict(self) -> Dict[str, float]:
        return {"node_id": self.node_id, "lambda": self.lam, "energy": self.energy,
                "gap": self.gap, "delta_P": self.delta_P, "delta_E": self.delta_E,
                "delta_boundary": self.delta_boundary, "E_centered": self.E_centered,
                "improvable": self.improvable}


def _renumber(sub: PolygonalFlow, keep_id: int, start: int) -> np.ndarray:
    ids = np.array(sub.node_ids)
    fresh = ids != keep_id
    ids[fresh] = start + np.arange(int(fresh.sum()))
    return ids


def shrink_competitor(flow: PolygonalFlow, node_id: int, lam: float = 0.5) -> PolygonalFlow:
    """
    μ - μ' + μ̃' with μ' the backward subsystem of the node and μ̃' its shrink.

    The node itself stays in place; every other subsystem node is copied
    under a fresh id so that partially shared nodes keep their position in
    the complement.
    """
    if not (0.0 < lam <= 1.0):
        raise FlowError(f"Shrink factor must lie in (0, 1], got {lam}")
    sub = extract_subsystem(flow, node_id, "backward")
    if sub.n_edges == 0:
        raise FlowError(f"Node {node_id} has an empty backward subsystem")
    shrunk = shrink(sub, lam, barycenter_path(sub))
    rest = complement_flow(flow, sub)

    ids = _renumber(shrunk, node_id, max(flow.next_node_id(), shrunk.next_node_id()))
    if rest.n_edges == 0:
        return PolygonalFlow.from_arrays(
            shrunk.node_ids, shrunk.positions, shrunk.times, shrunk.edges, shrunk.fluxes,
            flow.eps, flow.rooted)
    # the node is shared: its row in `rest` receives the shrunk edges
    offset = rest.n_nodes
    shared = rest.index_of.get(int(node_id))
    extra = ids != node_id if shared is not None else np.ones(shrunk.n_nodes, dtype=bool)
    rows = np.full(shrunk.n_nodes, -1, dtype=np.int64)
    rows[extra] = offset + np.arange(int(extra.sum()))
    if shared is not None:
        rows[~extra] = shared
    return PolygonalFlow.from_arrays(
        np.concatenate([rest.node_ids, ids[extra]]),
        np.vstack([rest.positions, shrunk.positions[extra]]),
        np.concatenate([rest.times, shrunk.times[extra]]),
        np.vstack([rest.edges, rows[shrunk.edges]]),
        np.concatenate([rest.fluxes, shrunk.fluxes]),
        flow.eps, flow.rooted)


def shrink_competitor_test(flow: PolygonalFlow, node_id: int, lam: float = 0.5,
                           spec: Optional[RegularizedKernelSpec] = None) -> ShrinkReport:
    """
    Minimality gap of the shrink competitor at a node.

    Args:
        flow: Converged minimizer candidate
        node_id: Node defining the backward subsystem
        lam: Shrink factor in (0, 1]
        spec: Kernel of the boundary norm

    Returns:
        ShrinkReport; λ = 1 gives a gap of exactly 0
    """
    sub = extract_subsystem(flow, node_id, "backward")
    if sub.n_edges == 0:
        raise FlowError(f"Node {node_id} has an empty backward subsystem")
    base = total_energy(flow, spec)
    centred, _ = barycenter_shift(sub)
    e_centred = energy_breakdown(centred).E
    if lam == 1.0:
        return ShrinkReport(int(node_id), 1.0, base.total, 0.0, 0.0, 0.0, 0.0, e_centred)

    competitor = shrink_competitor(flow, node_id, lam)
    other = total_energy(competitor, spec)
    # kinetic energy is linear in the fluxes, so only subsystem edges change
    delta_E = energy_breakdown(shrink(sub, lam)).E - energy_breakdown(sub).E
    delta_boundary = 0.0
    if base.boundary_norm_sq is not None:
        delta_boundary = other.boundary_norm_sq - base.boundary_norm_sq
    report = ShrinkReport(int(node_id), float(lam), base.total, other.total - base.total,
                          other.P - base.P, delta_E, delta_boundary, e_centred)
    if report.improvable:
        logger.info("Shrink competitor at node %d improves the flow by %.3g",
                    node_id, -report.gap)
    return report


def shrink_sweep(flow: PolygonalFlow, lam: float = 0.5,
                 spec: Optional[RegularizedKernelSpec] = None) -> Dict[int, ShrinkReport]:
    """Shrink competitor at every node with incoming edges."""
    reports = {}
    for row in np.flatnonzero(flow.in_degree > 0):
        node_id = int(flow.node_ids[row])
        reports[node_id] = shrink_competitor_test(flow, node_id, lam, spec)
    return reports
