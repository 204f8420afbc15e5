"""The objective 𝓔 = I + ‖μ_0‖² of a fixed-topology rooted flow and its gradient."""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix

from ..errors import OptimizerError
from ..measure_core import AtomicMeasure, PolygonalFlow
from ..potential import RegularizedKernelSpec, hminus_half_norm_sq, norm_gradient
from .config import Constraint, Constraints

# minimum edge duration relative to the horizon
MIN_DURATION_RTOL = 1e-6
# minimum leaf weight relative to Φ / (number of leaves)
MIN_WEIGHT_RTOL = 1e-9


@dataclass(frozen=True)
class Evaluation:
    total: float
    P: float
    E: float
    boundary: float
    gradient: Optional[np.ndarray] = None


def project_shifted_simplex(v: np.ndarray, total: float, lower: float) -> np.ndarray:
    """Euclidean projection onto {w : Σ w = total, w >= lower}."""
    n = len(v)
    budget = total - lower * n
    if budget < 0.0:
        raise OptimizerError("Simplex lower bound exceeds the total mass")
    u = v - lower
    mu = np.sort(u)[::-1]
    cs = np.cumsum(mu) - budget
    idx = np.arange(1, n + 1)
    rho = np.flatnonzero(mu - cs / idx > 0.0)[-1]
    theta = cs[rho] / (rho + 1)
    return np.maximum(u - theta, 0.0) + lower


def path_incidence(flow: PolygonalFlow) -> csr_matrix:
    """(edges × leaves) 0/1 matrix marking the edges on each leaf's path to the root."""
    if not flow.is_in_forest:
        raise OptimizerError("Leaf paths need a flow whose nodes have at most one outgoing edge")
    rows, cols = [], []
    for j, leaf in enumerate(flow.leaves):
        v = leaf
        while flow.out_edges[v]:
            e = flow.out_edges[v][0]
            rows.append(e)
            cols.append(j)
            v = flow.edges[e, 1]
    return csr_matrix((np.ones(len(rows)), (rows, cols)),
                      shape=(flow.n_edges, len(flow.leaves)))


class FlowObjective:
    """
    Objective and analytic gradient over the free variables of a rooted flow.

    Free variables are interior node positions and times, leaf positions
    (unless fix-boundary), the root position (unless fix-root) and leaf
    weights (with mass-simplex). Edge fluxes follow the leaf weights along
    the unique leaf-to-root paths.
    """

    def __init__(self, flow: PolygonalFlow, constraints: Optional[Constraints] = None,
                 spec: Optional[RegularizedKernelSpec] = None):
        """
        Initialize the objective.

        Args:
            flow: Valid rooted flow
            constraints: Active constraint set
            spec: Kernel of the boundary norm
        """
        self.flow = flow
        self.constraints = constraints or Constraints()
        self.spec = spec or RegularizedKernelSpec()
        self.leaves = flow.leaves
        self.root = flow.root
        self.t0 = flow.t_start
        self.T = flow.horizon
        self.span = self.T - self.t0
        self.with_boundary = flow.eps > 0.0

        n = flow.n_nodes
        self.pos_free = np.zeros(n, dtype=bool)
        self.pos_free[flow.interior] = True
        if Constraint.FIX_BOUNDARY not in self.constraints:
            self.pos_free[self.leaves] = True
        if Constraint.FIX_ROOT not in self.constraints:
            self.pos_free[self.root] = True
        self.time_free = np.zeros(n, dtype=bool)
        self.time_free[flow.interior] = True
        self.weights_free = Constraint.MASS_SIMPLEX in self.constraints
        self.incidence = path_incidence(flow) if flow.is_in_forest else None
        if self.weights_free and self.incidence is None:
            raise OptimizerError("Free leaf weights need an in-forest flow")

        self.phi = flow.mass
        self.d_min = MIN_DURATION_RTOL * self.span
        self.w_min = MIN_WEIGHT_RTOL * self.phi / max(len(self.leaves), 1)
        # children before parents
        self.order = flow.topological_order
        self._children = [flow.edges[es, 0] for es in
                          (np.array(e, dtype=np.int64) for e in flow.in_edges)]
        self._parents = [flow.edges[es, 1] for es in
                         (np.array(e, dtype=np.int64) for e in flow.out_edges)]

    # --- packing -----------------------------------------------------------

    @property
    def n_free(self) -> int:
        return (2 * int(self.pos_free.sum()) + int(self.time_free.sum())
                + (len(self.leaves) if self.weights_free else 0))

    def pack(self, positions=None, times=None, weights=None) -> np.ndarray:
        positions = self.flow.positions if positions is None else positions
        times = self.flow.times if times is None else times
        parts = [positions[self.pos_free].ravel(), times[self.time_free]]
        if self.weights_free:
            parts.append(self.flow.leaf_weights() if weights is None else weights)
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        positions = np.array(self.flow.positions)
        times = np.array(self.flow.times)
        k = 2 * int(self.pos_free.sum())
        positions[self.pos_free] = x[:k].reshape(-1, 2)
        m = k + int(self.time_free.sum())
        times[self.time_free] = x[k:m]
        weights = np.array(x[m:]) if self.weights_free else self.flow.leaf_weights()
        return positions, times, weights

    def fluxes_for(self, weights: np.ndarray) -> np.ndarray:
        if not self.weights_free:
            return np.array(self.flow.fluxes)
        return self.incidence @ weights

    def to_flow(self, x: np.ndarray) -> PolygonalFlow:
        positions, times, weights = self.unpack(x)
        return self.flow.with_geometry(positions=positions, times=times,
                                       fluxes=self.fluxes_for(weights))

    # --- evaluation --------------------------------------------------------

    def boundary_measure(self, positions: np.ndarray, weights: np.ndarray) -> AtomicMeasure:
        # leaves may coincide, so atoms are not merged
        return AtomicMeasure(positions[self.leaves], np.asarray(weights, dtype=float),
                             np.full(len(self.leaves), self.flow.eps))

    def evaluate(self, x: np.ndarray, with_gradient: bool = False) -> Evaluation:
        """
        𝓔 at x, optionally with its gradient in the packed variables.

        Returns an infinite total when an edge has nonpositive duration.
        """
        positions, times, weights = self.unpack(x)
        fluxes = self.fluxes_for(weights)
        edges = self.flow.edges
        tails, heads = edges[:, 0], edges[:, 1]
        d = times[heads] - times[tails]
        if np.any(d <= 0.0) or np.any(fluxes <= 0.0):
            return Evaluation(math.inf, math.inf, math.inf, math.inf)
        disp = positions[heads] - positions[tails]
        sq = np.einsum("ij,ij->i", disp, disp)
        root_phi = np.sqrt(fluxes)
        phi = math.fsum(weights)
        perimeter = math.fsum(root_phi * d) - math.sqrt(phi) * self.span
        kinetic = math.fsum(fluxes * sq / d)

        boundary, dn_dw, dn_dx = 0.0, None, None
        if self.with_boundary:
            m = self.boundary_measure(positions, weights)
            if with_gradient:
                boundary, dn_dw, dn_dx = norm_gradient(m, self.spec)
            else:
                boundary = hminus_half_norm_sq(m, self.spec)
        total = perimeter + kinetic + boundary
        if not with_gradient:
            return Evaluation(total, perimeter, kinetic, boundary)

        n = self.flow.n_nodes
        gx = np.zeros((n, 2))
        pull = (2.0 * fluxes / d)[:, None] * disp
        np.add.at(gx, heads, pull)
        np.add.at(gx, tails, -pull)
        gt = np.zeros(n)
        dt_edge = root_phi - fluxes * sq / (d * d)
        np.add.at(gt, heads, dt_edge)
        np.add.at(gt, tails, -dt_edge)
        if dn_dx is not None:
            gx[self.leaves] += dn_dx
        parts = [gx[self.pos_free].ravel(), gt[self.time_free]]
        if self.weights_free:
            g_phi = d / (2.0 * root_phi) + sq / d
            gw = self.incidence.T @ g_phi - self.span / (2.0 * math.sqrt(phi))
            if dn_dw is not None:
                gw = gw + dn_dw
            parts.append(gw)
        return Evaluation(total, perimeter, kinetic, boundary, np.concatenate(parts))

    def value(self, x: np.ndarray) -> float:
        return self.evaluate(x).total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x, with_gradient=True).gradient

    def finite_difference_gradient(self, x: np.ndarray, coords: Optional[Sequence[int]] = None,
                                   h: Optional[float] = None) -> np.ndarray:
        """Central differences on the selected coordinates (default all)."""
        coords = range(len(x)) if coords is None else coords
        if h is None:
            scale = max(self.flow.scene_diameter, self.span, 1.0)
            h = 1e-6 * scale
        out = []
        for k in coords:
            step = np.zeros(len(x))
            step[k] = h
            out.append((self.value(x + step) - self.value(x - step)) / (2.0 * h))
        return np.array(out)

    # --- projection --------------------------------------------------------

    def project(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        """
        Project onto the feasible set.

        Returns:
            (projected x, ok); ok is False when the time order cannot be
            restored with the minimum edge duration
        """
        positions, times, weights = self.unpack(x)
        if self.weights_free:
            weights = project_shifted_simplex(weights, self.phi, self.w_min)
        leaves = self.leaves
        if Constraint.ZERO_BARYCENTER in self.constraints:
            w = weights
            shift = (w @ positions[leaves]) / float(w @ w)
            positions[leaves] = positions[leaves] - w[:, None] * shift[None, :]
        if Constraint.BOX in self.constraints:
            h = self.constraints.box_half_width
            free = self.pos_free
            positions[free] = np.clip(positions[free], -h, h)
        times, ok = self._clamp_times(times)
        return self.pack(positions, times, weights), ok

    def _clamp_times(self, times: np.ndarray) -> Tuple[np.ndarray, bool]:
        t = np.array(times)
        for v in self.order:
            if self.time_free[v] and len(self._children[v]):
                t[v] = max(t[v], float(t[self._children[v]].max()) + self.d_min)
        for v in self.order[::-1]:
            if self.time_free[v] and len(self._parents[v]):
                t[v] = min(t[v], float(t[self._parents[v]].min()) - self.d_min)
        edges = self.flow.edges
        d = t[edges[:, 1]] - t[edges[:, 0]]
        return t, bool(np.all(d > 0.0))
