"""
e(R, T) sweep: best 𝓔 of rooted flows irrigating L leaves inside the R-square.

Every cell starts the topology search from three fixed seeds (dyadic
construction, random leaves under a hierarchical clustering tree, all mass
collapsed at the origin) plus warm starts from the already solved smaller
cells, extended to the new horizon by a static root segment.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.cluster.hierarchy import linkage
from tqdm import tqdm

from ..caching import CacheManager, FlowHashProvider
from ..config import DEFAULT_CONFIG, max_workers
from ..construct import DyadicBuilder, uniform_grid_measure
from ..errors import OptimizerError
from ..measure_core import AtomicMeasure, PolygonalFlow
from ..measure_core.serialization import flow_from_dict, flow_to_dict
from ..potential import RegularizedKernelSpec
from .config import Constraint, Constraints, OptimizerConfig
from .landscape import AprioriDiagnostics, apriori_diagnostics
from .position_optimizer import objective_value
from .topology_search import TopologySearch

logger = logging.getLogger(__name__)

SEEDS = ("construct", "random", "collapsed")
SWEEP_CSV_HEADER = ("R", "T", "e", "seed_of_best")
MONOTONE_TOL = 1e-3
STABILIZATION_RTOL = 0.05


@dataclass(frozen=True)
class SweepRow:
    R: float
    T: float
    e: float
    seed_of_best: str
    diagnostics: Optional[AprioriDiagnostics] = None

    def as_row(self) -> tuple:
        return (self.R, self.T, self.e, self.seed_of_best)


@dataclass
class SweepTable:
    """Rows of a sweep with the monotonicity and stabilization checks."""

    rows: List[SweepRow] = field(default_factory=list)
    flows: Dict[Tuple[float, float], PolygonalFlow] = field(default_factory=dict, repr=False)

    def value(self, R: float, T: float) -> Optional[float]:
        for row in self.rows:
            if row.R == R and row.T == T:
                return row.e
        return None

    def is_monotone(self, tol: float = MONOTONE_TOL) -> bool:
        """e is nonincreasing in R at fixed T and in T at fixed R."""
        Rs = sorted({r.R for r in self.rows})
        Ts = sorted({r.T for r in self.rows})
        for R in Rs:
            values = [self.value(R, T) for T in Ts]
            if any(b > a + tol for a, b in zip(values, values[1:])):
                return False
        for T in Ts:
            values = [self.value(R, T) for R in Rs]
            if any(b > a + tol for a, b in zip(values, values[1:])):
                return False
        return True

    def stabilization_gap(self) -> Optional[float]:
        """|e(R_max, T_max) - e(R_max/2, T_max/2)| / e(R_max, T_max), None without the half cell."""
        R = max(r.R for r in self.rows)
        T = max(r.T for r in self.rows)
        top, half = self.value(R, T), self.value(R / 2.0, T / 2.0)
        if half is None:
            return None
        return abs(top - half) / abs(top)

    def is_stable(self, rtol: float = STABILIZATION_RTOL) -> bool:
        gap = self.stabilization_gap()
        return gap is not None and gap <= rtol

    def csv_rows(self) -> List[tuple]:
        return [row.as_row() for row in self.rows]


def _linkage_flow(positions: np.ndarray, weights: np.ndarray, T: float, eps: float) -> PolygonalFlow:
    """Leaves merge along an average-linkage tree at evenly spaced times, root at the origin."""
    L = len(positions)
    nodes = [(k, positions[k], 0.0) for k in range(L)]
    edges = []
    top = 0
    if L > 1:
        cx, cw = list(positions), list(weights)
        for k, (a, b, _, _) in enumerate(linkage(positions, method="average")):
            a, b = int(a), int(b)
            w = cw[a] + cw[b]
            x = (cw[a] * cx[a] + cw[b] * cx[b]) / w
            top = L + k
            nodes.append((top, x, T * (k + 1) / L))
            edges += [(a, top, cw[a]), (b, top, cw[b])]
            cx.append(x)
            cw.append(w)
    root = len(nodes)
    nodes.append((root, (0.0, 0.0), T))
    edges.append((top, root, float(np.sum(weights))))
    return PolygonalFlow.from_records(nodes, edges, eps=eps, rooted=True)


def construct_seed(R: float, T: float, leaves: int, eps: float,
                   construct_config: Dict = None) -> Optional[PolygonalFlow]:
    """Dyadic collapse of an n × n grid of side R/2 onto δ_0; None unless leaves is a square."""
    n = math.isqrt(leaves)
    if n * n != leaves:
        return None
    levels = max(1, math.ceil(math.log2(n))) if n > 1 else 1
    builder = DyadicBuilder({**(construct_config or {}), "levels": levels, "coarse_level": None})
    grid = uniform_grid_measure(n, side=R / 2.0, radius=0.0)
    return builder.interpolate(grid, AtomicMeasure.dirac(), T=T, R=R, eps=eps)


def random_seed(R: float, T: float, leaves: int, eps: float,
                rng: np.random.Generator) -> PolygonalFlow:
    positions = rng.uniform(-R / 2.0, R / 2.0, size=(leaves, 2))
    return _linkage_flow(positions, np.full(leaves, 1.0 / leaves), T, eps)


def collapsed_seed(T: float, leaves: int, eps: float) -> PolygonalFlow:
    """All leaves on a ring of radius ε/10 about the origin, joined at T/2."""
    angles = 2.0 * math.pi * np.arange(leaves) / leaves
    ring = 0.1 * eps * np.column_stack([np.cos(angles), np.sin(angles)])
    nodes = [(k, ring[k], 0.0) for k in range(leaves)]
    nodes += [(leaves, (0.0, 0.0), 0.5 * T), (leaves + 1, (0.0, 0.0), T)]
    edges = [(k, leaves, 1.0 / leaves) for k in range(leaves)]
    edges.append((leaves, leaves + 1, 1.0))
    return PolygonalFlow.from_records(nodes, edges, eps=eps, rooted=True)


def extend_horizon(flow: PolygonalFlow, T: float) -> PolygonalFlow:
    """Append a static root segment up to time T (energy neutral)."""
    if T <= flow.horizon:
        return flow
    root = flow.root
    n = flow.n_nodes
    return PolygonalFlow.from_arrays(
        np.append(flow.node_ids, flow.next_node_id()),
        np.vstack([flow.positions, flow.positions[root]]),
        np.append(flow.times, T),
        np.vstack([flow.edges, [[root, n]]]),
        np.append(flow.fluxes, flow.mass),
        flow.eps, True)


class RTSweep:
    """
    Solver for the e(R, T) table.

    Args:
        config: Full run configuration (sections optimizer, potential,
            construct, sweep, cache)
        cache: Optional cache of solved cells
    """

    def __init__(self, config: Dict = None, cache: Optional[CacheManager] = None):
        self.config = config or DEFAULT_CONFIG
        self.cfg = OptimizerConfig.from_dict(self.config.get("optimizer"))
        self.spec = RegularizedKernelSpec.from_dict(self.config.get("potential"))
        self.construct_config = self.config.get("construct", {})
        sweep = self.config.get("sweep", {})
        self.eps = float(sweep.get("epsilon", 0.05))
        self.cfg.check_regularization(self.eps)
        self.cache = cache
        self.hasher = FlowHashProvider()

    def _cell_key(self, R: float, T: float, leaves: int) -> str:
        return self.hasher.settings_hash({
            "R": R, "T": T, "leaves": leaves, "epsilon": self.eps,
            "optimizer": self.config.get("optimizer", {}),
            "potential": self.config.get("potential", {}),
            "construct": self.construct_config,
        })

    def seeds(self, R: float, T: float, leaves: int) -> List[Tuple[str, PolygonalFlow]]:
        rng = np.random.default_rng([self.cfg.seed, int(round(R * 1e6)), int(round(T * 1e6))])
        construct = construct_seed(R, T, leaves, self.eps, self.construct_config)
        if construct is None:
            construct = random_seed(R, T, leaves, self.eps, rng)
        flows = (construct, random_seed(R, T, leaves, self.eps, rng),
                 collapsed_seed(T, leaves, self.eps))
        return list(zip(SEEDS, flows))

    def _solve(self, flow: PolygonalFlow, R: float) -> Tuple[float, PolygonalFlow]:
        constraints = Constraints.of(Constraint.MASS_SIMPLEX, Constraint.FIX_ROOT, Constraint.BOX,
                                     box_half_width=R / 2.0)
        search = TopologySearch(self.cfg, constraints, self.spec)
        best, _ = search.run(flow)
        return objective_value(best, self.spec), best

    def solve_cell(self, R: float, T: float, leaves: int,
                   warm: Sequence[Tuple[str, PolygonalFlow]] = ()) -> Tuple[SweepRow, PolygonalFlow]:
        """Best flow over the seeds and warm starts of one (R, T) cell."""
        key = self._cell_key(R, T, leaves)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                flow = flow_from_dict(hit["flow"])
                logger.debug("Cache hit for R=%g, T=%g", R, T)
                return SweepRow(R, T, hit["e"], hit["seed"], apriori_diagnostics(flow)), flow

        starts = self.seeds(R, T, leaves)
        starts += [(name, extend_horizon(f, T)) for name, f in warm]
        with ThreadPoolExecutor(max_workers=min(max_workers(), len(starts))) as pool:
            results = list(pool.map(lambda item: self._solve(item[1], R), starts))
        # first seed wins ties
        k = min(range(len(results)), key=lambda i: (results[i][0], i))
        value, flow = results[k]
        name = starts[k][0]
        logger.info("e(%g, %g) = %.10g from seed %s", R, T, value, name)
        if self.cache is not None:
            self.cache.set(key, {"e": value, "seed": name, "flow": flow_to_dict(flow)})
        return SweepRow(R, T, value, name, apriori_diagnostics(flow)), flow

    def run(self, R_list: Sequence[float], T_list: Sequence[float], leaves: int,
            progress: bool = False) -> SweepTable:
        R_list = [float(r) for r in R_list]
        T_list = [float(t) for t in T_list]
        for name, values in (("R", R_list), ("T", T_list)):
            if not values or values != sorted(values):
                raise OptimizerError(f"{name} list must be nonempty and ascending")
            if values[0] < 1.0:
                raise OptimizerError(f"{name} values must be >= 1, got {values[0]}")
        if leaves < 1:
            raise OptimizerError(f"Sweep needs at least one leaf, got {leaves}")
        table = SweepTable()
        cells = [(R, T) for R in R_list for T in T_list]
        for R, T in tqdm(cells, desc="e(R,T)", disable=not progress):
            warm = []
            earlier_T = [t for t in T_list if t < T]
            if earlier_T:
                warm.append((f"warm:R={R:g},T={earlier_T[-1]:g}", table.flows[(R, earlier_T[-1])]))
            earlier_R = [r for r in R_list if r < R]
            if earlier_R:
                warm.append((f"warm:R={earlier_R[-1]:g},T={T:g}", table.flows[(earlier_R[-1], T)]))
            row, flow = self.solve_cell(R, T, leaves, warm)
            table.rows.append(row)
            table.flows[(R, T)] = flow
        return table


def rt_sweep(R_list: Sequence[float], T_list: Sequence[float], leaves: int = 16,
             config: Dict = None, cache: Optional[CacheManager] = None,
             progress: bool = False) -> SweepTable:
    """
    Tabulate e(R, T) over a grid of square sides and horizons.

    Args:
        R_list: Ascending square sides, each >= 1
        T_list: Ascending horizons, each >= 1
        leaves: Leaves per instance, each of mass 1/leaves
        config: Full run configuration
        cache: Optional cell cache
        progress: Show a tqdm progress bar

    Returns:
        SweepTable with one row per (R, T)
    """
    return RTSweep(config, cache).run(R_list, T_list, leaves, progress)
