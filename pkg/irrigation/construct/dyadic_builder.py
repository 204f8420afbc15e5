"""Dyadic branching interpolation between measures and the square-to-Dirac flow."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import ConstructionError, TransportError
from ..measure_core import AtomicMeasure, PolygonalFlow
from ..transport import wasserstein2

logger = logging.getLogger(__name__)

MAX_LEVELS = 12
MASS_TOL = 1e-10
TIME_SPLITS = ("geometric", "uniform")


@dataclass(frozen=True)
class ConstructionConfig:
    """
    Parameters of the dyadic construction.

    Attributes:
        levels: Finest dyadic level L; cells have side R / 2^L
        time_split: "geometric" or "uniform" split of the collapse window
        geometric_ratio: q in (0, 1); level k merges over a duration ∝ q^{k - k_c}
        coarse_level: Level of the transported representatives (default from R and T)
    """

    levels: int = 4
    time_split: str = "geometric"
    geometric_ratio: float = 2.0 ** -1.5
    coarse_level: Optional[int] = None

    def __post_init__(self):
        if not (1 <= self.levels <= MAX_LEVELS):
            raise ConstructionError(f"levels must lie in [1, {MAX_LEVELS}], got {self.levels}")
        if self.time_split not in TIME_SPLITS:
            raise ConstructionError(f"Unknown time split {self.time_split!r}")
        if not (0.0 < self.geometric_ratio < 1.0):
            raise ConstructionError(f"geometric_ratio must lie in (0, 1), got {self.geometric_ratio}")
        if self.coarse_level is not None and not (0 <= self.coarse_level <= self.levels):
            raise ConstructionError(f"coarse_level must lie in [0, {self.levels}]")

    @classmethod
    def from_dict(cls, config: Optional[Dict] = None) -> "ConstructionConfig":
        config = config or {}
        coarse = config.get("coarse_level")
        return cls(levels=int(config.get("levels", 4)),
                   time_split=config.get("time_split", "geometric"),
                   geometric_ratio=float(config.get("geometric_ratio", 2.0 ** -1.5)),
                   coarse_level=None if coarse is None else int(coarse))


def coarse_level(R: float, T: float, levels: int) -> int:
    """k_c = clamp(round(log2(R / √T)), 0, levels)."""
    return int(min(max(round(math.log2(R / math.sqrt(T))), 0), levels))


def merge_durations(levels: int, k_c: int, window: float, cfg: ConstructionConfig) -> List[float]:
    """Durations of the merge steps at levels L, L-1, ..., k_c summing to `window`."""
    ks = np.arange(levels, k_c - 1, -1)
    if cfg.time_split == "uniform":
        raw = np.ones(len(ks))
    else:
        raw = cfg.geometric_ratio ** (ks - k_c).astype(float)
    return list(window * raw / raw.sum())


class _Collapse:
    """Node and edge records of one collapse tree, in collapse time."""

    def __init__(self, next_id: int):
        self.next_id = next_id
        self.nodes: List[Tuple[int, Tuple[float, float], float]] = []
        self.edges: List[Tuple[int, int, float]] = []

    def add_node(self, x, t: float) -> int:
        node_id = self.next_id
        self.next_id += 1
        self.nodes.append((node_id, (float(x[0]), float(x[1])), float(t)))
        return node_id


def _cell_keys(x: np.ndarray, R: float, k: int) -> np.ndarray:
    n = 2 ** k
    h = R / n
    idx = np.clip(np.floor((x + R / 2.0) / h).astype(np.int64), 0, n - 1)
    return idx[:, 0] * n + idx[:, 1]


def _collapse(m: AtomicMeasure, R: float, levels: int, k_c: int,
              durations: List[float], window: float, next_id: int):
    """Merge atoms cell by cell from level L down to k_c over [0, window]."""
    tree = _Collapse(next_id)
    ids = np.array([tree.add_node(x, 0.0) for x in m.positions], dtype=np.int64)
    x = np.array(m.positions, dtype=float)
    w = np.array(m.weights, dtype=float)
    times = np.zeros(len(w))
    t = 0.0
    steps = list(range(levels, k_c - 1, -1))
    for step, (k, dur) in enumerate(zip(steps, durations)):
        t_end = window if step == len(steps) - 1 else t + dur
        keys = _cell_keys(x, R, k)
        order = np.argsort(keys, kind="stable")
        bounds = np.flatnonzero(np.diff(keys[order])) + 1
        new_ids, new_x, new_w, new_t = [], [], [], []
        for members in np.split(order, bounds):
            if len(members) == 1:
                i = members[0]
                new_ids.append(ids[i])
                new_x.append(x[i])
                new_w.append(w[i])
                new_t.append(times[i])
                continue
            centre = (w[members] @ x[members]) / w[members].sum()
            node = tree.add_node(centre, t_end)
            for i in members:
                tree.edges.append((int(ids[i]), node, float(w[i])))
            new_ids.append(node)
            new_x.append(centre)
            new_w.append(math.fsum(w[members]))
            new_t.append(t_end)
        ids, x, w, times = (np.array(new_ids), np.array(new_x),
                            np.array(new_w), np.array(new_t))
        t = t_end
    # every representative gets a node at the end of the window
    frontier = []
    for node, xi, ti, wi in zip(ids, x, times, w):
        if ti < window:
            head = tree.add_node(xi, window)
            tree.edges.append((int(node), head, float(wi)))
            node = head
        frontier.append(int(node))
    return tree, frontier, x, w


class DyadicBuilder:
    """
    Builds branching competitors through a dyadic cell hierarchy.

    The source collapses to level-k_c cell representatives on [0, T/3], the
    representatives move along the optimal quadratic plan on [T/3, 2T/3], and
    the mirror image of the target's collapse expands them on [2T/3, T].
    """

    def __init__(self, config: Dict = None):
        """
        Initialize the builder.

        Args:
            config: The `construct` configuration section
        """
        self.config = config or {}
        self.cfg = ConstructionConfig.from_dict(self.config)

    def _check_inputs(self, mu_minus: AtomicMeasure, mu_plus: AtomicMeasure,
                      T: float, R: float) -> None:
        if T <= 0.0 or R <= 0.0:
            raise ConstructionError(f"T and R must be positive, got T={T}, R={R}")
        if len(mu_minus) == 0 or len(mu_plus) == 0:
            raise ConstructionError("Construction needs nonempty measures")
        if abs(mu_minus.mass - mu_plus.mass) > MASS_TOL:
            raise ConstructionError(
                f"Mass mismatch: {mu_minus.mass!r} vs {mu_plus.mass!r}")
        half = 0.5 * R * (1.0 + 1e-12)
        for name, m in (("mu_minus", mu_minus), ("mu_plus", mu_plus)):
            if np.any(np.abs(m.positions) > half):
                raise ConstructionError(f"{name} has atoms outside the square of side {R}")

    def interpolate(self, mu_minus: AtomicMeasure, mu_plus: AtomicMeasure,
                    T: float = 1.0, R: float = 1.0, eps: float = 0.0) -> PolygonalFlow:
        """
        Branching flow from mu_minus at t = 0 to mu_plus at t = T.

        Args:
            mu_minus: Source measure inside the centred R-square
            mu_plus: Target measure of equal mass inside the same square
            T: Horizon
            R: Square side
            eps: Leaf regularization radius stored on the flow

        Returns:
            A valid flow with slice(0) = mu_minus and slice(T) = mu_plus
        """
        self._check_inputs(mu_minus, mu_plus, T, R)
        cfg = self.cfg
        L = cfg.levels
        k_c = coarse_level(R, T, L) if cfg.coarse_level is None else cfg.coarse_level
        window = T / 3.0
        durations = merge_durations(L, k_c, window, cfg)
        logger.debug("Dyadic construction: L=%d, k_c=%d, durations=%s", L, k_c, durations)

        source, src_frontier, src_x, src_w = _collapse(
            mu_minus, R, L, k_c, durations, window, 0)
        target, dst_frontier, dst_x, dst_w = _collapse(
            mu_plus, R, L, k_c, durations, window, source.next_id)

        # representatives may coincide across cells, so skip atom merging
        a = AtomicMeasure(src_x, src_w, np.zeros(len(src_w)))
        b = AtomicMeasure(dst_x, dst_w, np.zeros(len(dst_w)))
        try:
            _, plan = wasserstein2(a, b)
        except TransportError as e:
            raise ConstructionError(f"Coarse transport failed: {e}") from None

        nodes = list(source.nodes)
        edges = list(source.edges)
        nodes += [(i, x, T - t) for i, x, t in target.nodes]
        edges += [(head, tail, flux) for tail, head, flux in target.edges]
        edges += [(src_frontier[i], dst_frontier[j], mass) for i, j, mass in plan.entries()]
        return PolygonalFlow.from_records(nodes, edges, eps=eps, rooted=len(mu_plus) == 1)

    def square_to_dirac(self, levels: Optional[int] = None) -> PolygonalFlow:
        """
        Irrigate the uniform unit square from the Dirac mass at the origin.

        The 2^L × 2^L grid of disks of radius 1/2^{L+1} collapses onto δ_0
        over T = 1 with R = 1; the leaf radius is stored as ε.
        """
        levels = self.cfg.levels if levels is None else int(levels)
        if not (1 <= levels <= MAX_LEVELS):
            raise ConstructionError(f"levels must lie in [1, {MAX_LEVELS}], got {levels}")
        builder = self
        if levels != self.cfg.levels:
            builder = DyadicBuilder({**self.config, "levels": levels})
        n = 2 ** levels
        eps = 1.0 / 2 ** (levels + 1)
        grid = uniform_grid_measure(n, side=1.0, radius=eps)
        return builder.interpolate(grid, AtomicMeasure.dirac(), T=1.0, R=1.0, eps=eps)


def uniform_grid_measure(n: int, side: float = 1.0, radius: Optional[float] = None,
                         mass: float = 1.0, center=(0.0, 0.0)) -> AtomicMeasure:
    """n × n equal atoms at the cell centres of a centred square; radius defaults to half a cell."""
    from ..regularity import uniform_square_grid

    return uniform_square_grid(n, side=side, mass=mass, radius=radius, center=center)


def dyadic_interpolation(mu_minus: AtomicMeasure, mu_plus: AtomicMeasure, T: float = 1.0,
                         R: float = 1.0, cfg: Optional[ConstructionConfig] = None,
                         eps: float = 0.0) -> PolygonalFlow:
    """Functional form of `DyadicBuilder.interpolate`."""
    cfg = cfg or ConstructionConfig()
    builder = DyadicBuilder({"levels": cfg.levels, "time_split": cfg.time_split,
                             "geometric_ratio": cfg.geometric_ratio,
                             "coarse_level": cfg.coarse_level})
    return builder.interpolate(mu_minus, mu_plus, T, R, eps)


def square_to_dirac(levels: int, cfg: Optional[ConstructionConfig] = None) -> PolygonalFlow:
    """Functional form of `DyadicBuilder.square_to_dirac`."""
    base = cfg or ConstructionConfig(levels=levels)
    return DyadicBuilder({"levels": levels, "time_split": base.time_split,
                          "geometric_ratio": base.geometric_ratio}).square_to_dirac(levels)


def bound_ratio(flow: PolygonalFlow, mu_minus: AtomicMeasure, mu_plus: AtomicMeasure) -> float:
    """I / (W²/T + (Φ + Φ^{1/2}) max(T^{1/3}, T)) for an emitted flow."""
    from ..energy import energy_breakdown

    T = flow.horizon - flow.t_start
    cost, _ = wasserstein2(mu_minus, mu_plus)
    phi = mu_minus.mass
    denominator = cost / T + (phi + math.sqrt(phi)) * max(T ** (1.0 / 3.0), T)
    return energy_breakdown(flow).I / denominator
