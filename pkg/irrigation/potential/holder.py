"""Hölder quotients of the potential and the norm-ratio checks built on them."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import PotentialError
from ..measure_core import AtomicMeasure
from .kernel import KernelMode, RegularizedKernelSpec
from .riesz_potential import hminus_half_norm_sq, potentials_at

logger = logging.getLogger(__name__)

SHELL_CSV_HEADER = ("shell", "distance", "max_quotient")


@dataclass(frozen=True, eq=False)
class HolderPairs:
    """Point pairs (x_k, y_k) with the dyadic shell each was drawn from."""

    x: np.ndarray
    y: np.ndarray
    shell: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    @property
    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.x - self.y, axis=1)

    @classmethod
    def from_points(cls, x, y) -> "HolderPairs":
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        y = np.asarray(y, dtype=float).reshape(-1, 2)
        if len(x) != len(y):
            raise PotentialError("Pair endpoints differ in count")
        return cls(x, y, np.zeros(len(x), dtype=int))


def sample_holder_pairs(center=(0.0, 0.0), half_width: float = 0.5, shells: int = 11,
                        per_shell: int = 64, seed: int = 0,
                        base: Optional[float] = None) -> HolderPairs:
    """
    Draw point pairs at dyadic distances base·2^{-k}, k = 0..shells-1.

    Both endpoints lie in the square window of the given half width.

    Args:
        center: Window centre
        half_width: Window half side
        shells: Number of dyadic shells
        per_shell: Pairs per shell
        seed: Random seed
        base: Largest pair distance, default half_width

    Returns:
        HolderPairs
    """
    if half_width <= 0.0 or shells < 1 or per_shell < 1:
        raise PotentialError("Pair sampling needs a positive window and counts")
    base = half_width if base is None else float(base)
    if not (0.0 < base <= half_width):
        raise PotentialError(f"Base distance must lie in (0, {half_width}], got {base}")
    rng = np.random.default_rng(seed)
    c = np.asarray(center, dtype=float)
    xs, ys, ks = [], [], []
    for k in range(shells):
        delta = base * 2.0 ** -k
        # x stays delta away from the window boundary so y is inside
        room = half_width - delta
        x = c + rng.uniform(-room, room, size=(per_shell, 2)) if room > 0 else np.tile(c, (per_shell, 1))
        theta = rng.uniform(0.0, 2.0 * math.pi, size=per_shell)
        y = x + delta * np.column_stack([np.cos(theta), np.sin(theta)])
        xs.append(x)
        ys.append(y)
        ks.append(np.full(per_shell, k))
    return HolderPairs(np.vstack(xs), np.vstack(ys), np.concatenate(ks))


@dataclass
class HolderReport:
    """
    Result of a Hölder-quotient evaluation.

    Attributes:
        alpha: Exponent; the quotient is |u(x) - u(y)| / |x - y|^{α-1}
        quotient: Supremum over the sampled pairs
        normalizer: M, or M + Φ/δ² for the local version, when given
        normalized: quotient / normalizer
        hypothesis_holds: M r_*^α >= Φ when M and r_* are given
        shells: (shell, distance, max quotient) per shell
    """

    alpha: float
    quotient: float
    normalizer: Optional[float] = None
    normalized: Optional[float] = None
    hypothesis_holds: Optional[bool] = None
    shells: List[Tuple[int, float, float]] = field(default_factory=list)

    def shell_rows(self) -> List[Tuple[int, float, float]]:
        return list(self.shells)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "quotient": self.quotient,
            "normalizer": self.normalizer,
            "normalized": self.normalized,
            "hypothesis_holds": self.hypothesis_holds,
            "shells": [list(row) for row in self.shells],
        }


def holder_quotient(m: AtomicMeasure, alpha: float, pairs: HolderPairs,
                    spec: Optional[RegularizedKernelSpec] = None,
                    ahlfors_M: Optional[float] = None, r_star: Optional[float] = None,
                    local_radius: Optional[float] = None) -> HolderReport:
    """
    sup |u(x) - u(y)| / |x - y|^{α-1} over sampled pairs.

    Args:
        m: Measure generating u
        alpha: Exponent in (1, 2]
        pairs: Sampled pairs
        spec: Kernel specification
        ahlfors_M: Ahlfors constant M(α) used to normalise the quotient
        r_star: Ball radius cap; with M it sets the hypothesis flag
        local_radius: δ for the local version, normalising by M + Φ/δ²

    Returns:
        HolderReport
    """
    if len(pairs) == 0:
        raise PotentialError("Empty pair set")
    if not (1.0 < alpha <= 2.0):
        raise PotentialError(f"Hölder exponent must lie in (1, 2], got {alpha}")
    ux = potentials_at(m, pairs.x, spec)
    uy = potentials_at(m, pairs.y, spec)
    dist = pairs.distances
    if np.any(dist <= 0.0):
        raise PotentialError("Pairs with coincident endpoints")
    q = np.abs(ux - uy) / dist ** (alpha - 1.0)
    report = HolderReport(alpha=alpha, quotient=float(q.max()))
    for k in np.unique(pairs.shell):
        sel = pairs.shell == k
        report.shells.append((int(k), float(dist[sel].mean()), float(q[sel].max())))
    if ahlfors_M is not None:
        normalizer = float(ahlfors_M)
        if local_radius is not None:
            normalizer += m.mass / local_radius ** 2
        report.normalizer = normalizer
        report.normalized = report.quotient / normalizer
        if r_star is not None:
            report.hypothesis_holds = ahlfors_M * r_star ** alpha >= m.mass
            if not report.hypothesis_holds:
                logger.info("M r*^alpha < Phi: quotient reported outside the hypothesis")
    return report


def linf_ratio(m: AtomicMeasure, spec: Optional[RegularizedKernelSpec] = None) -> float:
    """norm² / (‖density‖_∞^{1/2} Φ^{3/2}) for a measure of non-overlapping disks."""
    spec = spec or RegularizedKernelSpec()
    if spec.mode is not KernelMode.DISK:
        raise PotentialError("L-infinity ratio needs disk mode")
    density = float(np.max(m.weights / (math.pi * m.radii ** 2)))
    return hminus_half_norm_sq(m, spec) / (math.sqrt(density) * m.mass ** 1.5)


def ahlfors_norm_ratio(m: AtomicMeasure, alpha: float, ahlfors_M: float,
                       spec: Optional[RegularizedKernelSpec] = None) -> float:
    """norm² / (M^{1/α} Φ^{2 - 1/α})."""
    if alpha <= 0.0 or ahlfors_M <= 0.0:
        raise PotentialError("Norm ratio needs α > 0 and M > 0")
    return hminus_half_norm_sq(m, spec) / (ahlfors_M ** (1.0 / alpha)
                                           * m.mass ** (2.0 - 1.0 / alpha))


def spread_mass_ratio(m: AtomicMeasure, alpha: float, ahlfors_M: float) -> float:
    """M^{1/α} r / Φ^{1/α} with r the spreading scale around the barycenter."""
    if alpha <= 0.0 or ahlfors_M <= 0.0:
        raise PotentialError("Spread ratio needs α > 0 and M > 0")
    return (ahlfors_M / m.mass) ** (1.0 / alpha) * m.spreading_scale()
