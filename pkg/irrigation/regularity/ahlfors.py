"""Upper Ahlfors-regularity constants and log-log dimension fits."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress
from sklearn.neighbors import BallTree

from ..errors import RegularityError
from ..measure_core import AtomicMeasure

logger = logging.getLogger(__name__)

# closed balls: atoms at distance exactly r are counted
_CLOSED_SLACK = 1e-12
_MIN_FIT_RADII = 4
_GRID_CENTERS = 64

CURVE_CSV_HEADER = ("r", "max_ball_mass")


class CenterMode(Enum):
    SUPPORT_ATOMS = "support-atoms"
    GRID = "grid"


def _centers(m: AtomicMeasure, mode: CenterMode) -> np.ndarray:
    if mode is CenterMode.SUPPORT_ATOMS:
        return m.positions
    lo = m.positions.min(axis=0)
    hi = m.positions.max(axis=0)
    gx = np.linspace(lo[0], hi[0], _GRID_CENTERS)
    gy = np.linspace(lo[1], hi[1], _GRID_CENTERS)
    return np.column_stack([a.ravel() for a in np.meshgrid(gx, gy)])


def dyadic_radii(r_min: float, r_max: float) -> np.ndarray:
    """r_max 2^{-k} for k = 0, 1, ... while >= r_min, in increasing order."""
    if not (0.0 < r_min <= r_max):
        raise RegularityError(f"Degenerate radius window ({r_min}, {r_max})")
    count = int(math.floor(math.log2(r_max / r_min) + 1e-12)) + 1
    return r_max * 2.0 ** -np.arange(count)[::-1]


def max_ball_mass(m: AtomicMeasure, radii: Sequence[float],
                  centers=CenterMode.SUPPORT_ATOMS) -> np.ndarray:
    """
    max over centres x of μ(B̄(x, r)) for each radius.

    Args:
        m: Nonempty measure
        radii: Positive radii
        centers: "support-atoms" (the definition) or "grid" (diagnostic)

    Returns:
        Array of maximal closed-ball masses, one per radius
    """
    radii = np.asarray(list(radii), dtype=float)
    if len(radii) == 0:
        raise RegularityError("Empty radius list")
    if np.any(radii <= 0.0):
        raise RegularityError("Radii must be positive")
    if len(m) == 0:
        raise RegularityError("Ahlfors constant of an empty measure")
    mode = CenterMode(centers)
    tree = BallTree(m.positions)
    pts = _centers(m, mode)
    uniform = bool(np.all(m.weights == m.weights[0]))
    out = np.empty(len(radii))
    for k, r in enumerate(radii):
        reach = r * (1.0 + _CLOSED_SLACK)
        if uniform:
            counts = tree.query_radius(pts, reach, count_only=True)
            out[k] = float(counts.max()) * float(m.weights[0])
        else:
            hits = tree.query_radius(pts, reach)
            out[k] = max(math.fsum(m.weights[idx]) for idx in hits)
    return out


def ahlfors_constant(m: AtomicMeasure, alpha: float, radii: Sequence[float],
                     centers=CenterMode.SUPPORT_ATOMS) -> float:
    """M = max over centres and radii of μ(B̄(x, r)) / r^α."""
    if not (0.0 <= alpha <= 2.0):
        raise RegularityError(f"Exponent must lie in [0, 2], got {alpha}")
    radii = np.asarray(list(radii), dtype=float)
    masses = max_ball_mass(m, radii, centers)
    return float(np.max(masses / radii ** alpha))


def default_fit_window(m: AtomicMeasure) -> Tuple[float, float]:
    """[4 · minimum spacing, diameter / 4]."""
    if len(m) < 2:
        raise RegularityError("Fit window needs at least two atoms")
    return 4.0 * m.min_spacing, m.diameter / 4.0


def dimension_estimate(m: AtomicMeasure,
                       r_window: Optional[Tuple[float, float]] = None) -> Tuple[float, float]:
    """
    Slope of log max-ball-mass against log r over dyadic radii.

    Args:
        m: Measure
        r_window: (r_min, r_max), default `default_fit_window`

    Returns:
        (alpha_hat, standard error); a single atom gives (0, 0)
    """
    if len(m) == 1 and r_window is None:
        return 0.0, 0.0
    r_min, r_max = default_fit_window(m) if r_window is None else r_window
    if not (0.0 < r_min < r_max):
        raise RegularityError(f"Degenerate fit window ({r_min}, {r_max})")
    radii = dyadic_radii(r_min, r_max)
    masses = max_ball_mass(m, radii)
    keep = masses > 0.0
    if keep.sum() < _MIN_FIT_RADII:
        raise RegularityError(
            f"Fit window ({r_min:.4g}, {r_max:.4g}) holds {int(keep.sum())} dyadic radii, "
            f"need {_MIN_FIT_RADII}")
    fit = linregress(np.log(radii[keep]), np.log(masses[keep]))
    return float(fit.slope), float(fit.stderr)


@dataclass
class RegularityReport:
    """
    Ahlfors constants over an exponent grid plus a dimension fit.

    Attributes:
        alpha_grid: Exponents
        M_of_alpha: Ahlfors constant for each exponent
        r_star: Largest ball radius
        fitted_alpha: Log-log slope (None when the window is too narrow)
        band: Standard error of the slope
        fit_window: (r_min, r_max) of the fit
        radii: Ball radii
        masses: Maximal ball mass per radius
    """

    alpha_grid: List[float]
    M_of_alpha: List[float]
    r_star: float
    fitted_alpha: Optional[float]
    band: Optional[float]
    fit_window: Optional[Tuple[float, float]]
    radii: List[float] = field(default_factory=list)
    masses: List[float] = field(default_factory=list)

    def curve_rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.radii, self.masses))

    def monotone_consistent(self, tol: float = 1e-9) -> bool:
        """M(α') <= M(α) r_*^{α - α'} for every α' < α on the grid."""
        pairs = sorted(zip(self.alpha_grid, self.M_of_alpha))
        for i, (a_lo, m_lo) in enumerate(pairs):
            for a_hi, m_hi in pairs[i + 1:]:
                if m_lo > m_hi * self.r_star ** (a_hi - a_lo) + tol:
                    return False
        return True

    def to_dict(self) -> Dict:
        return {
            "alpha_grid": list(self.alpha_grid),
            "M_of_alpha": list(self.M_of_alpha),
            "r_star": self.r_star,
            "fitted_alpha": self.fitted_alpha,
            "band": self.band,
            "fit_window": None if self.fit_window is None else list(self.fit_window),
            "curve": [list(row) for row in self.curve_rows()],
        }


def regularity_report(m: AtomicMeasure, alpha_grid: Sequence[float],
                      radii: Optional[Sequence[float]] = None,
                      centers=CenterMode.SUPPORT_ATOMS) -> RegularityReport:
    """
    Assemble a RegularityReport.

    Radii default to the dyadic grid of the default fit window; a narrow
    window leaves fitted_alpha unset with a logged warning.
    """
    alpha_grid = [float(a) for a in alpha_grid]
    window = None
    if radii is None:
        if len(m) < 2:
            raise RegularityError("Default radii need at least two atoms")
        window = default_fit_window(m)
        radii = dyadic_radii(*window)
    radii = np.asarray(list(radii), dtype=float)
    masses = max_ball_mass(m, radii, centers)
    constants = [float(np.max(masses / radii ** a)) for a in alpha_grid]
    fitted, band = None, None
    try:
        fitted, band = dimension_estimate(m, window)
        window = window or default_fit_window(m)
    except RegularityError as e:
        logger.warning("Dimension fit skipped: %s", e)
    return RegularityReport(alpha_grid, constants, float(radii.max()), fitted, band, window,
                            [float(r) for r in radii], [float(v) for v in masses])


@dataclass(frozen=True)
class GlobalRadiusCheck:
    hypothesis_holds: bool
    M: float
    M_extended: float

    @property
    def passed(self) -> bool:
        return (not self.hypothesis_holds) or self.M_extended <= self.M + 1e-9


def global_radius_check(m: AtomicMeasure, alpha: float,
                        radii: Sequence[float]) -> GlobalRadiusCheck:
    """Extend the radius grid to 4 r_* and compare the Ahlfors constants."""
    radii = np.asarray(list(radii), dtype=float)
    r_star = float(radii.max())
    base = ahlfors_constant(m, alpha, radii)
    extended = np.concatenate([radii, r_star * np.array([1.5, 2.0, 3.0, 4.0])])
    wide = ahlfors_constant(m, alpha, extended)
    return GlobalRadiusCheck(base * r_star ** alpha >= m.mass, base, wide)


class RegularityAnalyzer:
    """Runs the configured regularity analysis on boundary measures."""

    def __init__(self, config: Dict = None):
        """
        Initialize the analyzer.

        Args:
            config: The `analysis` configuration section
        """
        self.config = config or {}
        self.alpha_grid = self.config.get("alpha_grid", [1.0, 1.2, 1.4, 1.6, 1.8, 2.0])
        self.radii = self.config.get("radii")
        self.centers = CenterMode(self.config.get("centers", "support-atoms"))

    def analyze(self, m: AtomicMeasure) -> RegularityReport:
        logger.info("Regularity analysis of %d atoms over %d exponents",
                    len(m), len(self.alpha_grid))
        return regularity_report(m, self.alpha_grid, self.radii, self.centers)
