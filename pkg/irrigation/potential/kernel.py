"""Unit-mass disk potentials for the Coulomb kernel 1/|x| in the plane."""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import ellipe, ellipk

from ..errors import PotentialError

# below this elliptic parameter the series branch is used
SERIES_CUTOFF = 1e-3
# far-field switch: gap larger than FAR_FIELD_GAP times the larger radius
FAR_FIELD_GAP = 10.0
_M_CEIL = 1.0 - 1e-15


class KernelMode(Enum):
    PURE = "pure"
    DISK = "disk"


@dataclass(frozen=True)
class RegularizedKernelSpec:
    """
    How atoms enter the Coulomb kernel.

    Attributes:
        mode: pure Dirac atoms or uniform disks of the atom radius
        quadrature_order: Gauss-Legendre order of near-field disk-disk integrals
        exclude_self: pure mode only; drop the infinite self-interaction
    """

    mode: KernelMode = KernelMode.DISK
    quadrature_order: int = 8
    exclude_self: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", KernelMode(self.mode))
        if self.quadrature_order < 1:
            raise PotentialError(f"Quadrature order must be >= 1, got {self.quadrature_order}")

    @classmethod
    def from_dict(cls, config: Optional[Dict] = None) -> "RegularizedKernelSpec":
        config = config or {}
        return cls(mode=KernelMode(config.get("mode", "disk")),
                   quadrature_order=int(config.get("quadrature_order", 8)),
                   exclude_self=bool(config.get("exclude_self", False)))

    @classmethod
    def pure(cls, exclude_self: bool = True) -> "RegularizedKernelSpec":
        return cls(mode=KernelMode.PURE, exclude_self=exclude_self)


def disk_self_energy(radius) -> np.ndarray:
    """∫∫ 1/|x - y| over a unit-mass uniform disk: 16 / (3π a)."""
    return 16.0 / (3.0 * math.pi * np.asarray(radius, dtype=float))


def _outer_series(m):
    return 1.0 + m * (1.0 / 8.0 + m * (3.0 / 64.0 + m * (25.0 / 1024.0)))


def _outer_slope_series(m):
    return 1.0 + m * (3.0 / 8.0 + m * (15.0 / 64.0 + m * (175.0 / 1024.0)))


def disk_potential(rho, a) -> np.ndarray:
    """
    Potential of a unit-mass uniform disk of radius a at distance rho from its centre.

    Inside: 4 E(ρ²/a²) / (π a); outside: 4ρ [E(m) - (1 - m) K(m)] / (π a²) with
    m = a²/ρ², where E and K are complete elliptic integrals (parameter form).
    """
    rho, a = np.broadcast_arrays(np.abs(np.asarray(rho, dtype=float)),
                                 np.asarray(a, dtype=float))
    out = np.empty(rho.shape)
    inside = rho <= a
    if np.any(inside):
        ai = a[inside]
        out[inside] = 4.0 * ellipe((rho[inside] / ai) ** 2) / (math.pi * ai)
    outside = ~inside
    if np.any(outside):
        ro, ao = rho[outside], a[outside]
        m = np.minimum((ao / ro) ** 2, _M_CEIL)
        far = m < SERIES_CUTOFF
        vals = np.empty(ro.shape)
        vals[far] = _outer_series(m[far]) / ro[far]
        near = ~far
        mn = m[near]
        vals[near] = (4.0 * ro[near] / (math.pi * ao[near] ** 2)
                      * (ellipe(mn) - (1.0 - mn) * ellipk(mn)))
        out[outside] = vals
    return out


def disk_potential_slope(rho, a) -> np.ndarray:
    """Radial derivative du/dρ of `disk_potential` (log-singular at ρ = a)."""
    rho, a = np.broadcast_arrays(np.abs(np.asarray(rho, dtype=float)),
                                 np.asarray(a, dtype=float))
    out = np.empty(rho.shape)
    inside = rho <= a
    if np.any(inside):
        ri, ai = rho[inside], a[inside]
        m = np.minimum((ri / ai) ** 2, _M_CEIL)
        small = m < SERIES_CUTOFF
        vals = np.empty(ri.shape)
        vals[small] = -ri[small] / ai[small] ** 3 * _outer_slope_series(m[small])
        big = ~small
        vals[big] = (4.0 * (ellipe(m[big]) - ellipk(m[big]))
                     / (math.pi * ai[big] * ri[big]))
        out[inside] = vals
    outside = ~inside
    if np.any(outside):
        ro, ao = rho[outside], a[outside]
        m = np.minimum((ao / ro) ** 2, _M_CEIL)
        far = m < SERIES_CUTOFF
        vals = np.empty(ro.shape)
        vals[far] = -_outer_slope_series(m[far]) / ro[far] ** 2
        near = ~far
        vals[near] = 4.0 * (ellipe(m[near]) - ellipk(m[near])) / (math.pi * ao[near] ** 2)
        out[outside] = vals
    return out


def _quadrature_rule(order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes (√s, θ) and weights of the uniform-disk average rule."""
    x, w = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    n_theta = 2 * order
    theta = (np.arange(n_theta) + 0.5) * (2.0 * math.pi / n_theta)
    weights = np.outer(ws, np.full(n_theta, 1.0 / n_theta))
    return np.sqrt(s), theta, weights


_RULES: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _rule(order: int):
    if order not in _RULES:
        _RULES[order] = _quadrature_rule(order)
    return _RULES[order]


def _disk_average(d, a, b, order):
    """Average over the disk of radius a of the unit disk potential (radius b) at distance d."""
    root_s, theta, weights = _rule(order)
    d = d[:, None, None]
    ra = a[:, None, None] * root_s[None, :, None]
    cos_t = np.cos(theta)[None, None, :]
    rho = np.sqrt(np.maximum(ra * ra + d * d - 2.0 * ra * d * cos_t, 0.0))
    bb = np.broadcast_to(b[:, None, None], rho.shape)
    u = disk_potential(rho, bb)
    slope = disk_potential_slope(rho, bb)
    safe = np.where(rho > 0.0, rho, 1.0)
    drho = np.where(rho > 0.0, (d - ra * cos_t) / safe, 0.0)
    value = np.einsum("pij,ij->p", u, weights)
    deriv = np.einsum("pij,ij->p", slope * drho, weights)
    return value, deriv


def pair_interaction(d, a, b, order: int = 8, chunk: int = 4096,
                     near_field: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """
    Interaction ∫∫ 1/|x - y| of two unit-mass disks and its derivative in d.

    Well separated pairs (gap > 10 max radius) use the multipole form
    (1/d)(1 + (a² + b²)/(8 d²)); the others a symmetrized tensor quadrature.

    Args:
        d: Centre distances
        a, b: Disk radii
        order: Quadrature order
        near_field: when False only the far field is filled, near entries are NaN

    Returns:
        (values, derivatives with respect to d)
    """
    d, a, b = (np.array(v, dtype=float) for v in np.broadcast_arrays(d, a, b))
    values = np.empty(d.shape)
    derivs = np.empty(d.shape)
    far = d - a - b > FAR_FIELD_GAP * np.maximum(a, b)
    if np.any(far):
        df, q = d[far], a[far] ** 2 + b[far] ** 2
        values[far] = (1.0 + q / (8.0 * df * df)) / df
        derivs[far] = -1.0 / df ** 2 - 3.0 * q / (8.0 * df ** 4)
    near = np.flatnonzero(~far)
    if not near_field:
        values[near] = np.nan
        derivs[near] = np.nan
        return values, derivs
    for start in range(0, len(near), chunk):
        idx = near[start:start + chunk]
        va, da = _disk_average(d[idx], a[idx], b[idx], order)
        vb, db = _disk_average(d[idx], b[idx], a[idx], order)
        values[idx] = 0.5 * (va + vb)
        derivs[idx] = 0.5 * (da + db)
    return values, derivs
