"""Riesz potential u = |x|^{-1} * μ and the H^{-1/2} norm of atomic measures."""

import logging
import math
from typing import Iterator, Optional, Tuple

import numpy as np

from ..errors import PotentialError
from ..measure_core import AtomicMeasure
from .kernel import (FAR_FIELD_GAP, KernelMode, RegularizedKernelSpec, disk_potential,
                     disk_potential_slope, disk_self_energy, pair_interaction)

logger = logging.getLogger(__name__)

# pairs evaluated per block of rows
_ROW_BLOCK = 256
# near-field pairs above this count share quadrature values by rounded key
_DEDUP_THRESHOLD = 2048
_KEY_DECIMALS = 10
_COINCIDE_RTOL = 1e-14


def _check_measure(m: AtomicMeasure, spec: RegularizedKernelSpec) -> None:
    if len(m) == 0 or m.mass <= 0.0:
        raise PotentialError("Potential of an empty measure")
    if spec.mode is KernelMode.DISK and np.any(m.radii <= 0.0):
        raise PotentialError("Disk mode needs every atom radius > 0")


def potentials_at(m: AtomicMeasure, points, spec: Optional[RegularizedKernelSpec] = None) -> np.ndarray:
    """
    Evaluate u at many points.

    Args:
        m: Atomic measure (disk radii taken from m.radii in disk mode)
        points: (k, 2) evaluation points
        spec: Kernel specification, default disk mode

    Returns:
        (k,) potentials
    """
    spec = spec or RegularizedKernelSpec()
    _check_measure(m, spec)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    scale = max(m.diameter, float(np.max(m.radii)), 1.0)
    out = np.empty(len(pts))
    for start in range(0, len(pts), _ROW_BLOCK):
        block = pts[start:start + _ROW_BLOCK]
        dist = np.linalg.norm(block[:, None, :] - m.positions[None, :, :], axis=2)
        if spec.mode is KernelMode.PURE:
            if np.any(dist <= _COINCIDE_RTOL * scale):
                raise PotentialError("Pure-mode potential is infinite on an atom")
            out[start:start + len(block)] = (m.weights[None, :] / dist).sum(axis=1)
        else:
            u = disk_potential(dist, np.broadcast_to(m.radii[None, :], dist.shape))
            out[start:start + len(block)] = u @ m.weights
    return out


def potential_at(m: AtomicMeasure, x, spec: Optional[RegularizedKernelSpec] = None) -> float:
    """u(x) = Σ w_i K_i(x) with K_i a point charge or a uniform disk."""
    return float(potentials_at(m, np.asarray(x, dtype=float).reshape(1, 2), spec)[0])


def potential_gradients_at(m: AtomicMeasure, points,
                           spec: Optional[RegularizedKernelSpec] = None) -> np.ndarray:
    """∇u at the given points, shape (k, 2)."""
    spec = spec or RegularizedKernelSpec()
    _check_measure(m, spec)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    diff = pts[:, None, :] - m.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    if np.any(dist == 0.0):
        raise PotentialError("Gradient requested at an atom centre")
    if spec.mode is KernelMode.PURE:
        slope = -1.0 / dist ** 2
    else:
        slope = disk_potential_slope(dist, np.broadcast_to(m.radii[None, :], dist.shape))
    return np.einsum("kj,kjc->kc", slope * m.weights[None, :] / dist, diff)


def _self_energies(m: AtomicMeasure, spec: RegularizedKernelSpec) -> np.ndarray:
    if spec.mode is KernelMode.PURE:
        if not spec.exclude_self:
            raise PotentialError("Pure-mode self-interaction is infinite; set exclude_self")
        return np.zeros(len(m))
    return disk_self_energy(m.radii)


def _pair_blocks(m: AtomicMeasure, spec: RegularizedKernelSpec) -> Iterator[Tuple[np.ndarray, ...]]:
    """Yield (i, j, K_ij, dK_ij, d_ij) for all pairs i < j, block by block."""
    n = len(m)
    x, r = m.positions, m.radii
    scale = max(m.diameter, 1.0)
    for start in range(0, n - 1, _ROW_BLOCK):
        rows = np.arange(start, min(start + _ROW_BLOCK, n - 1))
        ii, jj = np.nonzero(np.arange(n)[None, :] > rows[:, None])
        ii = rows[ii]
        d = np.linalg.norm(x[ii] - x[jj], axis=1)
        if spec.mode is KernelMode.PURE:
            if np.any(d <= _COINCIDE_RTOL * scale):
                raise PotentialError("Coincident atoms in pure mode")
            yield ii, jj, 1.0 / d, -1.0 / d ** 2, d
            continue
        values, slopes = _disk_pairs(d, r[ii], r[jj], spec.quadrature_order, n)
        yield ii, jj, values, slopes, d


def _disk_pairs(d, a, b, order, n):
    near = np.flatnonzero(d - a - b <= FAR_FIELD_GAP * np.maximum(a, b))
    if n < 256 or len(near) <= _DEDUP_THRESHOLD:
        return pair_interaction(d, a, b, order)
    values, slopes = pair_interaction(d, a, b, order, near_field=False)
    # grids repeat the same (d, a, b) triples many times
    dn, an, bn = d[near], a[near], b[near]
    ref = float(max(an.max(), bn.max()))
    keys = np.round(np.column_stack([dn, an, bn]) / ref, _KEY_DECIMALS)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    v, s = pair_interaction(dn[first], an[first], bn[first], order)
    values[near] = v[inverse]
    slopes[near] = s[inverse]
    return values, slopes


def hminus_half_norm_sq(m: AtomicMeasure, spec: Optional[RegularizedKernelSpec] = None) -> float:
    """
    ∫∫ 1/|x - y| dμ dμ for a measure of disks (or point charges without self-terms).

    Args:
        m: Atomic measure
        spec: Kernel specification, default disk mode

    Returns:
        The squared H^{-1/2} norm
    """
    spec = spec or RegularizedKernelSpec()
    _check_measure(m, spec)
    w = m.weights
    partial = [math.fsum(w * w * _self_energies(m, spec))]
    for ii, jj, values, _, _ in _pair_blocks(m, spec):
        partial.append(2.0 * math.fsum(w[ii] * w[jj] * values))
    return math.fsum(partial)


def leaf_potentials(m: AtomicMeasure, spec: Optional[RegularizedKernelSpec] = None) -> np.ndarray:
    """
    Disk-averaged potentials u_i = Σ_j w_j K_ij with K_ii the self-energy.

    Σ w_i u_i equals the squared norm, and ∂(norm²)/∂w_i = 2 u_i.
    """
    spec = spec or RegularizedKernelSpec()
    _check_measure(m, spec)
    w = m.weights
    u = w * _self_energies(m, spec)
    for ii, jj, values, _, _ in _pair_blocks(m, spec):
        np.add.at(u, ii, w[jj] * values)
        np.add.at(u, jj, w[ii] * values)
    return u


def norm_gradient(m: AtomicMeasure,
                  spec: Optional[RegularizedKernelSpec] = None) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Squared norm with its gradients in the atom weights and positions.

    Returns:
        (norm², d/dw of shape (n,), d/dx of shape (n, 2))
    """
    spec = spec or RegularizedKernelSpec()
    _check_measure(m, spec)
    w, x = m.weights, m.positions
    u = w * _self_energies(m, spec)
    grad_x = np.zeros_like(x)
    for ii, jj, values, slopes, d in _pair_blocks(m, spec):
        np.add.at(u, ii, w[jj] * values)
        np.add.at(u, jj, w[ii] * values)
        radial = np.where(d > 0.0, slopes / np.where(d > 0.0, d, 1.0), 0.0)
        pull = (2.0 * w[ii] * w[jj] * radial)[:, None] * (x[ii] - x[jj])
        np.add.at(grad_x, ii, pull)
        np.add.at(grad_x, jj, -pull)
    return math.fsum(w * u), 2.0 * u, grad_x


def monte_carlo_self_energy(radius: float = 1.0, n_samples: int = 10_000_000,
                            seed: int = 0, batch: int = 1_000_000) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of the unit-disk self-energy.

    Uses S = (2/a²) E[L], L the chord length from a uniform point of the disk
    to its boundary in a uniform direction; L is bounded so the estimator has
    finite variance.

    Returns:
        (estimate, standard error)
    """
    if radius <= 0.0 or n_samples < 2:
        raise PotentialError("Monte-Carlo self-energy needs radius > 0 and >= 2 samples")
    rng = np.random.default_rng(seed)
    total, total_sq, done = 0.0, 0.0, 0
    while done < n_samples:
        k = min(batch, n_samples - done)
        rho = radius * np.sqrt(rng.random(k))
        # angle between the point's radius vector and the chord direction
        phi = rng.random(k) * (2.0 * math.pi)
        p = rho * np.cos(phi)
        chord = -p + np.sqrt(p * p + radius * radius - rho * rho)
        total += math.fsum(chord)
        total_sq += math.fsum(chord * chord)
        done += k
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    factor = 2.0 / radius ** 2
    return factor * mean, factor * math.sqrt(var / n_samples)


def monte_carlo_norm_sq(m: AtomicMeasure, n_samples: int = 1_000_000,
                        seed: int = 0) -> Tuple[float, float]:
    """
    Monte-Carlo oracle for the disk-mode norm²: chord estimator on the
    diagonal, independent uniform disk samples for every cross pair.

    Meant for small measures with non-overlapping disks.
    """
    if np.any(m.radii <= 0.0):
        raise PotentialError("Monte-Carlo norm needs disk radii > 0")
    rng = np.random.default_rng(seed)
    w, x, r = m.weights, m.positions, m.radii
    terms, variances = [], []
    for i in range(len(m)):
        s, se = monte_carlo_self_energy(float(r[i]), n_samples, int(rng.integers(2 ** 31)))
        terms.append(w[i] ** 2 * s)
        variances.append((w[i] ** 2 * se) ** 2)

    def disk_samples(k):
        rho = r[k] * np.sqrt(rng.random(n_samples))
        theta = rng.random(n_samples) * (2.0 * math.pi)
        return x[k] + np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])

    for i in range(len(m)):
        for j in range(i + 1, len(m)):
            inv = 1.0 / np.linalg.norm(disk_samples(i) - disk_samples(j), axis=1)
            terms.append(2.0 * w[i] * w[j] * float(inv.mean()))
            variances.append((2.0 * w[i] * w[j]) ** 2 * float(inv.var(ddof=1)) / n_samples)
    return math.fsum(terms), math.sqrt(math.fsum(variances))
