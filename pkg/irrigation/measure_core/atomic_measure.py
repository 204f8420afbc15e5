import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from ..errors import MeasureError

MERGE_RTOL = 1e-9

_DIAMETER_DIRECT_LIMIT = 2048


def point_set_diameter(positions: np.ndarray) -> float:
    """Largest pairwise distance of a planar point set."""
    n = len(positions)
    if n < 2:
        return 0.0
    if n <= _DIAMETER_DIRECT_LIMIT:
        return float(pdist(positions).max())
    try:
        hull = ConvexHull(positions)
        return float(pdist(positions[hull.vertices]).max())
    except QhullError:
        # collinear: extent along the principal direction
        centered = positions - positions.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        proj = centered @ vt[0]
        return float(proj.max() - proj.min())


def _merge_coincident(positions, weights, radii, tol):
    n = len(positions)
    if n < 2:
        return positions, weights, radii
    if tol <= 0.0:
        pairs = cKDTree(positions).query_pairs(0.0, output_type="ndarray")
    else:
        pairs = cKDTree(positions).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return positions, weights, radii
    adjacency = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    n_groups, labels = connected_components(adjacency, directed=False)
    # keep first-occurrence order of groups
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    relabel = np.empty(n_groups, dtype=int)
    relabel[order] = np.arange(n_groups)
    labels = relabel[labels]
    merged_w = np.bincount(labels, weights=weights, minlength=n_groups)
    merged_x = np.column_stack([
        np.bincount(labels, weights=weights * positions[:, 0], minlength=n_groups),
        np.bincount(labels, weights=weights * positions[:, 1], minlength=n_groups),
    ]) / merged_w[:, None]
    merged_r = np.zeros(n_groups)
    np.maximum.at(merged_r, labels, radii)
    return merged_x, merged_w, merged_r


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """
    Finitely many weighted planar atoms.

    Attributes:
        positions: (n, 2) atom positions
        weights: (n,) strictly positive masses
        radii: (n,) regularization radii, 0 for pure Dirac atoms
    """

    positions: np.ndarray
    weights: np.ndarray
    radii: np.ndarray

    @classmethod
    def from_arrays(cls, positions, weights, radii=None,
                    merge_scale: Optional[float] = None) -> "AtomicMeasure":
        """
        Build a measure, merging atoms that coincide.

        Args:
            positions: Array-like of shape (n, 2)
            weights: Array-like of shape (n,)
            radii: Scalar or array-like of shape (n,), default 0
            merge_scale: Length used for the merge threshold (default: the
                diameter of the atom set)

        Returns:
            AtomicMeasure with pairwise distinct positions
        """
        x = np.asarray(positions, dtype=float).reshape(-1, 2)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if radii is None:
            r = np.zeros(len(w))
        else:
            r = np.broadcast_to(np.asarray(radii, dtype=float), w.shape).copy()
        if len(x) != len(w):
            raise MeasureError(
                f"Got {len(x)} positions but {len(w)} weights")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w)) and np.all(np.isfinite(r))):
            raise MeasureError("Atomic measure contains NaN or infinite values")
        if np.any(w <= 0.0):
            raise MeasureError("Atom weights must be strictly positive")
        if np.any(r < 0.0):
            raise MeasureError("Atom radii must be nonnegative")
        scale = point_set_diameter(x) if merge_scale is None else float(merge_scale)
        x, w, r = _merge_coincident(x, w, r, MERGE_RTOL * scale)
        for arr in (x, w, r):
            arr.setflags(write=False)
        return cls(x, w, r)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence]) -> "AtomicMeasure":
        """Build from (position, weight[, radius]) tuples."""
        atoms = list(atoms)
        positions = [a[0] for a in atoms]
        weights = [a[1] for a in atoms]
        radii = [a[2] if len(a) > 2 else 0.0 for a in atoms]
        return cls.from_arrays(positions, weights, radii)

    @classmethod
    def dirac(cls, point=(0.0, 0.0), mass: float = 1.0, radius: float = 0.0) -> "AtomicMeasure":
        return cls.from_arrays([point], [mass], [radius])

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    @cached_property
    def diameter(self) -> float:
        return point_set_diameter(self.positions)

    @cached_property
    def min_spacing(self) -> float:
        """Smallest distance between two distinct atoms (0 for one atom)."""
        if len(self) < 2:
            return 0.0
        dist, _ = cKDTree(self.positions).query(self.positions, k=2)
        return float(dist[:, 1].min())

    def _require_mass(self) -> None:
        if len(self) == 0:
            raise MeasureError("Operation needs a nonempty measure")

    def barycenter(self) -> np.ndarray:
        self._require_mass()
        return (self.weights @ self.positions) / self.weights.sum()

    def spreading_scale(self) -> float:
        self._require_mass()
        offsets = np.linalg.norm(self.positions - self.barycenter(), axis=1)
        return math.fsum(self.weights * offsets) / self.mass

    def with_radii(self, radii) -> "AtomicMeasure":
        r = np.broadcast_to(np.asarray(radii, dtype=float), self.weights.shape).copy()
        r.setflags(write=False)
        return AtomicMeasure(self.positions, self.weights, r)

    def dilate(self, s: float) -> "AtomicMeasure":
        """Spatial dilation x -> s x, radii scaled alike."""
        return AtomicMeasure.from_arrays(self.positions * s, self.weights,
                                         self.radii * s)

    def restrict_to_ball(self, center, radius: float) -> "AtomicMeasure":
        """Atoms inside the closed ball; may be empty."""
        keep = np.linalg.norm(self.positions - np.asarray(center, dtype=float),
                              axis=1) <= radius
        return self.subset(keep)

    def subset(self, mask) -> "AtomicMeasure":
        x = self.positions[mask].copy()
        w = self.weights[mask].copy()
        r = self.radii[mask].copy()
        for arr in (x, w, r):
            arr.setflags(write=False)
        return AtomicMeasure(x, w, r)

    def as_tuples(self) -> Tuple[Tuple[Tuple[float, float], float, float], ...]:
        return tuple(((float(p[0]), float(p[1])), float(w), float(r))
                     for p, w, r in zip(self.positions, self.weights, self.radii))


def barycenter(m: AtomicMeasure) -> np.ndarray:
    """Mass-weighted mean position."""
    return m.barycenter()


def spreading_scale(m: AtomicMeasure) -> float:
    """Mass-normalized first moment about the barycenter."""
    return m.spreading_scale()
