"""Synthetic measures with known Ahlfors exponents."""

import math
from typing import Optional

import numpy as np

from ..errors import RegularityError
from ..measure_core import AtomicMeasure

CANTOR_DIMENSION = math.log(4.0) / math.log(3.0)


def uniform_square_grid(n: int, side: float = 1.0, mass: float = 1.0,
                        radius: Optional[float] = 0.0, center=(0.0, 0.0)) -> AtomicMeasure:
    """
    n × n cell centres of a centred square, equal weights.

    Args:
        n: Cells per side
        side: Square side
        mass: Total mass
        radius: Atom radius; None means half the cell side
        center: Square centre
    """
    if n < 1:
        raise RegularityError(f"Grid needs n >= 1, got {n}")
    h = side / n
    coords = (np.arange(n) + 0.5) * h - side / 2.0
    gx, gy = np.meshgrid(coords, coords, indexing="ij")
    positions = np.column_stack([gx.ravel(), gy.ravel()]) + np.asarray(center, dtype=float)
    r = 0.5 * h if radius is None else radius
    return AtomicMeasure.from_arrays(positions, np.full(n * n, mass / (n * n)), r)


def uniform_segment(n: int, length: float = 1.0, mass: float = 1.0,
                    radius: float = 0.0) -> AtomicMeasure:
    """n equally spaced atoms on a horizontal centred segment."""
    if n < 1:
        raise RegularityError(f"Segment needs n >= 1, got {n}")
    h = length / n
    xs = (np.arange(n) + 0.5) * h - length / 2.0
    return AtomicMeasure.from_arrays(np.column_stack([xs, np.zeros(n)]),
                                     np.full(n, mass / n), radius)


def _cantor_centres(levels: int) -> np.ndarray:
    centres = np.array([0.0])
    width = 1.0
    for _ in range(levels):
        width /= 3.0
        centres = np.concatenate([centres - width, centres + width])
    return centres


def cantor_product(levels: int, mass: float = 1.0, radius: float = 0.0) -> AtomicMeasure:
    """
    Level-L approximation of C × C, C the middle-thirds Cantor set on [-1/2, 1/2].

    4^L equal atoms at the centres of the surviving squares; the limit is
    Ahlfors regular of dimension log 4 / log 3.
    """
    if not (1 <= levels <= 8):
        raise RegularityError(f"Cantor levels must lie in [1, 8], got {levels}")
    c = _cantor_centres(levels)
    gx, gy = np.meshgrid(c, c, indexing="ij")
    count = len(c) ** 2
    return AtomicMeasure.from_arrays(np.column_stack([gx.ravel(), gy.ravel()]),
                                     np.full(count, mass / count), radius)
