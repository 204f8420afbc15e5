import math

import numpy as np
import pytest

from irrigation.construct import (ConstructionConfig, DyadicBuilder, bound_ratio, coarse_level,
                                  dyadic_interpolation, merge_durations, square_to_dirac,
                                  uniform_grid_measure)
from irrigation.energy import energy_breakdown, total_energy
from irrigation.errors import ConstructionError
from irrigation.measure_core import AtomicMeasure, slice_flow, validate_flow


def test_coarse_level():
    assert coarse_level(1.0, 1.0, 4) == 0
    assert coarse_level(16.0, 1.0, 4) == 4
    assert coarse_level(64.0, 1.0, 4) == 4
    assert coarse_level(4.0, 4.0, 4) == 1


@pytest.mark.parametrize("split", ["geometric", "uniform"])
def test_merge_durations_fill_the_window(split):
    cfg = ConstructionConfig(levels=5, time_split=split)
    durations = merge_durations(5, 1, 0.3, cfg)
    assert len(durations) == 5
    assert math.fsum(durations) == pytest.approx(0.3)
    if split == "geometric":
        # finer levels merge faster
        assert all(a < b for a, b in zip(durations, durations[1:]))


def test_config_validation():
    with pytest.raises(ConstructionError):
        ConstructionConfig(levels=0)
    with pytest.raises(ConstructionError):
        ConstructionConfig(time_split="random")
    with pytest.raises(ConstructionError):
        ConstructionConfig(geometric_ratio=1.5)


@pytest.mark.parametrize("levels", [1, 2, 3])
def test_square_to_dirac(levels):
    flow = square_to_dirac(levels)
    assert validate_flow(flow).ok
    start = slice_flow(flow, 0.0)
    assert len(start) == 4 ** levels
    assert start.mass == pytest.approx(1.0)
    end = slice_flow(flow, 1.0)
    assert len(end) == 1
    np.testing.assert_allclose(end.positions[0], [0.0, 0.0], atol=1e-12)
    assert flow.eps == pytest.approx(1.0 / 2 ** (levels + 1))
    assert math.isfinite(total_energy(flow).total)


def test_v_interpolation():
    mu_minus = AtomicMeasure.from_arrays([[-0.25, 0.0], [0.25, 0.0]], [0.5, 0.5])
    flow = DyadicBuilder({"levels": 1}).interpolate(mu_minus, AtomicMeasure.dirac(), T=1.0, R=1.0)
    assert validate_flow(flow).ok
    assert len(slice_flow(flow, 0.0)) == 2
    assert len(slice_flow(flow, 1.0)) == 1


def test_static_interpolation_is_free():
    flow = dyadic_interpolation(AtomicMeasure.dirac(), AtomicMeasure.dirac())
    assert energy_breakdown(flow).I == pytest.approx(0.0, abs=1e-15)


def test_measure_to_measure():
    rng = np.random.default_rng(5)
    a = AtomicMeasure.from_arrays(rng.uniform(-0.5, 0.5, (10, 2)), np.full(10, 0.1))
    b = AtomicMeasure.from_arrays(rng.uniform(-0.5, 0.5, (6, 2)), np.full(6, 1.0 / 6))
    flow = dyadic_interpolation(a, b, T=2.0, R=1.0, cfg=ConstructionConfig(levels=3))
    assert validate_flow(flow, rooted=False).ok
    start, end = slice_flow(flow, 0.0), slice_flow(flow, 2.0)
    assert len(start) == 10 and len(end) == 6
    np.testing.assert_allclose(start.mass, 1.0)
    np.testing.assert_allclose(end.mass, 1.0)


def test_mass_mismatch():
    with pytest.raises(ConstructionError):
        dyadic_interpolation(AtomicMeasure.dirac(), AtomicMeasure.dirac(mass=2.0))


def test_atoms_outside_the_square():
    with pytest.raises(ConstructionError):
        dyadic_interpolation(AtomicMeasure.dirac((0.9, 0.0)), AtomicMeasure.dirac())


def test_uniform_grid_measure():
    m = uniform_grid_measure(4)
    assert len(m) == 16
    np.testing.assert_allclose(m.radii, 1.0 / 8)
    np.testing.assert_allclose(m.barycenter(), [0.0, 0.0], atol=1e-15)


def test_bound_ratio_is_moderate():
    grid = uniform_grid_measure(4, side=1.0, radius=0.0)
    flow = DyadicBuilder({"levels": 2}).interpolate(grid, AtomicMeasure.dirac(), T=1.0, R=1.0)
    ratio = bound_ratio(flow, grid, AtomicMeasure.dirac())
    assert 0.0 < ratio < 10.0
