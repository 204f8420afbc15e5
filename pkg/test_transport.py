import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from conftest import flow_seeds, random_in_tree, v_flow
from irrigation.errors import TransportError
from irrigation.measure_core import AtomicMeasure, PolygonalFlow
from irrigation.measure_core.serialization import read_csv
from irrigation.transport import (PLAN_CSV_HEADER, bb_gap, plan_to_csv, straight_transport_flow,
                                  wasserstein2)


def _random_measure(rng, n, mass=1.0):
    w = rng.uniform(0.2, 1.0, n)
    return AtomicMeasure.from_arrays(rng.uniform(-1.0, 1.0, (n, 2)), w * mass / w.sum())


def _rational_measure(rng, n):
    w = rng.integers(1, 6, n).astype(float)
    return AtomicMeasure.from_arrays(rng.uniform(-1.0, 1.0, (n, 2)), w / w.sum())


def _marginal_system(a, b):
    cost = ((a.positions[:, None, :] - b.positions[None, :, :]) ** 2).sum(axis=2)
    m, n = cost.shape
    rows = np.zeros((m + n, m * n))
    for i in range(m):
        rows[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        rows[m + j, j::n] = 1.0
    return cost.ravel(), rows, np.concatenate([a.weights, b.weights])


def _linprog_cost(a, b):
    cost, rows, rhs = _marginal_system(a, b)
    return linprog(cost, A_eq=rows, b_eq=rhs, bounds=(0, None), method="highs").fun


def _vertex_plan_cost(a, b):
    """Cheapest basic feasible plan, enumerating every basis of m + n - 1 cells."""
    cost, rows, rhs = _marginal_system(a, b)
    rank = len(a) + len(b) - 1
    best = np.inf
    for cells in itertools.combinations(range(len(cost)), rank):
        sub = rows[:, cells]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        x = np.linalg.lstsq(sub, rhs, rcond=None)[0]
        if np.abs(sub @ x - rhs).max() > 1e-12 or x.min() < -1e-12:
            continue
        best = min(best, float(cost[list(cells)] @ x))
    return best


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5), flow_seeds)
def test_equal_weights_match_best_permutation(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, (n, 2))
    y = rng.uniform(-1.0, 1.0, (n, 2))
    a = AtomicMeasure.from_arrays(x, np.full(n, 1.0 / n))
    b = AtomicMeasure.from_arrays(y, np.full(n, 1.0 / n))
    best = min(sum(np.sum((a.positions[i] - b.positions[p[i]]) ** 2) for i in range(n)) / n
               for p in itertools.permutations(range(n)))
    cost, _ = wasserstein2(a, b)
    assert cost == pytest.approx(best, rel=1e-9, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), flow_seeds)
def test_matches_cheapest_vertex_plan(m, n, seed):
    rng = np.random.default_rng(seed)
    a, b = _rational_measure(rng, m), _rational_measure(rng, n)
    cost, _ = wasserstein2(a, b)
    assert cost == pytest.approx(_vertex_plan_cost(a, b), rel=0.0, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), flow_seeds)
def test_symmetric(m, n, seed):
    rng = np.random.default_rng(seed)
    a, b = _random_measure(rng, m), _random_measure(rng, n)
    assert wasserstein2(a, b)[0] == pytest.approx(wasserstein2(b, a)[0], rel=0.0, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), flow_seeds, st.floats(0.25, 4.0))
def test_dilation_scales_cost(m, n, seed, s):
    rng = np.random.default_rng(seed)
    a, b = _random_measure(rng, m), _random_measure(rng, n)
    cost, _ = wasserstein2(a, b)
    assert wasserstein2(a.dilate(s), b.dilate(s))[0] == pytest.approx(s * s * cost, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), flow_seeds)
def test_matches_linear_program(m, n, seed):
    # HiGHS primal feasibility tolerance is 1e-7
    rng = np.random.default_rng(seed)
    a, b = _random_measure(rng, m), _random_measure(rng, n)
    cost, plan = wasserstein2(a, b)
    assert cost == pytest.approx(_linprog_cost(a, b), rel=1e-7, abs=1e-10)
    row, col = plan.marginals(len(a), len(b))
    np.testing.assert_allclose(row, a.weights, atol=1e-12)
    np.testing.assert_allclose(col, b.weights, atol=1e-12)


def test_mass_mismatch():
    with pytest.raises(TransportError):
        wasserstein2(AtomicMeasure.dirac(), AtomicMeasure.dirac(mass=2.0))


def test_dirac_to_dirac():
    cost, plan = wasserstein2(AtomicMeasure.dirac((0, 0)), AtomicMeasure.dirac((3, 4)))
    assert cost == pytest.approx(25.0)
    assert plan.entries() == [(0, 0, 1.0)]


@settings(max_examples=15, deadline=None)
@given(flow_seeds)
def test_bb_gap_is_nonnegative(seed):
    flow = random_in_tree(seed, n_leaves=5)
    rng = np.random.default_rng(seed)
    for _ in range(3):
        a, b = np.sort(rng.uniform(0.0, 1.0, 2))
        if b - a < 1e-3:
            continue
        assert bb_gap(flow, a, b) >= -1e-9


@settings(max_examples=15, deadline=None)
@given(flow_seeds)
def test_straight_flow_attains_the_bound(seed):
    rng = np.random.default_rng(seed)
    a, b = _random_measure(rng, 4), _random_measure(rng, 3)
    flow = straight_transport_flow(a, b, T=2.0)
    assert bb_gap(flow, 0.0, 2.0) == pytest.approx(0.0, abs=1e-9)


def test_bb_gap_interval(vflow):
    with pytest.raises(ValueError):
        bb_gap(vflow, 1.0, 1.0)


def test_kinked_edge_leaves_a_gap():
    flow = PolygonalFlow.from_records(
        [(0, (-1, 0), 0.0), (1, (1, 0), 0.0), (4, (-0.5, 0.3), 0.5), (2, (0, 0), 1.0),
         (3, (0, 0), 2.0)],
        [(0, 4, 0.5), (4, 2, 0.5), (1, 2, 0.5), (2, 3, 1.0)], rooted=True)
    assert bb_gap(flow, 0.0, 1.0) == pytest.approx(0.18, rel=1e-12)
    assert bb_gap(flow, 0.0, 2.0) == pytest.approx(0.68, rel=1e-12)
    assert bb_gap(v_flow(), 0.0, 1.0) == pytest.approx(0.0, abs=1e-12)


def test_plan_csv(tmp_path):
    a = AtomicMeasure.from_arrays([[-1, 0], [1, 0]], [0.5, 0.5])
    _, plan = wasserstein2(a, AtomicMeasure.dirac())
    path = str(tmp_path / "plan.csv")
    plan_to_csv(plan, path)
    rows = read_csv(path)
    assert tuple(rows[0]) == PLAN_CSV_HEADER
    assert sorted((int(r["source"]), int(r["target"]), float(r["mass"])) for r in rows) \
        == plan.entries()
