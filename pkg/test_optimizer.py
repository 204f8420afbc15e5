import math

import numpy as np
import pytest
from hypothesis import assume, given, settings

from conftest import (I_STAR, TAU_STAR, flow_seeds, random_in_tree, square_four_leaf, static_atom,
                      v_flow)
from irrigation.energy import energy_breakdown, total_energy
from irrigation.errors import FlowError, OptimizerError
from irrigation.measure_core import PolygonalFlow, slice_flow, validate_flow
from irrigation.optimizer import (Constraint, Constraints, FlowObjective, OptimizerConfig,
                                  SweepRow, SweepTable, TopologySearch, apriori_diagnostics,
                                  collapsed_seed, construct_seed, extend_horizon,
                                  first_variation_residual, landscape, objective_value,
                                  optimize_positions, project_shifted_simplex, random_seed,
                                  rt_sweep, shrink_competitor, shrink_competitor_test,
                                  shrink_sweep, topology_search)
from irrigation.potential import disk_self_energy

FIXED = Constraints.of("fix-boundary", "fix-root")


class TestConfig:
    def test_nonpositive_tolerance(self):
        with pytest.raises(OptimizerError):
            OptimizerConfig(grad_tol=0.0)

    def test_from_dict(self):
        cfg = OptimizerConfig.from_dict({"max_iters": 10, "merge_tol": 1e-4})
        assert cfg.max_iters == 10 and cfg.merge_tol == 1e-4
        assert cfg.grad_tol == 1e-7

    def test_merge_tol_below_leaf_radius(self):
        with pytest.raises(OptimizerError):
            OptimizerConfig(merge_tol=1e-3).check_regularization(1e-4)
        OptimizerConfig(merge_tol=1e-3).check_regularization(0.0)

    def test_conflicting_constraints(self):
        with pytest.raises(OptimizerError):
            Constraints.of("fix-boundary", "mass-simplex")
        with pytest.raises(OptimizerError):
            Constraints.of("fix-boundary", "zero-barycenter")

    def test_box_needs_width(self):
        with pytest.raises(OptimizerError):
            Constraints.of("box")
        assert "box" in Constraints.of("box", box_half_width=1.0)

    def test_unknown_constraint(self):
        with pytest.raises(ValueError):
            Constraints.of("fix-everything")


class TestProjection:
    def test_feasible_vector_is_kept(self):
        v = np.array([0.2, 0.3, 0.5])
        np.testing.assert_allclose(project_shifted_simplex(v, 1.0, 1e-9), v)

    def test_lands_on_the_simplex(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            w = project_shifted_simplex(rng.normal(size=7), 2.0, 1e-3)
            assert math.fsum(w) == pytest.approx(2.0, abs=1e-12)
            assert np.all(w >= 1e-3 - 1e-15)

    def test_infeasible_lower_bound(self):
        with pytest.raises(OptimizerError):
            project_shifted_simplex(np.ones(3), 1.0, 0.5)


class TestObjective:
    def test_value_matches_total_energy(self):
        flow = random_in_tree(3, eps=0.05)
        assert objective_value(flow) == pytest.approx(total_energy(flow).total, rel=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(flow_seeds)
    def test_gradient_matches_finite_differences(self, seed):
        flow = random_in_tree(seed, n_leaves=5, eps=0.01)
        leaves = flow.positions[flow.leaves]
        gaps = np.linalg.norm(leaves[:, None] - leaves[None, :], axis=2)
        assume(np.min(gaps + np.eye(len(leaves)) * 10.0) > 0.05)
        objective = FlowObjective(flow, Constraints.of("mass-simplex"))
        x = objective.pack()
        np.testing.assert_allclose(objective.gradient(x), objective.finite_difference_gradient(x),
                                   rtol=1e-5, atol=1e-5)

    def test_fixed_variables_are_not_packed(self, vflow):
        objective = FlowObjective(vflow, FIXED)
        # merge node position and time only
        assert objective.n_free == 3

    def test_degenerate_times_are_infinite(self, vflow):
        objective = FlowObjective(vflow, FIXED)
        x = objective.pack()
        x[2] = 0.0
        assert objective.value(x) == math.inf

    def test_projection_restores_time_order(self, vflow):
        objective = FlowObjective(vflow, FIXED)
        x = objective.pack()
        x[2] = 5.0
        projected, ok = objective.project(x)
        assert ok
        assert projected[2] == pytest.approx(2.0 - 2e-6)


class TestPositionOptimizer:
    def test_v_merge_time(self):
        flow, trace = optimize_positions(v_flow(tau=1.0), OptimizerConfig(max_iters=5000), FIXED)
        assert trace.converged
        merge = flow.node_index(2)
        assert flow.times[merge] == pytest.approx(TAU_STAR, abs=1e-4)
        np.testing.assert_allclose(flow.positions[merge], [0.0, 0.0], atol=1e-9)
        assert energy_breakdown(flow).I == pytest.approx(I_STAR, abs=1e-8)

    @pytest.mark.parametrize("tau", [0.2, 1.95])
    def test_v_from_either_side(self, tau):
        flow, _ = optimize_positions(v_flow(tau=tau), OptimizerConfig(max_iters=5000), FIXED)
        assert flow.times[flow.node_index(2)] == pytest.approx(TAU_STAR, abs=1e-4)

    def test_static_atom_has_nothing_to_do(self):
        flow, trace = optimize_positions(static_atom(), constraints=FIXED)
        assert trace.converged
        assert trace.iterations == 0
        np.testing.assert_array_equal(flow.positions, static_atom().positions)

    @settings(max_examples=8, deadline=None)
    @given(flow_seeds)
    def test_trace_is_monotone(self, seed):
        flow = random_in_tree(seed, n_leaves=4, eps=0.05)
        _, trace = optimize_positions(flow, OptimizerConfig(max_iters=150),
                                      Constraints.of("mass-simplex", "fix-root"))
        assert trace.is_monotone()
        assert trace.final.total <= trace.rows[0].total

    @settings(max_examples=8, deadline=None)
    @given(flow_seeds)
    def test_constraints_hold(self, seed):
        flow = random_in_tree(seed, n_leaves=4, eps=0.05)
        constraints = Constraints.of("mass-simplex", "zero-barycenter", "fix-root")
        result, _ = optimize_positions(flow, OptimizerConfig(max_iters=150), constraints)
        weights = result.leaf_weights()
        assert math.fsum(weights) == pytest.approx(1.0, abs=1e-12)
        assert np.all(weights > 0.0)
        np.testing.assert_allclose(slice_flow(result, result.t_start).barycenter(), 0.0,
                                   atol=1e-10)
        np.testing.assert_allclose(result.positions[result.root], flow.positions[flow.root])
        assert validate_flow(result).ok

    def test_box(self):
        flow = random_in_tree(11, n_leaves=4, eps=0.05, spread=2.0)
        result, _ = optimize_positions(flow, OptimizerConfig(max_iters=50),
                                       Constraints.of("mass-simplex", "box", box_half_width=0.5))
        assert np.all(np.abs(result.positions) <= 0.5 + 1e-15)

    def test_four_leaf_stays_symmetric(self):
        flow, _ = optimize_positions(square_four_leaf(), OptimizerConfig(max_iters=3000), FIXED)
        a, b, c = (flow.positions[flow.node_index(k)] for k in (4, 5, 6))
        np.testing.assert_allclose(a, [-b[0], b[1]], atol=1e-4)
        np.testing.assert_allclose([a[1], c[0], c[1]], 0.0, atol=1e-4)
        assert flow.times[flow.node_index(4)] == pytest.approx(flow.times[flow.node_index(5)],
                                                               abs=1e-4)

    def test_invalid_flow(self):
        broken = PolygonalFlow.from_records(
            [(0, (-1, 0), 0.0), (1, (1, 0), 0.0), (2, (0, 0), 1.0), (3, (0, 0), 2.0)],
            [(0, 2, 0.5), (1, 2, 0.5), (2, 3, 0.9)])
        with pytest.raises(OptimizerError):
            optimize_positions(broken)

    def test_trace_rows(self):
        _, trace = optimize_positions(v_flow(), OptimizerConfig(max_iters=3), FIXED)
        assert trace.rows[0].move == "init"
        assert len(trace.csv_rows()[0]) == 7


class TestLandscape:
    def test_v_closed_forms(self):
        tau, T = 1.0, 2.0
        values = landscape(v_flow(tau=tau, T=T))
        expected = math.sqrt(2.0) / 2.0 * tau + 1.0 / tau + (T - tau) / 2.0
        np.testing.assert_allclose(values.z, expected, rtol=1e-13)
        np.testing.assert_allclose(values.u, 0.0)
        assert values.constant_K == pytest.approx(expected, rel=1e-13)
        assert values.residual_stats.cv == pytest.approx(0.0, abs=1e-14)

    def test_static_atom(self):
        values = landscape(static_atom(T=3.0))
        np.testing.assert_allclose(values.z, 1.5)

    @pytest.mark.parametrize("eps", [0.0, 0.1])
    def test_K_is_the_weighted_mean(self, eps):
        flow = random_in_tree(4, n_leaves=6, eps=eps)
        values = landscape(flow)
        mean = float(values.weights @ (values.z + 2.0 * values.u)) / flow.mass
        assert values.constant_K == pytest.approx(mean, rel=1e-12)

    def test_single_leaf_has_no_residual(self):
        stats = first_variation_residual(static_atom(eps=0.05))
        assert stats.mean == pytest.approx(0.0, abs=1e-12)
        assert stats.cv == pytest.approx(0.0, abs=1e-12)

    def test_free_v_satisfies_the_first_variation(self):
        flow, _ = optimize_positions(v_flow(eps=0.05), OptimizerConfig(max_iters=3000),
                                     Constraints.of("mass-simplex", "fix-root"))
        assert not first_variation_residual(flow).fires()
        np.testing.assert_allclose(flow.leaf_weights(), 0.5, atol=1e-9)

    def test_asymmetric_v_fires(self):
        flow = PolygonalFlow.from_records(
            [(0, (-0.5, 0), 0.0), (1, (1.5, 0), 0.0), (2, (0, 0), 1.0), (3, (0, 0), 2.0)],
            [(0, 2, 0.5), (1, 2, 0.5), (2, 3, 1.0)])
        assert first_variation_residual(flow).fires()
        assert not first_variation_residual(v_flow()).fires()

    def test_needs_edges(self):
        with pytest.raises(FlowError):
            landscape(PolygonalFlow.from_records([(0, (0, 0), 0.0)], []))

    def test_apriori_diagnostics(self):
        d = apriori_diagnostics(v_flow(tau=1.0, T=2.0))
        assert d.last_merge_time == 1.0
        assert d.scaled_spread == pytest.approx(1.0 / math.sqrt(2.0))
        assert d.max_z_excess == pytest.approx(math.sqrt(2.0) / 2.0 + 1.0 + 0.5 - 1.0)


class TestShrinkCompetitor:
    def test_unit_factor_is_neutral(self):
        report = shrink_competitor_test(v_flow(eps=0.05), 3, lam=1.0)
        assert report.gap == 0.0 and report.delta_E == 0.0 and not report.improvable

    def test_kinetic_change_without_boundary(self):
        report = shrink_competitor_test(v_flow(), 3, lam=0.5)
        assert report.E_centered == pytest.approx(1.0)
        assert report.delta_E == pytest.approx(report.expected_delta_E, rel=1e-12)
        assert report.delta_E == pytest.approx(-0.75)
        assert report.delta_P == pytest.approx(0.0, abs=1e-14)
        assert report.improvable

    def test_boundary_resists_the_shrink(self):
        report = shrink_competitor_test(v_flow(eps=0.05), 3, lam=0.5)
        assert report.delta_boundary > 0.2
        assert report.gap == pytest.approx(report.delta_P + report.delta_E + report.delta_boundary,
                                           abs=1e-12)

    def test_shared_node(self, vflow):
        competitor = shrink_competitor(vflow, 2, 0.5)
        assert validate_flow(competitor).ok
        assert competitor.n_edges == 3
        merge = competitor.node_index(2)
        np.testing.assert_allclose(competitor.positions[merge], vflow.positions[2])
        leaves = np.sort(competitor.positions[competitor.leaves][:, 0])
        np.testing.assert_allclose(leaves, [-0.5, 0.5])
        report = shrink_competitor_test(vflow, 2, 0.5)
        assert report.delta_E == pytest.approx(report.expected_delta_E, rel=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(flow_seeds)
    def test_kinetic_identity_on_random_trees(self, seed):
        flow = random_in_tree(seed, n_leaves=5)
        for node_id, report in shrink_sweep(flow, 0.5).items():
            assert report.delta_E == pytest.approx(report.expected_delta_E, rel=1e-9, abs=1e-12)

    def test_sweep_covers_every_merge(self, four_leaf):
        assert sorted(shrink_sweep(four_leaf)) == [4, 5, 6, 7]

    def test_leaf_has_no_subsystem(self, vflow):
        with pytest.raises(FlowError):
            shrink_competitor(vflow, 0)


class TestTopologySearch:
    def test_coalesces_a_split_merge(self):
        flow = PolygonalFlow.from_records(
            [(0, (-1, 0), 0.0), (1, (1, 0), 0.0), (2, (0, 0), 1.0), (4, (0, 0), 1.0005),
             (3, (0, 0), 2.0)],
            [(0, 2, 0.5), (1, 2, 0.5), (2, 4, 1.0), (4, 3, 1.0)])
        best, trace = TopologySearch(OptimizerConfig(max_iters=3000), FIXED).run(flow)
        assert best.n_edges == 3
        assert objective_value(best) == pytest.approx(I_STAR, abs=1e-6)
        assert any(row.move == "coalesce" for row in trace.rows)

    def test_optimal_v_is_kept(self):
        start, _ = optimize_positions(v_flow(), OptimizerConfig(max_iters=3000), FIXED)
        best, _ = TopologySearch(OptimizerConfig(max_iters=3000), FIXED).run(start)
        assert best.n_edges == 3
        assert objective_value(best) <= objective_value(start) + 1e-10
        assert objective_value(topology_search(start, OptimizerConfig(max_iters=3000), FIXED)) \
            == pytest.approx(objective_value(best), abs=1e-12)

    def test_star_never_gets_worse(self):
        angles = 2.0 * math.pi * np.arange(3) / 3.0
        nodes = [(k, (math.cos(a), math.sin(a)), 0.0) for k, a in enumerate(angles)]
        nodes += [(3, (0.0, 0.0), 1.0), (4, (0.0, 0.0), 2.0)]
        edges = [(k, 3, 1.0 / 3.0) for k in range(3)] + [(3, 4, 1.0)]
        star = PolygonalFlow.from_records(nodes, edges)
        cfg = OptimizerConfig(max_iters=500, max_rounds=3)
        optimized, _ = optimize_positions(star, cfg, FIXED)
        best, _ = TopologySearch(cfg, FIXED).run(star)
        assert validate_flow(best).ok
        assert objective_value(best) <= objective_value(optimized) + 1e-10

    def test_needs_a_tree(self):
        flow = PolygonalFlow.from_records(
            [(0, (0, 0), 0.0), (1, (-1, 0), 1.0), (2, (1, 0), 1.0), (3, (0, 0), 2.0)],
            [(0, 1, 0.5), (0, 2, 0.5), (1, 3, 0.5), (2, 3, 0.5)])
        with pytest.raises(OptimizerError):
            TopologySearch().run(flow)


class TestSweep:
    def test_seeds_are_valid(self):
        rng = np.random.default_rng(0)
        for flow in (construct_seed(2.0, 1.0, 16, 0.05), random_seed(2.0, 1.0, 7, 0.05, rng),
                     collapsed_seed(1.0, 5, 0.05)):
            assert validate_flow(flow).ok
            assert flow.mass == pytest.approx(1.0)
            assert flow.eps == 0.05
        assert construct_seed(2.0, 1.0, 7, 0.05) is None

    def test_extend_horizon_is_neutral(self, four_leaf):
        longer = extend_horizon(four_leaf.with_geometry(eps=0.05), 5.0)
        assert longer.horizon == 5.0
        assert validate_flow(longer).ok
        assert objective_value(longer) == pytest.approx(
            objective_value(four_leaf.with_geometry(eps=0.05)), rel=1e-12)
        assert extend_horizon(four_leaf, 1.0) is four_leaf

    def test_single_leaf_is_one_disk(self):
        table = rt_sweep([1.0], [1.0], leaves=1)
        assert table.value(1.0, 1.0) == pytest.approx(float(disk_self_energy(0.05)), rel=1e-9)

    def test_small_grid_is_monotone_and_stable(self):
        table = rt_sweep([1.0, 2.0], [1.0, 2.0], leaves=1)
        assert len(table.rows) == 4
        assert table.is_monotone()
        assert table.is_stable()
        assert table.csv_rows()[0][:2] == (1.0, 1.0)

    @pytest.mark.parametrize("R,T,leaves", [([0.5], [1.0], 4), ([2.0, 1.0], [1.0], 4),
                                            ([1.0], [1.0], 0)])
    def test_rejects_bad_grids(self, R, T, leaves):
        with pytest.raises(OptimizerError):
            rt_sweep(R, T, leaves=leaves)

    def test_table_checks(self):
        rows = [SweepRow(1.0, 1.0, 3.0, "construct"), SweepRow(1.0, 2.0, 2.5, "random"),
                SweepRow(2.0, 1.0, 2.9, "collapsed"), SweepRow(2.0, 2.0, 2.4, "construct")]
        table = SweepTable(rows)
        assert table.is_monotone()
        assert table.stabilization_gap() == pytest.approx(0.6 / 2.4)
        assert not table.is_stable()
        rows[-1] = SweepRow(2.0, 2.0, 3.5, "random")
        assert not SweepTable(rows).is_monotone()

    def test_constraint_names(self):
        constraints = Constraints.of(Constraint.MASS_SIMPLEX, "fix-root")
        assert constraints.names() == ["fix-root", "mass-simplex"]
