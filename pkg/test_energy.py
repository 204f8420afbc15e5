import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import (I_STAR, TAU_STAR, flow_seeds, random_in_tree, square_four_leaf,
                      static_atom, v_flow)
from irrigation.energy import (concentration_bound, concentration_threshold, energy_breakdown,
                               equipartition_residual, first_moment_diagnostic, kinetic_rate,
                               perimeter_rate, rate_profile, subsystem_equipartition,
                               total_energy)
from irrigation.errors import FlowError, IrrigationError, MeasureError
from irrigation.measure_core import AtomicMeasure, boundary_measure
from irrigation.potential import disk_self_energy, monte_carlo_norm_sq


class TestBreakdown:
    @pytest.mark.parametrize("tau", [0.5, 1.0, TAU_STAR, 1.9])
    def test_v_closed_form(self, tau):
        b = energy_breakdown(v_flow(tau=tau))
        assert b.P == pytest.approx((math.sqrt(2.0) - 1.0) * tau, rel=1e-13)
        assert b.E == pytest.approx(1.0 / tau, rel=1e-13)
        assert b.I == pytest.approx(b.P + b.E, rel=1e-15)

    def test_v_minimum(self):
        assert energy_breakdown(v_flow(tau=TAU_STAR)).I == pytest.approx(I_STAR, rel=1e-12)

    def test_static_atom_is_free(self):
        b = energy_breakdown(static_atom())
        assert b.P == 0.0 and b.E == 0.0

    def test_interval_restriction(self, vflow):
        early = energy_breakdown(vflow, 0.0, 0.5)
        late = energy_breakdown(vflow, 0.5, 2.0)
        whole = energy_breakdown(vflow)
        assert early.I + late.I == pytest.approx(whole.I, rel=1e-13)
        assert early.E == pytest.approx(0.5, rel=1e-13)

    def test_invalid_interval(self, vflow):
        with pytest.raises(FlowError):
            energy_breakdown(vflow, 1.0, 0.5)

    @settings(max_examples=20, deadline=None)
    @given(flow_seeds)
    def test_rate_profile_integrates_to_I(self, seed):
        flow = random_in_tree(seed)
        rows = rate_profile(flow)
        integral = math.fsum((b - a) * (p + e) for a, b, p, e in rows)
        assert integral == pytest.approx(energy_breakdown(flow).I, rel=1e-12)
        assert all(p >= -1e-15 for _, _, p, _ in rows)

    def test_perimeter_rate(self):
        assert perimeter_rate(AtomicMeasure.dirac()) == 0.0
        two = AtomicMeasure.from_arrays([[0, 0], [1, 0]], [0.5, 0.5])
        assert perimeter_rate(two) == pytest.approx(math.sqrt(2.0) - 1.0)

    def test_kinetic_rate_matches_profile(self, vflow):
        two = AtomicMeasure.from_arrays([[-1, 0], [1, 0]], [0.5, 0.5])
        rate = kinetic_rate(two, [[1.0, 0.0], [-1.0, 0.0]])
        assert rate == pytest.approx(1.0)
        assert rate_profile(vflow)[0][3] == pytest.approx(rate, rel=1e-14)
        assert kinetic_rate(AtomicMeasure.dirac(mass=2.0), [0.0, 3.0]) == pytest.approx(18.0)
        with pytest.raises(MeasureError):
            kinetic_rate(two, [[1.0, 0.0]])


class TestTotalEnergy:
    def test_no_boundary_without_radius(self, vflow):
        e = total_energy(vflow)
        assert e.boundary_norm_sq is None
        assert e.total == e.I

    def test_single_leaf_boundary_is_disk_self_energy(self):
        e = total_energy(static_atom(eps=0.05))
        assert e.total == pytest.approx(float(disk_self_energy(0.05)), rel=1e-12)
        assert e.total == pytest.approx(16.0 / (3.0 * math.pi * 0.05), rel=1e-12)

    def test_boundary_adds_to_internal(self):
        flow = v_flow(eps=0.1)
        e = total_energy(flow)
        assert e.total == pytest.approx(e.I + e.boundary_norm_sq, rel=1e-15)
        assert e.boundary_norm_sq > 0.0

    def test_four_leaf_boundary_matches_monte_carlo(self):
        flow = square_four_leaf(eps=0.3)
        e = total_energy(flow)
        estimate, se = monte_carlo_norm_sq(boundary_measure(flow), n_samples=200_000, seed=3)
        assert abs(e.boundary_norm_sq - estimate) <= 5.0 * se
        # cross pairs push the norm above the four self energies
        assert e.boundary_norm_sq > 4.0 * 0.25 ** 2 * float(disk_self_energy(0.3))


class TestEquipartition:
    def test_v_minimizer(self):
        assert equipartition_residual(v_flow(tau=TAU_STAR)) == pytest.approx(0.0, abs=1e-12)

    def test_sign_off_the_minimizer(self):
        # merging too early wastes kinetic energy, too late wastes perimeter
        assert equipartition_residual(v_flow(tau=1.0)) < 0.0
        assert equipartition_residual(v_flow(tau=1.9)) > 0.0

    def test_static_atom(self):
        assert equipartition_residual(static_atom()) == 0.0

    def test_subsystems(self, four_leaf):
        records = subsystem_equipartition(four_leaf)
        assert sorted(r.node_id for r in records) == [4, 5, 6, 7]
        for r in records:
            assert r.internal_energy >= 0.0


class TestConcentration:
    def test_threshold_value(self):
        assert concentration_threshold(0.05) == pytest.approx(0.0026335, abs=1e-7)

    @pytest.mark.parametrize("eps", [1e-4, 0.01, 0.05, 0.1, 0.2, 0.4])
    def test_closed_form_matches_bisection(self, eps):
        closed = concentration_threshold(eps)
        numeric = concentration_threshold(eps, method="bisection")
        assert closed == pytest.approx(numeric, abs=1e-12)
        assert math.sqrt(1.0 - closed) + math.sqrt(closed) - 1.0 == pytest.approx(eps, abs=1e-12)

    def test_threshold_domain(self):
        with pytest.raises(IrrigationError):
            concentration_threshold(0.5)

    def test_bound_holds(self):
        delta = concentration_bound([0.999, 0.001], 0.05)
        assert delta == pytest.approx(0.001)
        assert delta <= concentration_threshold(0.05)

    def test_rate_over_budget(self):
        with pytest.raises(IrrigationError):
            concentration_bound([0.5, 0.5], 0.05)

    def test_single_atom(self):
        assert concentration_bound([2.0], 0.1) == 0.0


class TestFirstMoment:
    def test_static_atom_is_zero(self):
        assert first_moment_diagnostic(static_atom(), 0.5) == 0.0

    def test_v_at_start(self, vflow):
        value = first_moment_diagnostic(vflow, 0.0)
        assert value == pytest.approx(1.0 / energy_breakdown(vflow).I, rel=1e-12)

    def test_nonzero_moment_without_energy(self):
        with pytest.raises(FlowError):
            first_moment_diagnostic(static_atom().with_geometry(
                positions=np.array([[1.0, 0.0], [1.0, 0.0]])), 0.5)
