import numpy as np
import pytest

from drivenwell import ModelParams, solve
from drivenwell.dissipation import BathParams, integrate_master_equation, kernel_for_solution
from drivenwell.doublewell import build_position, build_static_hamiltonian
from drivenwell.observables import (
    CoherenceTrace,
    LabelingError,
    coherence_trace,
    decoherence_rate,
    identify_states,
    localized_states,
    renyi_entropy,
)


class TestRenyiEntropy:
    def test_pure_state_zero(self):
        v = np.array([0.6, 0.8j, 0.0])
        rho = np.outer(v, v.conj())
        assert renyi_entropy(rho) == pytest.approx(0.0, abs=1e-14)

    def test_maximally_mixed(self):
        for n in (2, 5, 9):
            rho = np.eye(n) / n
            assert renyi_entropy(rho) == pytest.approx(np.log(n), rel=1e-12)

    def test_equal_two_state_mixture(self):
        rho = np.diag([0.5, 0.5, 0.0, 0.0])
        assert renyi_entropy(rho) == pytest.approx(np.log(2), rel=1e-12)

    def test_other_orders(self):
        rho = np.diag([0.75, 0.25])
        s3 = np.log(0.75**3 + 0.25**3) / (1 - 3)
        assert renyi_entropy(rho, order=3) == pytest.approx(s3, rel=1e-12)

    def test_rejects_first_order_and_bad_input(self):
        rho = np.eye(2) / 2
        with pytest.raises(ValueError):
            renyi_entropy(rho, order=1.0)
        with pytest.raises(ValueError):
            renyi_entropy(np.diag([1.5, -0.5]))
        skew = np.array([[0.5, 0.2], [0.0, 0.5]])
        with pytest.raises(ValueError):
            renyi_entropy(skew)

    def test_clamps_integrator_noise(self):
        rho = np.diag([1.0 + 5e-7, -5e-7])
        assert renyi_entropy(rho) == pytest.approx(0.0, abs=1e-5)


class TestIdentifyStates:
    def test_undriven_labels_lowest_pair(self, undriven_solution):
        labels = identify_states(undriven_solution)
        order = np.argsort(undriven_solution.mean_energies)
        assert {labels.d_plus, labels.d_minus} == set(order[:2].tolist())
        assert labels.hybrid == ()

    def test_crossing_center_flags_two_hybrids(self, center_solution):
        labels = identify_states(center_solution)
        assert labels.d_minus is None and labels.singlet is None
        assert len(labels.hybrid) == 2

    def test_off_crossing_finds_resonant_level(self, off_solution):
        labels = identify_states(off_solution)
        assert labels.d_minus is not None
        assert labels.singlet is not None
        e = off_solution.mean_energies
        omega = off_solution.params.omega
        assert e[labels.singlet] - e[labels.d_minus] == pytest.approx(omega, abs=0.1)

    def test_far_side_levels_swap_shape(self):
        # past the crossing the resonant level carries the barrier-top shape
        sol = solve(ModelParams(omega=1.55))
        labels = identify_states(sol)
        _, vectors = np.linalg.eigh(build_static_hamiltonian(sol.params))
        barrier_top = vectors[:, 4]
        overlap = np.abs(sol.modes0[labels.singlet] @ barrier_top.conj()) ** 2
        assert overlap > 0.95


class TestLocalizedStates:
    def test_undriven_well_positions(self, undriven_solution):
        loc = localized_states(undriven_solution)
        x = build_position(undriven_solution.params.N)
        xr = np.real(loc.phi_right.conj() @ x @ loc.phi_right)
        xl = np.real(loc.phi_left.conj() @ x @ loc.phi_left)
        assert xr > 0
        assert xr == pytest.approx(-xl, abs=1e-8)
        # within 10% of the classical minimum sqrt(8 D) = 4
        assert abs(xr - 4.0) < 0.4

    def test_left_right_orthonormal(self, undriven_solution):
        loc = localized_states(undriven_solution)
        assert abs(np.vdot(loc.phi_right, loc.phi_left)) < 1e-10
        assert np.linalg.norm(loc.phi_right) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(loc.phi_left) == pytest.approx(1.0, abs=1e-12)

    def test_crossing_center_keeps_doublet_character(self, center_solution):
        loc = localized_states(center_solution)
        x = build_position(center_solution.params.N)
        xr = np.real(loc.phi_right.conj() @ x @ loc.phi_right)
        assert abs(xr - 4.0) < 0.4
        assert loc.phi_top is not None
        assert abs(np.vdot(loc.phi_top, loc.phi_right)) < 1e-8

    def test_coefficients_reproduce_states(self, center_solution):
        loc = localized_states(center_solution)
        rebuilt = loc.coeff_right @ center_solution.modes0
        assert np.max(np.abs(rebuilt - loc.phi_right)) < 1e-10


class TestCoherenceTraceAndRate:
    @pytest.fixture(scope="class")
    def center_run(self, center_solution):
        bath = BathParams(gamma=1e-5, temperature=1e-4, n_f=10, K=32)
        kernel = kernel_for_solution(center_solution, bath)
        loc = localized_states(center_solution)
        retained = kernel.retained
        coeff_left = loc.coeff_left[retained]
        coeff_left = coeff_left / np.linalg.norm(coeff_left)
        hybrid = loc.labels.hybrid
        pos = [int(np.where(retained == h)[0][0]) for h in hybrid]
        splitting = abs(kernel.eps[pos[0]] - kernel.eps[pos[1]])
        rho0 = np.outer(coeff_left, coeff_left.conj())
        traj = integrate_master_equation(kernel, rho0, 6 * 2 * np.pi / splitting)
        trace = coherence_trace(
            traj.times, traj.states, coeff_return=coeff_left,
            coeff_left=loc.coeff_right[retained],
            coeff_top=loc.coeff_top[retained],
        )
        return trace, splitting, kernel, rho0, coeff_left

    def test_return_probability_starts_at_one(self, center_run):
        trace, *_ = center_run
        assert trace.p_return[0] == pytest.approx(1.0, abs=1e-10)

    def test_probabilities_bounded_and_summable(self, center_run):
        trace, *_ = center_run
        for p in (trace.p_return, trace.p_left, trace.p_top):
            assert p.min() > -1e-9 and p.max() < 1 + 1e-9
        total = trace.p_return + trace.p_left + trace.p_top
        assert np.max(total) < 1 + 1e-6

    def test_entropy_grows_from_zero(self, center_run):
        trace, *_ = center_run
        assert trace.s2[0] == pytest.approx(0.0, abs=1e-9)
        assert trace.s2[-1] > 1e-4

    def test_rate_scales_linearly_with_coupling(self, center_solution, center_run):
        trace, splitting, kernel, rho0, coeff_left = center_run
        base = decoherence_rate(trace, splitting, cycles=4)
        bath2 = BathParams(gamma=2e-5, temperature=1e-4, n_f=10, K=32)
        kernel2 = kernel_for_solution(center_solution, bath2)
        traj2 = integrate_master_equation(kernel2, rho0, 5 * 2 * np.pi / splitting)
        trace2 = coherence_trace(traj2.times, traj2.states, coeff_return=coeff_left)
        doubled = decoherence_rate(trace2, splitting, cycles=4)
        assert doubled.rate / base.rate == pytest.approx(2.0, rel=0.1)

    def test_zero_dissipation_rate_vanishes(self, center_kernel_free):
        kernel, rho0, coeff = center_kernel_free
        splitting = 5.7e-4
        traj = integrate_master_equation(kernel, rho0, 2 * 2 * np.pi / splitting)
        trace = coherence_trace(traj.times, traj.states, coeff_return=coeff)
        est = decoherence_rate(trace, splitting, cycles=1)
        assert abs(est.rate) < 1e-9

    @pytest.fixture(scope="class")
    def center_kernel_free(self, center_solution):
        from dataclasses import replace

        bath = BathParams(gamma=1e-5, temperature=1e-4, n_f=10, K=32)
        kernel = kernel_for_solution(center_solution, bath)
        silent = replace(kernel, kernel=np.zeros_like(kernel.kernel))
        loc = localized_states(center_solution)
        coeff = loc.coeff_left[kernel.retained]
        coeff = coeff / np.linalg.norm(coeff)
        return silent, np.outer(coeff, coeff.conj()), coeff

    def test_auto_cycle_selection_reports_saturation(self, center_run):
        trace, splitting, *_ = center_run
        est = decoherence_rate(trace, splitting, target=1e9)
        assert est.saturated
        est2 = decoherence_rate(trace, splitting, target=trace.s2[-1] / 4)
        assert not est2.saturated
        assert est2.cycles >= 1

    def test_window_validation(self, center_run):
        trace, splitting, *_ = center_run
        with pytest.raises(ValueError):
            decoherence_rate(trace, splitting, cycles=10**9)
        with pytest.raises(ValueError):
            decoherence_rate(trace, 0.0)
