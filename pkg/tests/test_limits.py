"""Deterministic and diffusion limit objects: gains, fields, ODE, OU, Lyapunov."""

from __future__ import annotations

import numpy as np
import pytest

import signtrack as st
from signtrack.limits import KIND_FAST, KIND_SLOW, KIND_SWITCHED

from conftest import SCALAR_GAIN, SKEWED_START


def scalar_system(kind, gain, states, weights=None):
    mats = tuple(np.array([[gain]]) for _ in states)
    return st.LimitSystem(kind=kind, states=states, matrices=mats, weights=weights)


class TestEffectiveMatrix:
    def test_closed_form_scalar_value(self, scalar_signal):
        a = st.effective_matrix(scalar_signal)
        assert a.shape == (1, 1)
        assert a[0, 0] == pytest.approx(SCALAR_GAIN, rel=0, abs=1e-15)

    def test_doubling_noise_scale_halves_the_gain_exactly(self):
        narrow = st.effective_matrix(st.gaussian_signal_model(np.eye(1), 0.25))
        wide = st.effective_matrix(st.gaussian_signal_model(np.eye(1), 1.0))
        assert wide[0, 0] == narrow[0, 0] / 2.0

    def test_closed_form_diagonal_covariance(self):
        sig = st.gaussian_signal_model(np.diag([1.0, 4.0]), 1.0)
        a = st.effective_matrix(sig)
        expected = np.sqrt(2.0 / np.pi) * np.diag([1.0, 4.0])
        np.testing.assert_allclose(a, expected, rtol=0, atol=1e-15)

    def test_monte_carlo_agrees_with_closed_form_scalar(self, scalar_signal):
        ref = st.effective_matrix(scalar_signal)
        mc = st.effective_matrix(
            scalar_signal,
            method="monte_carlo",
            samples=2 * 10**6,
            rng=np.random.default_rng([11, 0]),
        )
        assert np.linalg.norm(mc - ref) / np.linalg.norm(ref) <= 0.02

    def test_monte_carlo_agrees_with_closed_form_two_dimensional(self):
        sig = st.gaussian_signal_model(np.diag([1.0, 4.0]), 1.0)
        ref = st.effective_matrix(sig)
        mc = st.effective_matrix(
            sig, method="monte_carlo", samples=2 * 10**6, rng=np.random.default_rng([11, 1])
        )
        assert np.linalg.norm(mc - ref) / np.linalg.norm(ref) <= 0.02

    def test_closed_form_rejects_truncated_model(self):
        model = st.SignalModel(
            regressor=st.DistSpec("truncated_gaussian", np.eye(1), clip=3.0),
            noise=st.DistSpec("gaussian", [[0.25]]),
        )
        with pytest.raises(st.NonGaussianClosedForm):
            st.effective_matrix(model)

    def test_monte_carlo_reports_excessive_variance(self, scalar_signal):
        with pytest.raises(st.MonteCarloVarianceTooHigh) as exc:
            st.effective_matrix(
                scalar_signal,
                method="monte_carlo",
                samples=200,
                rng=np.random.default_rng(0),
            )
        assert exc.value.stderr > exc.value.limit

    def test_unknown_method_rejected(self, scalar_signal):
        with pytest.raises(st.ConfigError):
            st.effective_matrix(scalar_signal, method="quadrature")


class TestLimitFields:
    def test_switched_field_vanishes_at_the_active_state(self):
        sys = scalar_system(KIND_SWITCHED, 2.0, [[-1.0], [0.0], [1.0]])
        for i, state in enumerate([-1.0, 0.0, 1.0]):
            assert np.array_equal(st.switched_field(sys, i, [state]), [0.0])

    def test_switched_field_scalar_arithmetic(self):
        sys = scalar_system(KIND_SWITCHED, 2.0, [[1.0]])
        assert np.array_equal(st.switched_field(sys, 0, [0.0]), [2.0])

    def test_switched_field_is_affine(self):
        rng = np.random.default_rng(3)
        mats = (np.array([[2.0, 0.3], [0.1, 1.5]]),)
        sys = st.LimitSystem(kind=KIND_SWITCHED, states=[[1.0, -1.0]], matrices=mats)
        t1, t2 = rng.normal(size=2), rng.normal(size=2)
        lhs = (
            st.switched_field(sys, 0, t1)
            + st.switched_field(sys, 0, t2)
            - st.switched_field(sys, 0, [0.0, 0.0])
        )
        rhs = st.switched_field(sys, 0, t1 + t2)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)

    def test_switched_field_unknown_state_index(self):
        sys = scalar_system(KIND_SWITCHED, 2.0, [[0.0], [1.0]])
        with pytest.raises(st.UnknownState):
            st.switched_field(sys, 2, [0.0])
        with pytest.raises(st.UnknownState):
            st.switched_field(sys, -1, [0.0])

    def test_slow_field_zero_at_start_law_mean(self):
        sys = scalar_system(
            KIND_SLOW, SCALAR_GAIN, [[-1.0], [0.0], [1.0]], weights=SKEWED_START
        )
        eq = st.field_equilibrium(sys)
        assert abs(eq[0] - (-0.625)) <= 1e-12
        assert abs(st.slow_field(sys, eq)[0]) <= 1e-12
        assert abs(st.slow_field(sys, [-0.625])[0]) <= 1e-12

    def test_fast_field_zero_at_stationary_mean(self):
        sys = scalar_system(
            KIND_FAST, SCALAR_GAIN, [[-1.0], [0.0], [1.0]], weights=[1 / 3, 1 / 3, 1 / 3]
        )
        eq = st.field_equilibrium(sys)
        assert abs(eq[0]) <= 1e-12
        assert abs(st.fast_field(sys, [0.0])[0]) <= 1e-12

    def test_slow_field_with_unit_mass_equals_switched_field(self):
        mats = (np.array([[1.0]]), np.array([[3.0]]))
        states = [[0.5], [-2.0]]
        slow = st.LimitSystem(
            kind=KIND_SLOW, states=states, matrices=mats, weights=[0.0, 1.0]
        )
        switched = st.LimitSystem(kind=KIND_SWITCHED, states=states, matrices=mats)
        for theta in ([0.0], [1.2], [-0.7]):
            assert np.array_equal(
                st.slow_field(slow, theta), st.switched_field(switched, 1, theta)
            )

    def test_fast_field_single_state_equals_switched_field(self):
        mats = (np.array([[2.5]]),)
        fast = st.LimitSystem(
            kind=KIND_FAST, states=[[1.0]], matrices=mats, weights=[1.0]
        )
        switched = st.LimitSystem(kind=KIND_SWITCHED, states=[[1.0]], matrices=mats)
        assert np.array_equal(
            st.fast_field(fast, [0.3]), st.switched_field(switched, 0, [0.3])
        )

    def test_fast_field_with_unit_gains_is_negated_identity_shift(self):
        sys = scalar_system(KIND_FAST, 1.0, [[-1.0], [0.0], [1.0]], weights=[1 / 3] * 3)
        for theta in (-0.4, 0.0, 2.0):
            assert st.fast_field(sys, [theta])[0] == pytest.approx(-theta, abs=1e-15)

    def test_kind_mismatch_rejected(self):
        sys = scalar_system(KIND_SWITCHED, 1.0, [[0.0], [1.0]])
        with pytest.raises(st.ConfigError):
            st.slow_field(sys, [0.0])
        with pytest.raises(st.ConfigError):
            st.fast_field(sys, [0.0])
        with pytest.raises(st.ConfigError):
            st.field_equilibrium(sys)

    def test_gain_matrices_must_be_strictly_stable(self):
        with pytest.raises(st.ConfigError):
            scalar_system(KIND_SWITCHED, -1.0, [[0.0]])
        with pytest.raises(st.ConfigError):
            scalar_system(KIND_SWITCHED, 0.0, [[0.0]])

    def test_weights_contract_per_kind(self):
        with pytest.raises(st.ConfigError):
            scalar_system(KIND_SWITCHED, 1.0, [[0.0], [1.0]], weights=[0.5, 0.5])
        with pytest.raises(st.ConfigError):
            scalar_system(KIND_SLOW, 1.0, [[0.0], [1.0]])

    def test_limit_system_for_builds_weights_from_regime(
        self, scalar_regime, scalar_signal
    ):
        slow = st.limit_system_for(scalar_regime, scalar_signal, KIND_SLOW)
        assert np.array_equal(slow.weights, SKEWED_START)
        fast = st.limit_system_for(scalar_regime, scalar_signal, KIND_FAST)
        np.testing.assert_allclose(fast.weights, 1 / 3, rtol=0, atol=1e-10)
        switched = st.limit_system_for(scalar_regime, scalar_signal, KIND_SWITCHED)
        assert switched.weights is None
        for mat in switched.matrices:
            assert mat[0, 0] == pytest.approx(SCALAR_GAIN, abs=1e-15)


class TestOdeIntegration:
    def test_constant_regime_matches_exponential_relaxation(self):
        sys = scalar_system(KIND_SWITCHED, 1.0, [[1.0], [2.0]])
        chain = st.ChainPath(
            kind="continuous", jump_times=[], state_seq=[0], horizon=5.0
        )
        times, path = st.integrate_ode(sys, [0.0], 1e-3, 5.0, chain=chain)
        exact = 1.0 - np.exp(-times)
        assert np.max(np.abs(path[:, 0] - exact)) <= 1e-8

    def test_fourth_order_convergence_on_smooth_segment(self):
        sys = scalar_system(KIND_SWITCHED, 1.0, [[1.0], [2.0]])
        chain = st.ChainPath(
            kind="continuous", jump_times=[], state_seq=[0], horizon=2.0
        )
        errors = {}
        for dt in (0.2, 0.1):
            times, path = st.integrate_ode(sys, [0.0], dt, 2.0, chain=chain)
            errors[dt] = np.max(np.abs(path[:, 0] - (1.0 - np.exp(-times))))
        assert errors[0.2] / errors[0.1] >= 12.0

    def test_jump_off_the_grid_keeps_fourth_order_accuracy(self):
        # One jump at t = 0.35 that never lands on the output grid: the exact
        # solution is a pair of exponential relaxations glued at the jump.
        # Splitting the step at the jump must preserve fourth-order accuracy;
        # without the split the local error there would degrade to O(dt).
        sys = scalar_system(KIND_SWITCHED, 1.0, [[0.0], [1.0]])
        chain = st.ChainPath(
            kind="continuous", jump_times=[0.35], state_seq=[1, 0], horizon=1.0
        )
        tj = 0.35
        theta_j = 1.0 - np.exp(-tj)
        errors = {}
        for dt in (0.1, 0.05, 0.01):
            times, path = st.integrate_ode(sys, [0.0], dt, 1.0, chain=chain)
            exact = np.where(
                times <= tj + 1e-15,
                1.0 - np.exp(-times),
                theta_j * np.exp(-(times - tj)),
            )
            errors[dt] = np.max(np.abs(path[:, 0] - exact))
        assert errors[0.1] / errors[0.05] >= 12.0
        assert errors[0.01] <= 1e-9

    def test_slow_field_relaxes_monotonically_to_equilibrium(self):
        sys = scalar_system(
            KIND_SLOW, SCALAR_GAIN, [[-1.0], [0.0], [1.0]], weights=SKEWED_START
        )
        times, path = st.integrate_ode(sys, [0.0], 1e-3, 5.0, chain=None)
        vals = path[:, 0]
        assert np.all(np.diff(vals) < 0)
        exact = -0.625 * (1.0 - np.exp(-SCALAR_GAIN * times))
        assert np.max(np.abs(vals - exact)) <= 1e-9
        # Remaining distance to equilibrium is the continuum gap, not error.
        assert abs(vals[-1] - (-0.625)) <= 0.625 * np.exp(-SCALAR_GAIN * 5.0) + 1e-9

    def test_switched_kind_requires_a_chain(self):
        sys = scalar_system(KIND_SWITCHED, 1.0, [[1.0]])
        with pytest.raises(st.ConfigError):
            st.integrate_ode(sys, [0.0], 0.1, 1.0, chain=None)

    def test_output_grid_is_uniform_and_covers_horizon(self):
        sys = scalar_system(KIND_FAST, 1.0, [[1.0], [2.0]], weights=[0.5, 0.5])
        times, path = st.integrate_ode(sys, [0.0], 0.25, 1.0, chain=None)
        np.testing.assert_allclose(times, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)
        assert path.shape == (5, 1)


class TestNoiseCovariance:
    def test_closed_form_returns_regressor_covariance(self):
        cov = np.array([[1.0, 0.3], [0.3, 2.0]])
        sig = st.SignalModel(
            regressor=st.DistSpec("gaussian", cov),
            noise=st.DistSpec("gaussian", [[0.25]]),
        )
        out = st.noise_covariance(sig)
        assert np.array_equal(out.sigma, cov)
        np.testing.assert_allclose(out.sqrt @ out.sqrt.T, cov, rtol=0, atol=1e-10)

    def test_empirical_matches_closed_form_scalar(self, scalar_signal):
        emp = st.noise_covariance(
            scalar_signal,
            method="empirical",
            samples=10**6,
            rng=np.random.default_rng(31),
        )
        assert abs(emp.sigma[0, 0] - 1.0) <= 0.02

    def test_empirical_matches_closed_form_diagonal(self):
        sig = st.gaussian_signal_model(np.diag([1.0, 4.0]), 1.0)
        emp = st.noise_covariance(
            sig, method="empirical", samples=10**6, rng=np.random.default_rng(32)
        )
        np.testing.assert_allclose(emp.sigma, np.diag([1.0, 4.0]), rtol=0.03, atol=0.03)

    def test_lagged_products_of_sign_weighted_regressors_vanish(self):
        # The empirical estimator sums lagged terms; for independent draws
        # each lag term must be statistical noise around zero.
        rng = np.random.default_rng(33)
        n = 10**6
        phi = rng.standard_normal(n)
        e = rng.standard_normal(n) * 0.5
        w = phi * np.sign(e)
        for lag in (1, 2, 5):
            prod = (w[:-lag] * w[lag:]).mean()
            se = (w[:-lag] * w[lag:]).std(ddof=1) / np.sqrt(n - lag)
            assert abs(prod) <= 4.0 * se


class TestMatrixSqrt:
    def test_identity_root(self):
        assert np.array_equal(st.matrix_sqrt_psd(np.eye(3)), np.eye(3))

    def test_diagonal_root(self):
        np.testing.assert_allclose(
            st.matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14
        )

    def test_random_psd_reconstruction(self):
        rng = np.random.default_rng(14)
        b = rng.normal(size=(4, 4))
        sigma = b @ b.T
        root = st.matrix_sqrt_psd(sigma)
        assert np.linalg.norm(root @ root.T - sigma) <= 1e-10 * max(
            1.0, np.linalg.norm(sigma)
        )

    def test_tiny_negative_eigenvalue_clamped(self):
        sigma = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-13]])
        root = st.matrix_sqrt_psd(sigma)
        assert np.all(np.isfinite(root))

    def test_negative_definite_rejected(self):
        with pytest.raises(st.NotPositiveSemidefinite):
            st.matrix_sqrt_psd(np.array([[1.0, 0.0], [0.0, -1e-3]]))


class TestLyapunovSolve:
    def test_scalar_closed_form(self):
        s = st.lyapunov_solve(np.array([[2.0]]), np.array([[3.0]]))
        assert s[0, 0] == pytest.approx(3.0 / 4.0, abs=1e-14)

    def test_identity_drift_halves_the_noise(self):
        s = st.lyapunov_solve(np.eye(2), np.diag([2.0, 4.0]))
        np.testing.assert_allclose(s, np.diag([1.0, 2.0]), rtol=0, atol=1e-12)

    def test_random_stable_system_residual_symmetry_definiteness(self):
        rng = np.random.default_rng(15)
        a = rng.normal(size=(3, 3)) * 0.3 + 2.0 * np.eye(3)
        b = rng.normal(size=(3, 3))
        sigma = b @ b.T + 0.1 * np.eye(3)
        s = st.lyapunov_solve(a, sigma)
        assert np.linalg.norm(a @ s + s @ a.T - sigma) <= 1e-10 * max(
            1.0, np.linalg.norm(sigma)
        )
        assert np.max(np.abs(s - s.T)) <= 1e-12
        assert np.linalg.eigvalsh(s).min() > 0

    def test_solution_is_linear_in_the_noise_matrix(self):
        a = np.array([[1.5, 0.2], [0.0, 0.8]])
        sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
        s1 = st.lyapunov_solve(a, sigma)
        s4 = st.lyapunov_solve(a, sigma / 4.0)
        np.testing.assert_allclose(s4, s1 / 4.0, rtol=0, atol=1e-14)

    def test_eigenvalue_pair_cancellation_rejected(self):
        with pytest.raises(st.SingularLyapunov):
            st.lyapunov_solve(np.diag([1.0, -1.0]), np.eye(2))


class TestOuSimulation:
    def test_noiseless_path_decays_like_the_exponential(self):
        zero = np.zeros((1, 1))
        for dt, tol in ((1e-3, 1e-3), (5e-4, 5e-4)):
            times, path = st.simulate_ou(
                np.array([[1.0]]), zero, [1.0], dt, 1.0, np.random.default_rng(0)
            )
            err = np.max(np.abs(path[:, 0] - np.exp(-times)))
            assert err <= tol

    def test_long_run_variance_matches_lyapunov_solution(self):
        rng = np.random.default_rng(40)
        a = np.array([[1.0]])
        sqrt_cov = np.array([[1.0]])
        tail = []
        for _ in range(200):
            _, path = st.simulate_ou(a, sqrt_cov, [0.0], 0.01, 50.0, rng)
            tail.append(path[len(path) // 2 :, 0])
        var = float(np.concatenate(tail).var())
        assert abs(var - 0.5) <= 0.05

    def test_strong_drift_pins_the_path_near_zero(self):
        rng = np.random.default_rng(41)
        a = np.array([[50.0]])
        _, path = st.simulate_ou(a, np.eye(1), [0.0], 1e-3, 20.0, rng)
        var = float(path[2000:, 0].var())
        assert abs(var - 1.0 / 100.0) <= 0.3 / 100.0

    def test_flipping_noise_sign_mirrors_the_path_exactly(self):
        a = np.array([[1.3]])
        plus = st.simulate_ou(a, np.eye(1), [0.5], 0.01, 5.0, np.random.default_rng(7))
        minus = st.simulate_ou(a, -np.eye(1), [-0.5], 0.01, 5.0, np.random.default_rng(7))
        assert np.array_equal(plus[1], -minus[1])
        # Same second moments either way: the stationary law is sign-blind.
        assert np.array_equal(plus[1] ** 2, minus[1] ** 2)

    def test_regime_switched_drift_uses_the_chain(self):
        # Noiseless path: piecewise exponential decay, rate 1 before the
        # switch at t = 1 and rate 8 after.  The scheme is first order, so the
        # gap to the continuum value shrinks ~10x when dt shrinks 10x.
        mats = (np.array([[1.0]]), np.array([[8.0]]))
        zero = np.zeros((1, 1))
        continuum = np.exp(-1.0) * np.exp(-8.0)
        rel_errors = {}
        for dt in (1e-3, 1e-4):
            chain = st.ChainPath(
                kind="continuous", jump_times=[1.0], state_seq=[0, 1], horizon=2.0
            )
            times, path = st.simulate_ou(
                mats, zero, [1.0], dt, 2.0, np.random.default_rng(0), chain=chain
            )
            mid = path[np.searchsorted(times, 1.0), 0]
            assert mid == pytest.approx(np.exp(-1.0), abs=2e-3)
            rel_errors[dt] = abs(path[-1, 0] - continuum) / continuum
        assert rel_errors[1e-4] <= 5e-3
        assert rel_errors[1e-3] / rel_errors[1e-4] >= 8.0

    def test_same_seed_is_bitwise_reproducible(self):
        a = np.array([[1.0]])
        r1 = st.simulate_ou(a, np.eye(1), [0.0], 0.01, 3.0, np.random.default_rng(2))
        r2 = st.simulate_ou(a, np.eye(1), [0.0], 0.01, 3.0, np.random.default_rng(2))
        assert np.array_equal(r1[1], r2[1])
