"""Regressor/noise model: moments, truncation, observation arithmetic."""

from __future__ import annotations

import numpy as np
import pytest

import signtrack as st
from signtrack.signals import KIND_GAUSSIAN, KIND_TRUNCATED, draw_block


class TestDistSpecValidation:
    def test_unknown_kind_rejected(self):
        with pytest.raises(st.ConfigError):
            st.DistSpec("uniform", np.eye(1))

    def test_non_symmetric_covariance_rejected(self):
        with pytest.raises(st.ConfigError):
            st.DistSpec(KIND_GAUSSIAN, [[1.0, 0.5], [0.2, 1.0]])

    def test_non_positive_definite_covariance_rejected(self):
        with pytest.raises(st.ConfigError):
            st.DistSpec(KIND_GAUSSIAN, [[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(st.ConfigError):
            st.DistSpec(KIND_GAUSSIAN, [[0.0]])

    def test_zero_clip_bound_rejected(self):
        with pytest.raises(st.ConfigError):
            st.DistSpec(KIND_TRUNCATED, np.eye(1), clip=0.0)

    def test_clip_on_plain_gaussian_rejected(self):
        with pytest.raises(st.ConfigError):
            st.DistSpec(KIND_GAUSSIAN, np.eye(1), clip=2.0)

    def test_truncated_requires_clip(self):
        with pytest.raises(st.ConfigError):
            st.DistSpec(KIND_TRUNCATED, np.eye(1))

    def test_covariance_stored_read_only(self):
        spec = st.DistSpec(KIND_GAUSSIAN, np.eye(2))
        with pytest.raises(ValueError):
            spec.cov[0, 0] = 3.0

    def test_noise_must_be_scalar(self):
        with pytest.raises(st.ConfigError):
            st.SignalModel(
                regressor=st.DistSpec(KIND_GAUSSIAN, np.eye(1)),
                noise=st.DistSpec(KIND_GAUSSIAN, np.eye(2)),
            )


class TestSampleMoments:
    def test_unit_regressor_and_quarter_noise_moments(self):
        model = st.gaussian_signal_model(np.eye(1), 0.25)
        rng = np.random.default_rng(100)
        phi = draw_block(model.regressor, 10**6, rng)[:, 0]
        e = draw_block(model.noise, 10**6, rng)[:, 0]
        assert abs(phi.mean()) <= 0.01 and abs(e.mean()) <= 0.01
        assert abs(phi.var() - 1.0) <= 0.02
        assert abs(e.var() - 0.25) <= 0.02 * 0.25

    def test_correlated_regressor_covariance_recovered(self):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        spec = st.DistSpec(KIND_GAUSSIAN, cov)
        x = draw_block(spec, 4 * 10**5, np.random.default_rng(8))
        emp = x.T @ x / x.shape[0]
        assert np.max(np.abs(emp - cov)) <= 0.02 * np.max(np.abs(cov)) + 0.01

    def test_lagged_autocorrelation_vanishes(self):
        spec = st.DistSpec(KIND_GAUSSIAN, np.eye(1))
        x = draw_block(spec, 10**6, np.random.default_rng(77))[:, 0]
        n = x.size
        for lag in (1, 2, 5):
            rho = (x[:-lag] * x[lag:]).mean() / x.var()
            assert abs(rho) <= 4.0 / np.sqrt(n - lag)


class TestTruncation:
    def test_every_sample_inside_clip_box(self):
        spec = st.DistSpec(KIND_TRUNCATED, np.eye(2), clip=5.0)
        x = draw_block(spec, 10**4, np.random.default_rng(4))
        assert np.all(np.abs(x) <= 5.0)

    def test_tight_clip_still_terminates_and_respects_bound(self):
        spec = st.DistSpec(KIND_TRUNCATED, np.eye(1), clip=0.3)
        x = draw_block(spec, 2000, np.random.default_rng(5))
        assert np.all(np.abs(x) <= 0.3)

    def test_truncation_preserves_symmetry(self):
        spec = st.DistSpec(KIND_TRUNCATED, np.eye(1), clip=1.0)
        x = draw_block(spec, 4 * 10**5, np.random.default_rng(6))[:, 0]
        assert abs(x.mean()) <= 4.0 * x.std() / np.sqrt(x.size)

    def test_redraws_are_deterministic_given_the_stream(self):
        spec = st.DistSpec(KIND_TRUNCATED, np.eye(3), clip=0.8)
        a = draw_block(spec, 500, np.random.default_rng(9))
        b = draw_block(spec, 500, np.random.default_rng(9))
        assert np.array_equal(a, b)


class TestObserve:
    def test_inner_product_plus_noise(self):
        assert st.observe([1.0, 0.0], [2.0, 3.0], 0.5) == 2.5

    def test_orthogonal_regressor_noiseless_gives_zero(self):
        assert st.observe([1.0, 0.0], [0.0, 7.0], 0.0) == 0.0

    def test_zero_regressor_returns_noise(self):
        assert st.observe([0.0, 0.0], [4.0, -2.0], 1.25) == 1.25

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(st.DimensionMismatch):
            st.observe([1.0], [1.0, 2.0], 0.0)


class TestSampleSignal:
    def test_shapes_and_types(self):
        model = st.gaussian_signal_model(np.eye(2), 0.25)
        phi, e = st.sample_signal(model, np.random.default_rng(1))
        assert phi.shape == (2,)
        assert isinstance(e, float)

    def test_seeded_determinism(self):
        model = st.gaussian_signal_model(np.eye(2), 1.0)
        a = st.sample_signal(model, np.random.default_rng(3))
        b = st.sample_signal(model, np.random.default_rng(3))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_convenience_constructor_matches_manual_assembly(self):
        model = st.gaussian_signal_model([[2.0]], 0.25)
        assert model.dim == 1
        assert model.noise_std == 0.5
        assert np.array_equal(model.regressor.cov, [[2.0]])
