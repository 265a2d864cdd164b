import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from mvbayes.bayes_filter import (
    filter_series,
    init_filter,
    point_model,
    predict,
    regressors,
    update,
)
from mvbayes.errors import DegenerateFilterError
from mvbayes.returns_model import ArModel, VarModel, fit_ols, simulate_path


def batch_posterior(m0, C0, X, y, s2):
    """Known-variance conjugate regression posterior, computed in one shot."""
    P0 = np.linalg.inv(C0)
    Cn = np.linalg.inv(P0 + X.T @ X / s2)
    mn = Cn @ (P0 @ m0 + X.T @ y / s2)
    return mn, Cn


def design(lags, y, p):
    hist = np.r_[lags, y]
    return np.array([[1.0] + [hist[p + t - i] for i in range(1, p + 1)] for t in range(len(y))])


class TestPredict:
    def test_scalar_moments(self):
        m = ArModel(0.01, (0.3, -0.1), 0.2)
        C0 = np.diag([1e-3, 2e-3, 3e-3])
        s = init_filter(m, C0, [0.5, -0.4])
        z = np.array([1.0, -0.4, 0.5])
        assert_array_equal(regressors(s), z)
        pred = predict(s)
        assert pred.f == pytest.approx(z @ m.theta)
        assert pred.Q == pytest.approx(z @ C0 @ z + 0.2)

    def test_vector_moments(self, var2_model, rng):
        k = var2_model.k
        A = rng.standard_normal((2 * k, 2 * k))
        C0 = A @ A.T * 1e-3
        lags = rng.standard_normal((2, 2)) * 0.01
        s = init_filter(var2_model, C0, lags)
        z = regressors(s)
        F = np.kron(np.eye(2), z[:, None])
        pred = predict(s)
        assert_allclose(pred.f, F.T @ var2_model.theta, rtol=1e-13)
        assert_allclose(pred.Q, F.T @ C0 @ F + var2_model.Sigma, rtol=1e-12)


class TestUpdate:
    def test_matches_batch_posterior_ar2(self):
        true = ArModel(0.01, (0.4, -0.25), 0.05)
        y = simulate_path(true, 200, 17)
        lags = np.array([0.02, -0.01])
        m0 = np.array([0.0, 0.1, 0.0])
        C0 = np.diag([0.1, 0.5, 0.5])
        s = init_filter(ArModel(0.0, (0.1, 0.0), 0.05), C0, lags)
        final, _, _ = filter_series(s, y)
        mb, Cb = batch_posterior(m0, C0, design(lags, y, 2), y, 0.05)
        assert_allclose(final.m, mb, atol=1e-10)
        assert_allclose(final.C, Cb, atol=1e-12)

    def test_vector_matches_batch_posterior(self, var2_model):
        y = simulate_path(var2_model, 150, 3)
        model, C0 = fit_ols(y[:100], 2)
        s = init_filter(model, C0, y[98:100])
        final, _, _ = filter_series(s, y[100:])
        # batch: stacked observations r_t = (I kron Z_t') vec(Pi) + noise
        Sigma_inv = np.linalg.inv(model.Sigma)
        P = np.linalg.inv(C0)
        b = P @ model.theta
        hist = y[98:]
        for t in range(50):
            z = np.r_[1.0, hist[t + 1], hist[t]]
            F = np.kron(np.eye(2), z[:, None])
            P = P + F @ Sigma_inv @ F.T
            b = b + F @ Sigma_inv @ hist[t + 2]
        Cb = np.linalg.inv(P)
        assert_allclose(final.m, Cb @ b, rtol=1e-7, atol=1e-10)
        assert_allclose(final.C, Cb, rtol=1e-6, atol=1e-14)

    def test_zero_prior_covariance_does_not_learn(self, index_model):
        s = init_filter(index_model, np.zeros((2, 2)), [0.01])
        final, preds, _ = filter_series(s, [0.05, -0.02, 0.03])
        assert_array_equal(final.m, index_model.theta)
        assert preds[0].Q == index_model.sigma2

    def test_degenerate_predictive_raises(self):
        m = ArModel(0.0, (0.2,), 0.0)
        s = init_filter(m, np.zeros((2, 2)), [0.0])
        with pytest.raises(DegenerateFilterError):
            update(s, 0.1)

    def test_vector_degenerate_predictive_raises(self):
        m = VarModel(np.zeros(2), (np.eye(2) * 0.1,), np.zeros((2, 2)))
        s = init_filter(m, np.zeros((6, 6)), np.zeros((1, 2)))
        with pytest.raises(DegenerateFilterError):
            update(s, [0.1, 0.2])

    def test_lag_buffer_advances(self, index_model):
        s = init_filter(ArModel(0.0, (0.1, 0.1), 1.0), np.eye(3), [1.0, 2.0])
        s = update(s, 3.0)
        assert_array_equal(s.lag_buffer, [2.0, 3.0])
        assert s.t == 1

    def test_posterior_variance_shrinks(self, index_model):
        s = init_filter(index_model, np.eye(2) * 1e-3, [0.0])
        y = simulate_path(index_model, 30, 2)
        final, _, _ = filter_series(s, y)
        assert np.trace(final.C) < np.trace(s.C)


class TestInit:
    def test_shape_checked(self, index_model):
        with pytest.raises(ValueError, match="2x2"):
            init_filter(index_model, np.eye(3), [0.0])

    def test_asymmetric_rejected(self, index_model):
        with pytest.raises(ValueError, match="symmetric"):
            init_filter(index_model, np.array([[1.0, 0.5], [0.0, 1.0]]), [0.0])

    def test_indefinite_rejected(self, index_model):
        with pytest.raises(ValueError, match="semidefinite"):
            init_filter(index_model, np.array([[1.0, 2.0], [2.0, 1.0]]), [0.0])

    def test_empty_series(self, index_model):
        with pytest.raises(ValueError, match="empty"):
            filter_series(init_filter(index_model, np.eye(2), [0.0]), [])

    def test_point_model_roundtrip(self, index_model):
        s = init_filter(index_model, np.eye(2) * 1e-4, [0.0])
        m = point_model(s)
        assert m.mu == pytest.approx(index_model.mu, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    scale=st.floats(1e-8, 1e3),
    noise=st.floats(1e-6, 10.0),
)
def test_posterior_stays_psd_and_symmetric(seed, scale, noise):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((3, 3))
    C0 = (A @ A.T + 1e-9 * np.eye(3)) * scale
    C0 = 0.5 * (C0 + C0.T)
    s = init_filter(ArModel(0.0, (0.2, 0.1), noise), C0, rng.standard_normal(2))
    for r in rng.standard_normal(20) * 10:
        s = update(s, r)
        assert np.array_equal(s.C, s.C.T)
        assert np.linalg.eigvalsh(s.C).min() >= -1e-8 * max(1.0, scale)
