import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from mvbayes.errors import EstimationError, NonStationaryWarning
from mvbayes.returns_model import (
    ArModel,
    VarModel,
    burn_in,
    companion_matrix,
    fit_ols,
    forecast_moments,
    lag_design,
    model_from_params,
    select_order,
    simulate_path,
    spectral_radius,
)


def _ols_oracle(y, p):
    """Least squares by explicit normal equations on a hand-built design."""
    T = len(y)
    X = np.array([[1.0] + [y[t - i] for i in range(1, p + 1)] for t in range(p, T)])
    Y = np.asarray(y[p:])
    XtX = X.T @ X
    beta = np.linalg.solve(XtX, X.T @ Y)
    resid = Y - X @ beta
    s2 = resid @ resid / (len(Y) - X.shape[1])
    return beta, s2, s2 * np.linalg.inv(XtX)


class TestModels:
    def test_companion_ar2(self):
        A = companion_matrix([np.array([[0.5]]), np.array([[-0.2]])])
        assert_array_equal(A, [[0.5, -0.2], [1.0, 0.0]])

    def test_spectral_radius_ar1(self):
        assert spectral_radius([np.array([[-0.7]])]) == pytest.approx(0.7)

    def test_nonstationary_ar_rejected_unless_flagged(self):
        with pytest.raises(ValueError, match="non-stationary"):
            ArModel(0.0, (1.02,), 1.0)
        m = ArModel(0.0, (1.02,), 1.0, flagged=True)
        assert not m.stationary

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            ArModel(0.0, (0.1,), -1.0)

    def test_ar_regression_form(self, index_model):
        c, phi = index_model.theta
        assert c == pytest.approx(index_model.mu * (1 - phi))
        assert phi == index_model.phi[0]

    def test_var_pi_layout(self, var2_model):
        Pi = var2_model.Pi
        assert Pi.shape == (5, 2)
        assert_allclose(Pi[1:3].T, var2_model.Phi[0])
        assert_allclose(Pi[3:5].T, var2_model.Phi[1])
        assert_allclose(var2_model.theta, Pi.ravel(order="F"))

    def test_var_arrays_read_only(self, var2_model):
        with pytest.raises(ValueError):
            var2_model.Sigma[0, 0] = 1.0

    def test_var_sigma_must_be_psd(self):
        with pytest.raises(ValueError, match="semidefinite"):
            VarModel(np.zeros(2), (np.eye(2) * 0.1,), np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestEstimation:
    def test_ar_matches_normal_equations(self, rng):
        y = simulate_path(ArModel(0.01, (0.4, -0.2), 0.04), 300, 5)
        model, C0 = fit_ols(y, 2)
        beta, s2, C = _ols_oracle(y, 2)
        assert_allclose(model.theta, beta, rtol=1e-10, atol=1e-13)
        assert model.sigma2 == pytest.approx(s2, rel=1e-10)
        assert_allclose(C0, C, rtol=1e-9)

    def test_var_against_statsmodels(self, var2_model):
        sm_var = pytest.importorskip("statsmodels.tsa.api")
        y = simulate_path(var2_model, 400, 11)
        model, C0 = fit_ols(y, 2)
        res = sm_var.VAR(y).fit(2, trend="c")
        assert_allclose(model.Pi, res.params, rtol=1e-8, atol=1e-12)
        assert_allclose(model.Sigma, res.sigma_u, rtol=1e-8)
        # statsmodels orders parameters as vec(Pi'); permute to vec(Pi)
        k, n = model.Pi.shape
        perm = [r * n + e for e in range(n) for r in range(k)]
        ref = np.asarray(res.cov_params())[np.ix_(perm, perm)]
        assert_allclose(C0, ref, rtol=1e-7)

    def test_var_one_asset_equals_ar(self):
        y = simulate_path(ArModel(0.002, (0.3,), 1e-3), 200, 3)
        ar, Cs = fit_ols(y, 1)
        var, Cv = fit_ols(y[:, None], 1)
        assert_allclose(var.theta, ar.theta, rtol=0, atol=1e-14)
        assert_allclose(Cv, Cs, rtol=1e-13)
        assert var.Sigma[0, 0] == pytest.approx(ar.sigma2, rel=1e-14)

    def test_short_series_raises(self):
        with pytest.raises(EstimationError):
            fit_ols(np.array([0.1, 0.2, 0.3]), 2)

    def test_constant_series_is_singular(self):
        with pytest.raises(EstimationError, match="singular"):
            fit_ols(np.ones(50), 1)

    def test_missing_values_raise(self):
        y = np.r_[np.linspace(0, 1, 20), np.nan]
        with pytest.raises(EstimationError, match="non-finite"):
            fit_ols(y, 1)

    def test_nonstationary_estimate_flagged(self, rng):
        y = np.empty(200)
        y[0] = 1.0
        for t in range(1, 200):
            y[t] = 1.03 * y[t - 1] + rng.standard_normal()
        with pytest.warns(NonStationaryWarning):
            model, _ = fit_ols(y, 1)
        assert model.flagged

    def test_select_order_recovers_ar2(self):
        y = simulate_path(ArModel(0.0, (0.5, -0.4), 1.0), 3000, 1)
        assert select_order(y, 5) == 2

    def test_select_order_common_sample(self):
        y = simulate_path(ArModel(0.0, (0.3,), 1.0), 400, 2)
        Z1, _ = lag_design(y, 1, start=4)
        Z4, _ = lag_design(y, 4, start=4)
        assert Z1.shape[0] == Z4.shape[0] == len(y) - 4
        assert select_order(y, 4) in (1, 2, 3, 4)


class TestForecasts:
    def test_white_noise_forecasts(self):
        m = ArModel(0.01, (0.0,), 0.2)
        means, var = forecast_moments(m, [0.7], 5)
        assert_allclose(means, 0.01)
        assert_allclose(var, 0.2)

    @pytest.mark.parametrize("phi", [-0.9, -0.13366, 0.5])
    def test_ar1_closed_form(self, phi):
        m = ArModel(0.002, (phi,), 0.00085)
        k = np.arange(1, 11)
        means, var = forecast_moments(m, [0.03], 10)
        assert_allclose(means, 0.002 + phi**k * (0.03 - 0.002), rtol=1e-12)
        assert_allclose(var, 0.00085 * (1 - phi ** (2 * k)) / (1 - phi**2), rtol=1e-12)

    def test_var_forecast_against_iterated_simulation_mean(self, var2_model):
        lags = np.array([[0.01, -0.02], [0.03, 0.0]])
        means, cov = forecast_moments(var2_model, lags, 3)
        dev = [lags[0] - var2_model.mu, lags[1] - var2_model.mu]
        m1 = var2_model.mu + var2_model.Phi[0] @ dev[1] + var2_model.Phi[1] @ dev[0]
        assert_allclose(means[0], m1)
        assert_allclose(cov[0], var2_model.Sigma)
        P1 = var2_model.Phi[0]
        assert_allclose(cov[1], var2_model.Sigma + P1 @ var2_model.Sigma @ P1.T, rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        phi1=st.floats(-0.6, 0.6),
        phi2=st.floats(-0.35, 0.35),
        s2=st.floats(1e-4, 1.0),
    )
    def test_variance_nondecreasing_and_converges(self, phi1, phi2, s2):
        m = ArModel(0.0, (phi1, phi2), s2)
        _, var = forecast_moments(m, [0.0, 0.0], 200)
        assert np.all(np.diff(var) >= -1e-12 * s2)
        A = m.companion()
        # unconditional variance from the discrete Lyapunov equation
        Sc = np.zeros((2, 2))
        Sc[0, 0] = s2
        V = np.linalg.solve(np.eye(4) - np.kron(A, A), Sc.ravel()).reshape(2, 2)
        assert var[-1] == pytest.approx(V[0, 0], rel=1e-6)


class TestSimulation:
    def test_deterministic(self, index_model):
        assert_array_equal(simulate_path(index_model, 50, 9), simulate_path(index_model, 50, 9))

    def test_burn_in(self):
        assert burn_in(1) == 50
        assert burn_in(7) == 70

    def test_explicit_init_skips_burn_in(self):
        m = ArModel(0.0, (0.5,), 1.0)
        rng = np.random.default_rng(3)
        eps = rng.standard_normal(4)
        path = simulate_path(m, 4, 3, init=[2.0])
        expected, prev = [], 2.0
        for e in eps:
            prev = 0.5 * prev + e
            expected.append(prev)
        assert_allclose(path, expected, rtol=1e-14)

    def test_long_run_moments(self):
        m = ArModel(0.01, (0.6,), 0.04)
        y = simulate_path(m, 200_000, 1)
        assert y.mean() == pytest.approx(0.01, abs=0.003)
        assert y.var() == pytest.approx(0.04 / (1 - 0.36), rel=0.02)
        assert np.corrcoef(y[1:], y[:-1])[0, 1] == pytest.approx(0.6, abs=0.01)

    def test_var_path_shape(self, var2_model):
        y = simulate_path(var2_model, 30, 4)
        assert y.shape == (30, 2)


class TestParamRoundTrip:
    def test_ar(self, index_model):
        m = model_from_params(index_model.theta, index_model.sigma2, 1)
        assert m.mu == pytest.approx(index_model.mu, rel=1e-14)
        assert m.phi == index_model.phi

    def test_var(self, var2_model):
        m = model_from_params(var2_model.theta, var2_model.Sigma, 2, vector=True)
        assert_allclose(m.mu, var2_model.mu, rtol=1e-13)
        for a, b in zip(m.Phi, var2_model.Phi):
            assert_allclose(a, b)

    def test_nonstationary_params_flagged(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            m = model_from_params([0.0, 1.3], 1.0, 1)
        assert m.flagged
