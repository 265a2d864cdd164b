"""AR(p) and VAR(p) return models.

Both models are written in deviation form

    r_t = mu + sum_i phi_i (r_{t-i} - mu) + eps_t

and, for estimation and filtering, in regression form with an explicit
intercept ``c = (I - sum_i Phi_i) mu``::

    r_t = Z_t' Pi + eps_t,    Z_t' = (1, r_{t-1}', ..., r_{t-p}')

The scalar (AR) and vector (VAR) paths are implemented separately; with
``n = 1`` they agree to rounding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from mvbayes import _core
from mvbayes.errors import EstimationError, NonStationaryWarning

__all__ = [
    "ArModel",
    "VarModel",
    "ReturnModel",
    "companion_matrix",
    "spectral_radius",
    "lag_design",
    "fit_ols",
    "aic",
    "select_order",
    "simulate_path",
    "forecast_moments",
    "model_from_params",
]

_STATIONARY_TOL = 1e-12


def companion_matrix(coefs: Sequence[np.ndarray]) -> np.ndarray:
    """Stack ``p`` lag matrices (each ``n x n``) into the ``np x np`` companion matrix."""
    coefs = [np.atleast_2d(np.asarray(a, dtype=float)) for a in coefs]
    p = len(coefs)
    n = coefs[0].shape[0]
    A = np.zeros((n * p, n * p))
    A[:n, :] = np.hstack(coefs)
    if p > 1:
        A[n:, :-n] = np.eye(n * (p - 1))
    return A


def spectral_radius(coefs: Sequence[np.ndarray]) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(coefs)))))


@dataclass(frozen=True)
class ArModel:
    """Univariate AR(p) model.

    Parameters
    ----------
    mu : float
        Unconditional mean, in per-period return units.
    phi : sequence of float
        Lag coefficients ``phi_1 .. phi_p``.
    sigma2 : float
        Innovation variance.
    flagged : bool
        Set when the model is non-stationary but was allowed through (e.g. an
        OLS estimate near the unit root).  Unflagged construction of a
        non-stationary model raises ``ValueError``.
    """

    mu: float
    phi: Tuple[float, ...]
    sigma2: float
    flagged: bool = False

    def __post_init__(self):
        phi = tuple(float(v) for v in np.atleast_1d(self.phi))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if not phi:
            raise ValueError("AR model needs at least one lag")
        if not self.sigma2 >= 0:
            raise ValueError(f"sigma2 must be non-negative, got {self.sigma2}")
        if not self.flagged and self.radius >= 1 - _STATIONARY_TOL:
            raise ValueError(
                f"non-stationary AR model (companion spectral radius {self.radius:.6g})"
            )

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def n(self) -> int:
        return 1

    @property
    def radius(self) -> float:
        return spectral_radius([np.array([[v]]) for v in self.phi])

    @property
    def stationary(self) -> bool:
        return self.radius < 1 - _STATIONARY_TOL

    @property
    def intercept(self) -> float:
        return self.mu * (1.0 - sum(self.phi))

    @property
    def theta(self) -> np.ndarray:
        """Regression-form parameters ``(c, phi_1, ..., phi_p)``."""
        return np.array((self.intercept,) + self.phi)

    @property
    def noise(self) -> float:
        return self.sigma2

    def companion(self) -> np.ndarray:
        return companion_matrix([np.array([[v]]) for v in self.phi])


@dataclass(frozen=True, eq=False)
class VarModel:
    """Vector AR(p) model with ``n`` assets.

    ``Phi`` holds the ``p`` coefficient matrices in lag order and ``Sigma`` the
    innovation covariance.  See :class:`ArModel` for ``flagged``.
    """

    mu: np.ndarray
    Phi: Tuple[np.ndarray, ...]
    Sigma: np.ndarray
    flagged: bool = False

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        n = mu.shape[0]
        Phi = tuple(np.asarray(a, dtype=float).reshape(n, n).copy() for a in self.Phi)
        Sigma = np.asarray(self.Sigma, dtype=float).reshape(n, n).copy()
        if not Phi:
            raise ValueError("VAR model needs at least one lag")
        if not np.allclose(Sigma, Sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Sigma).max())):
            raise ValueError("Sigma must be symmetric")
        if np.linalg.eigvalsh(Sigma).min() < -1e-10 * max(1.0, np.abs(Sigma).max()):
            raise ValueError("Sigma must be positive semidefinite")
        for arr in (mu, Sigma, *Phi):
            arr.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Phi", Phi)
        object.__setattr__(self, "Sigma", Sigma)
        if not self.flagged and self.radius >= 1 - _STATIONARY_TOL:
            raise ValueError(
                f"non-stationary VAR model (companion spectral radius {self.radius:.6g})"
            )

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def p(self) -> int:
        return len(self.Phi)

    @property
    def k(self) -> int:
        return self.n * self.p + 1

    @property
    def radius(self) -> float:
        return spectral_radius(self.Phi)

    @property
    def stationary(self) -> bool:
        return self.radius < 1 - _STATIONARY_TOL

    @property
    def intercept(self) -> np.ndarray:
        return (np.eye(self.n) - sum(self.Phi)) @ self.mu

    @property
    def Pi(self) -> np.ndarray:
        """``k x n`` coefficient matrix with column ``i`` the regression of asset ``i``."""
        return np.vstack([self.intercept[None, :]] + [a.T for a in self.Phi])

    @property
    def theta(self) -> np.ndarray:
        """``vec(Pi)``: the columns of ``Pi`` stacked, length ``n * k``."""
        return self.Pi.reshape(-1, order="F")

    @property
    def noise(self) -> np.ndarray:
        return self.Sigma

    def companion(self) -> np.ndarray:
        return companion_matrix(self.Phi)


ReturnModel = Union[ArModel, VarModel]


def _as_2d(returns) -> Tuple[np.ndarray, bool]:
    y = np.asarray(returns, dtype=float)
    if y.ndim == 1:
        return y[:, None], True
    if y.ndim != 2:
        raise ValueError("returns must be 1-D (single asset) or 2-D (time x assets)")
    return y, False


def lag_design(y: np.ndarray, p: int, start: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Regression design for rows ``t = start .. T-1`` (``start`` defaults to ``p``).

    Returns ``(Z, Y)`` with ``Z[row] = (1, y[t-1], ..., y[t-p])`` flattened
    asset-fastest, so ``Z`` has ``n p + 1`` columns.
    """
    y2, _ = _as_2d(y)
    start = p if start is None else start
    if start < p:
        raise ValueError("start must be at least p")
    T = y2.shape[0]
    rows = T - start
    cols = [np.ones((rows, 1))]
    for i in range(1, p + 1):
        cols.append(y2[start - i:T - i])
    return np.hstack(cols), y2[start:]


def _check_series(y2: np.ndarray, p: int) -> None:
    if p < 1:
        raise ValueError(f"lag order must be >= 1, got {p}")
    if not np.all(np.isfinite(y2)):
        raise EstimationError("series contains missing or non-finite values")


def _mu_from_intercept(c, coefs):
    coefs = [np.atleast_2d(a) for a in coefs]
    n = coefs[0].shape[0]
    M = np.eye(n) - sum(coefs)
    if abs(np.linalg.det(M)) < 1e-14:
        raise EstimationError("unit root: I - sum(Phi) is singular, mean undefined")
    return np.linalg.solve(M, np.atleast_1d(c))


def _ols(Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    if Z.shape[0] <= Z.shape[1]:
        raise EstimationError(
            f"need more than k = {Z.shape[1]} usable rows, have {Z.shape[0]}"
        )
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise EstimationError("singular design matrix (constant or collinear regressors)")
    coef, *_ = np.linalg.lstsq(Z, Y, rcond=None)
    return coef


def fit_ols(returns, p: int) -> Tuple[ReturnModel, np.ndarray]:
    """Least-squares fit of an AR(p) (1-D input) or VAR(p) (2-D input).

    Returns the model and the asymptotic covariance ``C_0`` of the
    regression-form parameters: ``s2 (X'X)^-1`` for a single series and
    ``Sigma kron (Z'Z)^-1`` (``vec(Pi)`` ordering) for several, with
    residual (co)variance normalised by ``T_eff - k``.

    A non-stationary estimate is returned with ``flagged=True`` and a
    :class:`~mvbayes.errors.NonStationaryWarning`.
    """
    y2, scalar = _as_2d(returns)
    _check_series(y2, p)
    n = y2.shape[1]
    Z, Y = lag_design(y2, p)
    T_eff, k = Z.shape
    Pi = _ols(Z, Y)
    resid = Y - Z @ Pi
    ZtZ_inv = np.linalg.inv(Z.T @ Z)
    ZtZ_inv = 0.5 * (ZtZ_inv + ZtZ_inv.T)
    coefs = [Pi[1 + j * n:1 + (j + 1) * n].T for j in range(p)]
    flagged = spectral_radius(coefs) >= 1 - _STATIONARY_TOL
    if flagged:
        warnings.warn(
            f"OLS estimate is non-stationary (spectral radius {spectral_radius(coefs):.4f})",
            NonStationaryWarning,
            stacklevel=2,
        )
    if scalar:
        e = resid[:, 0]
        s2 = float(np.sum(e * e) / (T_eff - k))
        phi = Pi[1:, 0]
        mu = float(_mu_from_intercept(Pi[0, 0], [np.array([[v]]) for v in phi])[0])
        return ArModel(mu, tuple(phi), s2, flagged=flagged), s2 * ZtZ_inv
    Sigma = resid.T @ resid / (T_eff - k)
    Sigma = 0.5 * (Sigma + Sigma.T)
    mu = _mu_from_intercept(Pi[0], coefs)
    return VarModel(mu, tuple(coefs), Sigma, flagged=flagged), np.kron(Sigma, ZtZ_inv)


def aic(returns, p: int, start: Optional[int] = None) -> float:
    """``T_eff log(SSR_i / T_eff) + 2 k``, summed over equations, on rows ``start..``."""
    y2, _ = _as_2d(returns)
    _check_series(y2, p)
    Z, Y = lag_design(y2, p, start)
    T_eff, k = Z.shape
    Pi = _ols(Z, Y)
    resid = Y - Z @ Pi
    ssr = np.sum(resid * resid, axis=0)
    if np.any(ssr <= 0):
        return -np.inf
    return float(np.sum(T_eff * np.log(ssr / T_eff) + 2 * k))


def select_order(returns, p_max: int) -> int:
    """AIC-minimising lag order in ``1..p_max`` on the common sample ``t >= p_max``.

    Ties go to the smaller order.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    y2, _ = _as_2d(returns)
    needed = p_max + y2.shape[1] * p_max + 2
    if y2.shape[0] < needed:
        raise EstimationError(
            f"series too short for p_max={p_max}: need {needed} observations, have {y2.shape[0]}"
        )
    best_p, best = 1, np.inf
    for p in range(1, p_max + 1):
        value = aic(y2, p, start=p_max)
        if value < best:
            best_p, best = p, value
    return best_p


def burn_in(p: int) -> int:
    return max(50, 10 * p)


def _sqrt_cov(S: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(S)
        return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_path(model: ReturnModel, length: int, seed: int, init=None) -> np.ndarray:
    """Simulate ``length`` returns with Gaussian innovations.

    ``init`` holds the ``p`` starting lags oldest-to-newest (shape ``(p,)`` or
    ``(p, n)``).  Without it the lags start at ``mu`` and a burn-in of
    ``max(50, 10 p)`` steps is discarded.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    p = model.p
    burn = 0 if init is not None else burn_in(p)
    total = burn + length
    if isinstance(model, ArModel):
        lags = np.full(p, model.mu) if init is None else np.asarray(init, dtype=float).reshape(p)
        eps = np.sqrt(model.sigma2) * rng.standard_normal(total)
        path = _core.ar_recursion(model.mu, np.asarray(model.phi), eps, lags)
        return path[burn:]
    n = model.n
    lags = np.tile(model.mu, (p, 1)) if init is None else np.asarray(init, dtype=float).reshape(p, n)
    eps = rng.standard_normal((total, n)) @ _sqrt_cov(model.Sigma).T
    out = np.empty((total, n))
    dev = list(lags - model.mu)
    for t in range(total):
        r = model.mu.copy()
        for j in range(p):
            r = r + model.Phi[j] @ dev[-1 - j]
        r = r + eps[t]
        out[t] = r
        dev.append(r - model.mu)
        dev.pop(0)
    return out[burn:]


def forecast_moments(model: ReturnModel, lags, horizon: int) -> Tuple[np.ndarray, np.ndarray]:
    """Conditional mean and (co)variance of the next ``horizon`` returns.

    ``lags`` holds the ``p`` most recent returns oldest-to-newest.  The mean
    follows the model recursion; the variance is propagated through the
    companion form, ``V_1 = Sigma``, ``V_k = A V_{k-1} A' + Sigma_c``, and the
    marginal block is returned for each step.  Parameters are held fixed.

    Returns arrays of shape ``(H,)`` and ``(H,)`` for an AR model and
    ``(H, n)`` and ``(H, n, n)`` for a VAR model.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p, n = model.p, model.n
    A = model.companion()
    Sc = np.zeros((n * p, n * p))
    Sc[:n, :n] = model.noise
    if isinstance(model, ArModel):
        dev = list(np.asarray(lags, dtype=float).reshape(p) - model.mu)
        means = np.empty(horizon)
        var = np.empty(horizon)
        V = Sc
        for h in range(horizon):
            m = model.mu
            for i in range(p):
                m = m + model.phi[i] * dev[-1 - i]
            means[h] = m
            dev.append(m - model.mu)
            var[h] = V[0, 0]
            V = A @ V @ A.T + Sc
        return means, var
    dev = list(np.asarray(lags, dtype=float).reshape(p, n) - model.mu)
    means = np.empty((horizon, n))
    cov = np.empty((horizon, n, n))
    V = Sc
    for h in range(horizon):
        m = model.mu.copy()
        for j in range(p):
            m = m + model.Phi[j] @ dev[-1 - j]
        means[h] = m
        dev.append(m - model.mu)
        cov[h] = V[:n, :n]
        V = A @ V @ A.T + Sc
    return means, cov


def model_from_params(theta, noise, p: int, vector: bool = False) -> ReturnModel:
    """Rebuild a model from regression-form parameters.

    ``theta`` is ``(c, phi_1..phi_p)`` for an AR model or ``vec(Pi)`` for a VAR
    model.  Non-stationary parameter values yield a flagged model.
    """
    theta = np.asarray(theta, dtype=float)
    if not vector:
        phi = theta[1:]
        coefs = [np.array([[v]]) for v in phi]
        mu = float(_mu_from_intercept(theta[0], coefs)[0])
        flagged = spectral_radius(coefs) >= 1 - _STATIONARY_TOL
        return ArModel(mu, tuple(phi), float(noise), flagged=flagged)
    Sigma = np.atleast_2d(np.asarray(noise, dtype=float))
    n = Sigma.shape[0]
    k = n * p + 1
    Pi = theta.reshape((k, n), order="F")
    coefs = [Pi[1 + j * n:1 + (j + 1) * n].T for j in range(p)]
    mu = _mu_from_intercept(Pi[0], coefs)
    flagged = spectral_radius(coefs) >= 1 - _STATIONARY_TOL
    return VarModel(mu, tuple(coefs), Sigma, flagged=flagged)
