"""Sequential conjugate updating of AR/VAR regression parameters.

The regression parameters are treated as static (``G = I``, ``W = 0``) and
the observation noise is held at its initial estimate, so each step is the
known-variance Gaussian linear-regression update:

    f_t = F_t' m_{t-1}                  Q_t = F_t' C_{t-1} F_t + noise
    A_t = C_{t-1} F_t Q_t^{-1}
    m_t = m_{t-1} + A_t (r_t - f_t)     C_t = C_{t-1} - A_t Q_t A_t'

For ``n`` assets ``F_t = I_n kron Z_t`` acting on ``vec(Pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Tuple, Union

import numpy as np

from mvbayes.errors import DegenerateFilterError
from mvbayes.returns_model import ArModel, ReturnModel, VarModel, model_from_params

__all__ = [
    "FilterState",
    "Predictive",
    "init_filter",
    "regressors",
    "predict",
    "update",
    "filter_series",
    "point_model",
]

PSD_TOL = 1e-10


def _clamp_psd(C: np.ndarray, what: str) -> np.ndarray:
    C = 0.5 * (C + C.T)
    if C.size == 0:
        return C
    w, V = np.linalg.eigh(C)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -PSD_TOL * scale:
        raise ValueError(f"{what} is not positive semidefinite (min eigenvalue {w.min():.3e})")
    if w.min() < 0:
        C = (V * np.clip(w, 0.0, None)) @ V.T
        C = 0.5 * (C + C.T)
    return C


@dataclass(frozen=True, eq=False)
class FilterState:
    """Posterior ``N(m, C)`` over the regression parameters plus the lag buffer.

    ``lag_buffer`` holds the ``p`` most recent returns oldest-to-newest, shape
    ``(p,)`` for one asset and ``(p, n)`` for several.  ``vector`` marks the
    VAR parameterisation (``m`` is ``vec(Pi)``), which also covers ``n = 1``.
    """

    m: np.ndarray
    C: np.ndarray
    noise: Union[float, np.ndarray]
    lag_buffer: np.ndarray
    t: int = 0
    vector: bool = False

    @property
    def p(self) -> int:
        return self.lag_buffer.shape[0]

    @property
    def n(self) -> int:
        return self.lag_buffer.shape[1] if self.vector else 1

    @property
    def k(self) -> int:
        return self.n * self.p + 1


@dataclass(frozen=True)
class Predictive:
    """One-step-ahead predictive ``N(f, Q)``."""

    f: Union[float, np.ndarray]
    Q: Union[float, np.ndarray]


def init_filter(model: ReturnModel, C0, lags) -> FilterState:
    """Start a filter at the model's regression parameters with prior covariance ``C0``."""
    m0 = model.theta.astype(float)
    C0 = np.atleast_2d(np.asarray(C0, dtype=float))
    d = m0.shape[0]
    if C0.shape != (d, d):
        raise ValueError(f"C0 must be {d}x{d}, got {C0.shape}")
    if not np.allclose(C0, C0.T, rtol=0, atol=1e-12 * max(1.0, np.abs(C0).max())):
        raise ValueError("C0 must be symmetric")
    C0 = _clamp_psd(C0, "C0")
    if isinstance(model, VarModel):
        lags = np.asarray(lags, dtype=float).reshape(model.p, model.n)
        noise = np.array(model.Sigma)
        vector = True
    else:
        lags = np.asarray(lags, dtype=float).reshape(model.p)
        noise = model.sigma2
        vector = False
    return FilterState(m0, C0, noise, lags.copy(), 0, vector)


def regressors(state: FilterState) -> np.ndarray:
    """``Z_t = (1, r_{t-1}, ..., r_{t-p})`` built from the lag buffer."""
    return np.concatenate(([1.0], state.lag_buffer[::-1].ravel()))


def predict(state: FilterState) -> Predictive:
    z = regressors(state)
    if not state.vector:
        f = float(z @ state.m)
        Q = float(z @ state.C @ z + state.noise)
        return Predictive(f, Q)
    n, k = state.n, state.k
    # (I_n kron Z') vec(Pi) = Pi' Z
    f = state.m.reshape((k, n), order="F").T @ z
    C4 = state.C.reshape(n, k, n, k)
    Q = np.einsum("a,iajb,b->ij", z, C4, z) + state.noise
    return Predictive(f, 0.5 * (Q + Q.T))


def update(state: FilterState, observed) -> FilterState:
    """Condition on the next observation and advance the lag buffer."""
    z = regressors(state)
    pred = predict(state)
    if not state.vector:
        r = float(observed)
        if not pred.Q > 0:
            raise DegenerateFilterError(
                "predictive variance is zero: both the prior covariance and the noise are degenerate"
            )
        A = state.C @ z / pred.Q
        m = state.m + A * (r - pred.f)
        C = state.C - np.outer(A, A) * pred.Q
        buf = np.append(state.lag_buffer[1:], r)
    else:
        n, k = state.n, state.k
        r = np.asarray(observed, dtype=float).reshape(n)
        F = np.kron(np.eye(n), z[:, None])  # nk x n
        CF = state.C @ F
        try:
            Qinv_t = np.linalg.solve(pred.Q, CF.T)  # Q^{-1} (C F)'
        except np.linalg.LinAlgError:
            raise DegenerateFilterError(
                "predictive covariance is singular: prior covariance and noise are both degenerate"
            ) from None
        if np.linalg.cond(pred.Q) > 1e14:
            raise DegenerateFilterError("predictive covariance is numerically singular")
        A = Qinv_t.T
        m = state.m + A @ (r - pred.f)
        C = state.C - A @ pred.Q @ A.T
        buf = np.vstack([state.lag_buffer[1:], r[None, :]])
    C = _clamp_psd(C, "posterior covariance")
    return replace(state, m=m, C=C, lag_buffer=buf, t=state.t + 1)


def filter_series(state: FilterState, series) -> Tuple[FilterState, List[Predictive], np.ndarray]:
    """Alternate predict/update over ``series``.

    The ``k``-th predictive is formed before the ``k``-th value is seen.
    Returns the final state, the predictives and the posterior mean after
    each step (one row per observation).
    """
    series = np.asarray(series, dtype=float)
    if series.shape[0] == 0:
        raise ValueError("series is empty")
    preds: List[Predictive] = []
    means = np.empty((series.shape[0], state.m.shape[0]))
    for i, obs in enumerate(series):
        preds.append(predict(state))
        state = update(state, obs)
        means[i] = state.m
    return state, preds, means


def point_model(state: FilterState) -> ReturnModel:
    """Return model at the posterior mean (flagged if non-stationary)."""
    return model_from_params(state.m, state.noise, state.p, vector=state.vector)
