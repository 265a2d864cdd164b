"""Multi-period mean-variance portfolio selection with an uncertain exit time.

The investor holds a riskless asset (gross return ``r0_t``) and one or more
risky assets with excess returns ``e_t``.  Wealth evolves as

    x_{t+1} = r0_t x_t + e_t' u_t,         t = 0, ..., T-1

and the investor leaves the market at ``min(T, tau)`` with
``P(min(T, tau) = t) = p_t``, independent of returns.  The objective is
``E(x) - omega Var(x)`` at the exit date, solved through the quadratic
auxiliary problem ``max E(lambda x - omega x^2)`` and the embedding
condition ``lambda* = 1 + 2 omega E(x)``.

Naming: ``risk_aversion`` is the objective weight ``omega``; ``dp_omega`` and
``dp_lambda`` are the backward-recursion coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from mvbayes import _core
from mvbayes.bayes_filter import FilterState, Predictive, predict
from mvbayes.errors import InfeasibleError
from mvbayes.returns_model import ArModel, ReturnModel, VarModel, forecast_moments, simulate_path

__all__ = [
    "ExitDistribution",
    "ExcessMoments",
    "DpCoefficients",
    "Policy",
    "FrontierPoint",
    "AuxiliaryValue",
    "WealthSample",
    "excess_moments",
    "moments_from_forecast",
    "planning_moments",
    "dp_coefficients",
    "lambda_star",
    "expected_terminal_wealth",
    "optimal_policy",
    "auxiliary_policy",
    "auxiliary_value",
    "min_variance_point",
    "frontier",
    "frontier_variance",
    "frontier_expectation",
    "simulate_policy",
]

_PROB_TOL = 1e-12
CHUNK = 10_000


@dataclass(frozen=True, eq=False)
class ExitDistribution:
    """Exit-time mass ``p_1..p_T`` over the periods of the horizon."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).ravel().copy()
        if probs.size == 0:
            raise ValueError("exit distribution is empty")
        if np.any(probs < 0):
            raise ValueError("exit probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > _PROB_TOL:
            raise ValueError(f"exit probabilities sum to {probs.sum():.15g}, not 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)

    @property
    def T(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def certain(cls, T: int) -> "ExitDistribution":
        probs = np.zeros(T)
        probs[-1] = 1.0
        return cls(probs)

    @classmethod
    def uniform_tail(cls, T: int, mass: float) -> "ExitDistribution":
        """``mass`` at each of ``t = 1..T-1`` and the remainder at ``T``."""
        probs = np.full(T, float(mass))
        probs[-1] = 1.0 - mass * (T - 1)
        return cls(probs)

    @classmethod
    def from_pairs(cls, pairs, T: Optional[int] = None) -> "ExitDistribution":
        """Build from ``{t: p_t}``; unspecified periods get zero mass."""
        pairs = dict(pairs)
        T = T or max(pairs)
        probs = np.zeros(T)
        for t, p in pairs.items():
            if not 1 <= t <= T:
                raise ValueError(f"exit time {t} outside 1..{T}")
            probs[t - 1] = p
        return cls(probs)


@dataclass(frozen=True, eq=False)
class ExcessMoments:
    """Per-period excess-return moments for ``t = 0..T-1``.

    ``mean_e`` is ``(T,)`` or ``(T, n)``, ``second_e`` is ``(T,)`` or
    ``(T, n, n)`` and ``r0`` holds the gross riskless returns.
    """

    mean_e: np.ndarray
    second_e: np.ndarray
    r0: np.ndarray

    def __post_init__(self):
        mean_e = np.asarray(self.mean_e, dtype=float)
        second_e = np.asarray(self.second_e, dtype=float)
        T = mean_e.shape[0]
        r0 = np.broadcast_to(np.asarray(self.r0, dtype=float), (T,)).copy()
        if second_e.shape[0] != T:
            raise ValueError("mean_e and second_e have different horizons")
        if mean_e.ndim == 2 and second_e.shape != (T, mean_e.shape[1], mean_e.shape[1]):
            raise ValueError("second_e must be (T, n, n) for vector mean_e")
        object.__setattr__(self, "mean_e", mean_e)
        object.__setattr__(self, "second_e", second_e)
        object.__setattr__(self, "r0", r0)

    @property
    def T(self) -> int:
        return self.mean_e.shape[0]

    @property
    def vector(self) -> bool:
        return self.mean_e.ndim == 2

    @property
    def covariance(self) -> np.ndarray:
        """``second_e - mean_e mean_e'``, i.e. the predictive (co)variance."""
        if self.vector:
            return self.second_e - np.einsum("ti,tj->tij", self.mean_e, self.mean_e)
        return self.second_e - self.mean_e**2


@dataclass(frozen=True, eq=False)
class DpCoefficients:
    """Backward-recursion output.

    ``dp_omega`` and ``dp_lambda`` have length ``T + 1`` (index ``t``),
    ``theta[t]`` is the period-``t`` gain and ``Theta`` their sum.
    """

    dp_omega: np.ndarray
    dp_lambda: np.ndarray
    theta: np.ndarray
    Theta: float
    probs: np.ndarray
    r0: np.ndarray

    @property
    def T(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True, eq=False)
class Policy:
    """Affine feedback rule ``u_t = a_t - b_t r0_t x_t``."""

    a: np.ndarray
    b: np.ndarray
    r0: np.ndarray
    risk_aversion: float
    x0: float

    @property
    def T(self) -> int:
        return self.a.shape[0]

    def control(self, t: int, x):
        """Risky allocation at period ``t`` for wealth ``x`` (scalar or array of paths)."""
        x = np.asarray(x, dtype=float)
        if self.a.ndim == 1:
            return self.a[t] - self.b[t] * self.r0[t] * x
        return self.a[t] - np.multiply.outer(self.r0[t] * x, self.b[t])


@dataclass(frozen=True)
class FrontierPoint:
    expected_wealth: float
    variance: float


@dataclass(frozen=True, eq=False)
class AuxiliaryValue:
    """``f_t(x) = quad[t] x^2 + lin[t] x + const[t]`` for ``t = 0..T``."""

    quad: np.ndarray
    lin: np.ndarray
    const: np.ndarray

    def __call__(self, t: int, x):
        return self.quad[t] * x * x + self.lin[t] * x + self.const[t]


@dataclass(frozen=True, eq=False)
class WealthSample:
    mean: float
    variance: float
    terminal: np.ndarray
    exit_times: np.ndarray

    @property
    def std_error_mean(self) -> float:
        return float(np.sqrt(self.variance / self.terminal.shape[0]))

    @property
    def std_error_variance(self) -> float:
        """Large-sample standard error of the sample variance (uses the 4th moment)."""
        d = self.terminal - self.mean
        N = self.terminal.shape[0]
        m4 = float(np.mean(d**4))
        return float(np.sqrt(max(m4 - self.variance**2, 0.0) / N))


# ---------------------------------------------------------------------------
# excess-return moments


def excess_moments(f, Q, r0: float):
    """Mean and second moment of ``e = r - r0`` for ``r ~ (f, Q)``.

    ``f`` and ``r0`` must use the same return convention; the result does not
    depend on which.  Returns ``(mean_e, second_e)``, with
    ``second_e = Q + (f - r0)^2`` (an outer product for vectors).
    """
    if isinstance(f, Predictive):
        f, Q = f.f, f.Q
    f = np.asarray(f, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d = f - r0
    if f.ndim == 0:
        return float(d), float(Q + d * d)
    return d, Q + np.outer(d, d)


def moments_from_forecast(means, variances, r0, net: bool = True) -> ExcessMoments:
    """Excess moments for a forecast path.

    ``r0`` is the gross riskless return (scalar or per period).  When the
    forecasts are net returns they are compared to ``r0 - 1``.
    """
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    T = means.shape[0]
    r0 = np.broadcast_to(np.asarray(r0, dtype=float), (T,))
    level = r0 - 1.0 if net else r0
    if means.ndim == 1:
        d = means - level
        return ExcessMoments(d, variances + d * d, r0)
    d = means - level[:, None]
    return ExcessMoments(d, variances + np.einsum("ti,tj->tij", d, d), r0)


def planning_moments(source: Union[ReturnModel, FilterState], horizon: int, r0,
                     lags=None, net: bool = True) -> ExcessMoments:
    """Excess moments for a ``horizon``-period plan.

    For a model the forecast moments from ``lags`` are used.  For a filter
    state the point model at the posterior mean is propagated, and the first
    step's variance is replaced by the filter's one-step predictive
    variance, which is where parameter uncertainty enters.
    """
    if isinstance(source, FilterState):
        from mvbayes.bayes_filter import point_model

        model = point_model(source)
        means, var = forecast_moments(model, source.lag_buffer, horizon)
        pred = predict(source)
        var = var.copy()
        var[0] = pred.Q
        means = means.copy()
        means[0] = pred.f
        return moments_from_forecast(means, var, r0, net=net)
    if lags is None:
        raise ValueError("lags are required when planning from a model")
    means, var = forecast_moments(source, lags, horizon)
    return moments_from_forecast(means, var, r0, net=net)


# ---------------------------------------------------------------------------
# backward recursion


def _check_theta(Theta: float) -> None:
    if not (0.0 < Theta < 1.0):
        raise InfeasibleError(
            f"Theta = {Theta:.6g} outside (0, 1): degenerate risky asset or horizon"
        )


def dp_coefficients(moments: ExcessMoments, exit: ExitDistribution) -> DpCoefficients:
    """Backward recursion from ``dp_omega_T = dp_lambda_T = p_T``.

    The next-period coefficients are known at ``t``, so they factor out of
    the conditional expectations.  With ``h_t = E(e)^2 / E(e^2)``::

        dp_omega_t  = p_t + r0_t^2 dp_omega_{t+1}  (1 - h_t)
        dp_lambda_t = p_t + r0_t   dp_lambda_{t+1} (1 - h_t)
        theta_t     = dp_lambda_{t+1}^2 h_t / dp_omega_{t+1}

    For several assets ``h_t = E(e)' E(ee')^{-1} E(e)``.
    """
    if moments.T != exit.T:
        raise ValueError(f"moments cover {moments.T} periods, exit distribution {exit.T}")
    T = moments.T
    probs = exit.probs
    r0 = moments.r0
    if not moments.vector:
        if np.any(moments.second_e <= 0):
            raise InfeasibleError("singular second moment E(e_t^2) = 0")
        om, la, th = _core.dp_backward(moments.mean_e[None, :], moments.second_e[None, :], r0, probs)
        om, la, th = om[0], la[0], th[0]
        if not np.all(np.isfinite(th)):
            raise InfeasibleError("recursion broke down (zero dp_omega coefficient)")
    else:
        om = np.empty(T + 1)
        la = np.empty(T + 1)
        th = np.empty(T)
        om[T] = la[T] = probs[T - 1]
        for t in range(T - 1, -1, -1):
            w1, l1 = om[t + 1], la[t + 1]
            S = moments.second_e[t]
            if np.linalg.cond(S) > 1e14:
                raise InfeasibleError(
                    f"singular second-moment matrix E(e e') at t={t} (collinear assets?)"
                )
            m_t = moments.mean_e[t]
            h = m_t @ np.linalg.solve(S, m_t)
            pt = probs[t - 1] if t > 0 else 0.0
            om[t] = pt + r0[t] * r0[t] * w1 * (1.0 - h)
            la[t] = pt + r0[t] * l1 * (1.0 - h)
            th[t] = l1 * l1 * h / w1
    Theta = float(np.sum(th))
    _check_theta(Theta)
    return DpCoefficients(om, la, th, Theta, probs.copy(), r0.copy())


def lambda_star(coeffs: DpCoefficients, risk_aversion: float, x0: float) -> float:
    """``(1 + 2 omega lambda_0 x0) / (1 - Theta)``."""
    if risk_aversion <= 0:
        raise ValueError("risk aversion must be positive")
    _check_theta(coeffs.Theta)
    return (1.0 + 2.0 * risk_aversion * coeffs.dp_lambda[0] * x0) / (1.0 - coeffs.Theta)


def expected_terminal_wealth(coeffs: DpCoefficients, risk_aversion: float, x0: float,
                             lam: Optional[float] = None) -> float:
    """``E_0(x at exit) = lambda_0 x0 + (lambda / 2 omega) Theta``.

    ``lam`` defaults to ``lambda*``; other values give the auxiliary
    problem's expectation.
    """
    lam = lambda_star(coeffs, risk_aversion, x0) if lam is None else lam
    return coeffs.dp_lambda[0] * x0 + lam / (2.0 * risk_aversion) * coeffs.Theta


def _ratios(coeffs: DpCoefficients, moments: ExcessMoments):
    """Per-period ``E(w1 ee')^{-1} E(l1 e)`` and ``E(w1 ee')^{-1} E(w1 e)``.

    ``w1 = dp_omega_{t+1}`` and ``l1 = dp_lambda_{t+1}`` are scalars known at
    ``t``, so these are ``(l1 / w1) E(ee')^{-1} E(e)`` and ``E(ee')^{-1} E(e)``.
    """
    T = coeffs.T
    ratio = coeffs.dp_lambda[1:] / coeffs.dp_omega[1:]
    if not moments.vector:
        b = moments.mean_e / moments.second_e
        return ratio * b, b
    n = moments.mean_e.shape[1]
    b = np.empty((T, n))
    for t in range(T):
        b[t] = np.linalg.solve(moments.second_e[t], moments.mean_e[t])
    return ratio[:, None] * b, b


def optimal_policy(coeffs: DpCoefficients, moments: ExcessMoments, risk_aversion: float,
                   x0: float) -> Policy:
    """Optimal affine policy of the mean-variance problem.

    ``u_t = (1 + 2 omega lambda_0 x0) / (2 omega (1 - Theta)) g_t - b_t r0_t x_t``
    with ``g_t = E(w1 ee')^{-1} E(l1 e)`` and ``b_t = E(w1 ee')^{-1} E(w1 e)``.
    """
    _check_theta(coeffs.Theta)
    g, b = _ratios(coeffs, moments)
    scale = (1.0 + 2.0 * risk_aversion * coeffs.dp_lambda[0] * x0) / (
        2.0 * risk_aversion * (1.0 - coeffs.Theta)
    )
    return Policy(scale * g, b, moments.r0.copy(), float(risk_aversion), float(x0))


def auxiliary_policy(coeffs: DpCoefficients, moments: ExcessMoments, lam: float,
                     risk_aversion: float, x0: float = 1.0) -> Policy:
    """Optimal policy of ``max E(lam x - omega x^2)``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    g, b = _ratios(coeffs, moments)
    return Policy(lam / (2.0 * risk_aversion) * g, b, moments.r0.copy(), float(risk_aversion), float(x0))


def auxiliary_value(coeffs: DpCoefficients, lam: float, risk_aversion: float) -> AuxiliaryValue:
    """Value function ``-omega dp_omega_t x^2 + lam dp_lambda_t x + Xi_t``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    tail = np.concatenate((np.cumsum(coeffs.theta[::-1])[::-1], [0.0]))
    return AuxiliaryValue(
        -risk_aversion * coeffs.dp_omega,
        lam * coeffs.dp_lambda,
        lam * lam / (4.0 * risk_aversion) * tail,
    )


# ---------------------------------------------------------------------------
# efficient frontier


def min_variance_point(coeffs: DpCoefficients, x0: float, literal: bool = False) -> FrontierPoint:
    """Vertex of the frontier parabola."""
    Theta, l0, w0 = coeffs.Theta, coeffs.dp_lambda[0], coeffs.dp_omega[0]
    E = l0 * x0 / (1.0 - Theta)
    gap = w0 - l0 * l0 / (1.0 - Theta)
    if literal:
        return FrontierPoint(E, gap * gap * x0 * x0)
    # the gap is zero in exact arithmetic under certain exit; do not let rounding make it negative
    return FrontierPoint(E, max(gap, 0.0) * x0 * x0)


def frontier_variance(coeffs: DpCoefficients, x0: float, expected, literal: bool = False):
    """Frontier variance at the given expected terminal wealth(s).

    ``literal=True`` squares the constant term ``(omega_0 - lambda_0^2 /
    (1 - Theta)) x0^2``.  That variant is not attainable by any policy and
    exists only so it can be tested against simulation.
    """
    _check_theta(coeffs.Theta)
    Theta = coeffs.Theta
    vertex = min_variance_point(coeffs, x0, literal)
    expected = np.asarray(expected, dtype=float)
    lo = vertex.expected_wealth
    if np.any(expected < lo - 1e-12 * max(1.0, abs(lo))):
        raise ValueError(
            f"target expectation below the minimum attainable {lo:.10g}"
        )
    d = np.maximum(expected - lo, 0.0)
    out = (1.0 - Theta) / Theta * d * d + vertex.variance
    return float(out) if out.ndim == 0 else out


def frontier(coeffs: DpCoefficients, x0: float, targets, literal: bool = False) -> List[FrontierPoint]:
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    var = np.atleast_1d(frontier_variance(coeffs, x0, targets, literal))
    return [FrontierPoint(float(e), float(v)) for e, v in zip(targets, var)]


def frontier_expectation(coeffs: DpCoefficients, x0: float, variance):
    """Upper branch of the frontier: expected wealth at the given variance(s).

    Variances below the minimum map to ``nan``.
    """
    _check_theta(coeffs.Theta)
    Theta = coeffs.Theta
    vertex = min_variance_point(coeffs, x0)
    variance = np.asarray(variance, dtype=float)
    excess = variance - vertex.variance
    with np.errstate(invalid="ignore"):
        out = np.where(
            excess >= 0,
            vertex.expected_wealth + np.sqrt(np.maximum(excess, 0.0) * Theta / (1.0 - Theta)),
            np.nan,
        )
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Monte-Carlo wealth simulation


def _draw_excess(source, T, n_paths, rng, r0, lags, net):
    """Excess-return paths ``(n_paths, T)`` or ``(n_paths, T, n)``."""
    if isinstance(source, ExcessMoments):
        cov = source.covariance
        if not source.vector:
            z = rng.standard_normal((n_paths, T))
            return source.mean_e + np.sqrt(np.maximum(cov, 0.0)) * z
        n = source.mean_e.shape[1]
        out = np.empty((n_paths, T, n))
        for t in range(T):
            w, V = np.linalg.eigh(cov[t])
            L = V * np.sqrt(np.clip(w, 0.0, None))
            out[:, t] = source.mean_e[t] + rng.standard_normal((n_paths, n)) @ L.T
        return out
    if isinstance(source, FilterState):
        from mvbayes.bayes_filter import point_model

        lags = source.lag_buffer
        source = point_model(source)
    if lags is None:
        raise ValueError("initial lags are required to simulate from a model")
    level = r0 - 1.0 if net else r0
    seeds = rng.integers(0, 2**63 - 1, size=n_paths)
    if isinstance(source, ArModel):
        paths = np.stack([simulate_path(source, T, int(s), init=lags) for s in seeds])
        return paths - level
    paths = np.stack([simulate_path(source, T, int(s), init=lags) for s in seeds])
    return paths - level[None, :, None]


def simulate_policy(policy: Policy, source: Union[ExcessMoments, ReturnModel, FilterState],
                    exit: ExitDistribution, n_paths: int, seed: int, lags=None,
                    net: bool = True) -> WealthSample:
    """Monte-Carlo wealth under ``policy`` with exit drawn independently of returns.

    ``source`` is either an :class:`ExcessMoments` (independent Gaussian
    excess returns with exactly those per-period moments, the law the
    recursion plans against) or a return model / filter state (autocorrelated
    return paths started from ``lags``).  Paths are produced in chunks of
    ``CHUNK``; chunk ``k`` uses generator seed ``seed ^ k``.
    """
    T = policy.T
    if exit.T != T:
        raise ValueError("policy horizon and exit distribution differ")
    r0 = policy.r0
    terminal = []
    exits = []
    n_chunks = -(-n_paths // CHUNK)
    for k in range(n_chunks):
        size = min(CHUNK, n_paths - k * CHUNK)
        rng = np.random.default_rng(seed ^ k)
        e = _draw_excess(source, T, size, rng, r0, lags, net)
        tau = rng.choice(np.arange(1, T + 1), size=size, p=exit.probs)
        x = np.full(size, float(policy.x0))
        out = np.empty(size)
        for t in range(T):
            u = policy.control(t, x)
            gain = e[:, t] * u if e.ndim == 2 else np.einsum("pi,pi->p", e[:, t], u)
            x = r0[t] * x + gain
            hit = tau == t + 1
            out[hit] = x[hit]
        terminal.append(out)
        exits.append(tau)
    terminal = np.concatenate(terminal)
    return WealthSample(float(np.mean(terminal)), float(np.var(terminal)), terminal,
                        np.concatenate(exits))
