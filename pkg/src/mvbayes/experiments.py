"""Simulation studies, backtests, exit-time comparisons and credible intervals."""

from __future__ import annotations

import csv
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from mvbayes import _core
from mvbayes.bayes_filter import FilterState, filter_series, init_filter
from mvbayes.data_io import split
from mvbayes.errors import InfeasibleError, NonStationaryWarning
from mvbayes.mv_optimizer import (
    DpCoefficients,
    ExitDistribution,
    dp_coefficients,
    expected_terminal_wealth,
    frontier_expectation,
    frontier_variance,
    min_variance_point,
    moments_from_forecast,
    planning_moments,
)
from mvbayes.returns_model import ArModel, ReturnModel, fit_ols, select_order, simulate_path

logger = logging.getLogger(__name__)

__all__ = [
    "StudyConfig",
    "WinTable",
    "CredibleResult",
    "BacktestResult",
    "TABLES",
    "table_config",
    "parameter_study",
    "replicate_outcome",
    "backtest",
    "exit_time_study",
    "horizon_study",
    "SPREAD_EXITS",
    "credible_intervals",
    "worker_count",
    "write_csv",
    "write_json",
]

# exit-time distributions over 26 periods with increasing spread
SPREAD_EXITS = {
    "P1": "1-25:0.001,26:0.975",
    "P2": "1-24:0.001,25:0.3,26:0.676",
    "P3": "1-15:0.001,16-25:0.05,26:0.485",
}


def worker_count() -> int:
    """Worker cap from ``MVBAYES_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("MVBAYES_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _stream_seed(*keys: int) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# parameter study


@dataclass(frozen=True)
class StudyConfig:
    """Monte-Carlo study over one AR(1) parameter.

    ``parameter`` names the varied quantity (``phi``, ``mu`` or ``sigma2``);
    the others stay at ``mu``, ``phi``, ``sigma2``.  Each replicate simulates
    ``est_len + horizon`` returns; the estimation segment supplies the prior
    covariance and the last ``horizon`` returns are the update segment.

    ``metric`` decides a win:

    ``"oracle"``
        the updated frontier is closer than the fixed frontier to the
        full-information frontier (true parameters applied to the realised
        returns) at the reference variance;
    ``"dominance"``
        the updated frontier lies above the fixed frontier at the reference
        variance.

    The reference variance is ``v_ref_factor`` times the largest minimum
    variance among the compared frontiers.
    """

    parameter: str = "phi"
    grid: Tuple[float, ...] = (0.1,)
    mu: float = 0.01
    phi: float = 0.1
    sigma2: float = 0.2
    samples: int = 100
    est_len: int = 130
    horizon: int = 26
    r0: float = 1.0057
    exit: Tuple[float, ...] = ()
    x0: float = 1.0
    v_ref_factor: float = 2.0
    metric: str = "oracle"
    seed: int = 42

    def __post_init__(self):
        if self.parameter not in ("phi", "mu", "sigma2"):
            raise ValueError(f"unknown study parameter {self.parameter!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.metric not in ("oracle", "dominance"):
            raise ValueError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        object.__setattr__(self, "exit", tuple(float(v) for v in self.exit))

    @property
    def exit_distribution(self) -> ExitDistribution:
        if self.exit:
            return ExitDistribution(np.array(self.exit))
        return ExitDistribution.uniform_tail(self.horizon, 0.001)

    def model_at(self, value: float) -> ArModel:
        params = {"mu": self.mu, "phi": self.phi, "sigma2": self.sigma2, self.parameter: value}
        flagged = abs(params["phi"]) >= 1
        return ArModel(params["mu"], (params["phi"],), params["sigma2"], flagged=flagged)


TABLES = {
    1: dict(parameter="phi", grid=tuple(np.round(np.arange(-0.9, 0.91, 0.1), 10)), mu=0.01, sigma2=0.2),
    2: dict(
        parameter="mu",
        grid=(-0.5, -0.4, -0.3, -0.2, -0.1, -0.05, -0.03, -0.01, 0.0, 0.01, 0.03, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5),
        phi=0.1,
        sigma2=1.0,
    ),
    3: dict(parameter="sigma2", grid=(0.05, 0.1, 0.15, 0.2, 0.25), mu=0.01, phi=0.1),
}


def table_config(table: int, **overrides) -> StudyConfig:
    """Study configuration for one of the three preset grids."""
    if table not in TABLES:
        raise ValueError(f"table must be one of {sorted(TABLES)}")
    return StudyConfig(**{**TABLES[table], **overrides})


@dataclass(frozen=True, eq=False)
class WinTable:
    parameter: str
    values: np.ndarray
    probabilities: np.ndarray
    wins: np.ndarray
    infeasible: np.ndarray
    flagged: np.ndarray
    samples: int

    def rows(self) -> List[dict]:
        return [
            {
                self.parameter: float(v),
                "probability": float(p),
                "wins": int(w),
                "samples": self.samples,
                "infeasible": int(i),
                "flagged": bool(f),
            }
            for v, p, w, i, f in zip(self.values, self.probabilities, self.wins, self.infeasible, self.flagged)
        ]


def _one_step_moments(state: FilterState, series, r0: float) -> Tuple[FilterState, object]:
    final, preds, _ = filter_series(state, series)
    f = np.array([p.f for p in preds])
    Q = np.array([p.Q for p in preds])
    return final, moments_from_forecast(f, Q, r0)


def _oracle_moments(model: ArModel, lags, series, r0: float):
    """True parameters applied to the realised regressors."""
    p = model.p
    hist = np.concatenate([np.asarray(lags, dtype=float), np.asarray(series, dtype=float)])
    T = len(series)
    f = np.full(T, model.mu)
    for i in range(1, p + 1):
        f = f + model.phi[i - 1] * (hist[p - i:p - i + T] - model.mu)
    return moments_from_forecast(f, np.full(T, model.sigma2), r0)


def replicate_outcome(cfg: StudyConfig, value: float, cell: int, k: int) -> Optional[bool]:
    """Win/loss for one replicate, ``None`` if a frontier is infeasible.

    The fixed investor plans the whole update segment at its start with the
    true parameters.  The updating investor starts from the same parameters,
    with the estimation-segment OLS covariance as prior uncertainty, and
    uses the filter's one-step predictive moments for each period.
    """
    true = cfg.model_at(value)
    T = cfg.horizon
    path = simulate_path(true, cfg.est_len + T, _stream_seed(cfg.seed, cell, k))
    est, upd = path[:cfg.est_len], path[cfg.est_len:]
    lags = est[-true.p:]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonStationaryWarning)
        _, C0 = fit_ols(est, true.p)
    exit = cfg.exit_distribution
    try:
        fixed = dp_coefficients(planning_moments(true, T, cfg.r0, lags=lags), exit)
        _, mom = _one_step_moments(init_filter(true, C0, lags), upd, cfg.r0)
        updated = dp_coefficients(mom, exit)
        compared = [fixed, updated]
        if cfg.metric == "oracle":
            oracle = dp_coefficients(_oracle_moments(true, lags, upd, cfg.r0), exit)
            compared.append(oracle)
    except InfeasibleError:
        return None
    v_ref = cfg.v_ref_factor * max(min_variance_point(c, cfg.x0).variance for c in compared)
    heights = [frontier_expectation(c, cfg.x0, v_ref) for c in compared]
    if cfg.metric == "dominance":
        return bool(heights[1] > heights[0])
    return bool(abs(heights[1] - heights[2]) < abs(heights[0] - heights[2]))


def _run_cell(args) -> Tuple[int, int]:
    cfg, value, cell = args
    wins = infeasible = 0
    for k in range(cfg.samples):
        out = replicate_outcome(cfg, value, cell, k)
        if out is None:
            infeasible += 1
        elif out:
            wins += 1
    return wins, infeasible


def parameter_study(cfg: StudyConfig, workers: Optional[int] = None) -> WinTable:
    """Win probability for each grid value.

    Replicate seeds depend only on ``(seed, cell, replicate)``, so the table
    does not depend on the number of workers.  Infeasible replicates count
    as losses and are reported.
    """
    workers = worker_count() if workers is None else workers
    jobs = [(cfg, v, i) for i, v in enumerate(cfg.grid)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    wins = np.array([w for w, _ in results])
    infeasible = np.array([i for _, i in results])
    flagged = np.array([cfg.model_at(v).flagged for v in cfg.grid])
    for v, f, i in zip(cfg.grid, flagged, infeasible):
        if f or i:
            logger.warning("%s=%g: flagged=%s, infeasible replicates=%d", cfg.parameter, v, f, i)
    return WinTable(cfg.parameter, np.array(cfg.grid), wins / cfg.samples, wins, infeasible, flagged, cfg.samples)


# ---------------------------------------------------------------------------
# backtest and frontier families


@dataclass(frozen=True, eq=False)
class BacktestResult:
    variance: np.ndarray
    expected_updated: np.ndarray
    expected_fixed: np.ndarray
    updated: DpCoefficients
    fixed: DpCoefficients
    model: ReturnModel
    C0: np.ndarray
    state: FilterState


def variance_grid(coeffs: Sequence[DpCoefficients], x0: float, risk_aversion: float,
                  n_points: int = 50) -> np.ndarray:
    """Shared variance grid from the largest minimum variance up to twice the
    largest optimal-point variance at ``risk_aversion``."""
    lo = max(min_variance_point(c, x0).variance for c in coeffs)
    hi = max(
        frontier_variance(c, x0, expected_terminal_wealth(c, risk_aversion, x0)) for c in coeffs
    )
    hi = max(2.0 * hi, lo * 1.5, lo + 1e-12)
    return np.linspace(lo, hi, n_points)


def backtest(returns, estimation_len: int, update_len: int, horizon: int, exit: ExitDistribution,
             r0: float, x0: float = 1.0, order: Optional[int] = None, p_max: int = 5,
             net: bool = True, risk_aversion: float = 1.0, n_points: int = 50) -> BacktestResult:
    """Updated vs non-updated frontiers planned at the end of the update segment.

    The model is fitted on the estimation segment.  The updated investor
    filters through the update segment; the non-updated investor keeps the
    initial parameters but sees the same recent returns.  Both plan
    ``horizon`` periods ahead from the same date.
    """
    est, upd = split(returns, estimation_len, update_len)
    p = order or select_order(est, p_max)
    model, C0 = fit_ols(est, p)
    lags = est[-p:]
    state0 = init_filter(model, C0, lags)
    state = filter_series(state0, upd)[0] if update_len > 0 else state0
    fixed_state = replace(state0, lag_buffer=state.lag_buffer.copy())
    cu = dp_coefficients(planning_moments(state, horizon, r0, net=net), exit)
    cf = dp_coefficients(planning_moments(fixed_state, horizon, r0, net=net), exit)
    grid = variance_grid([cu, cf], x0, risk_aversion, n_points)
    return BacktestResult(
        grid,
        frontier_expectation(cu, x0, grid),
        frontier_expectation(cf, x0, grid),
        cu,
        cf,
        model,
        C0,
        state,
    )


def exit_time_study(state: FilterState, distributions: Mapping[str, ExitDistribution], r0: float,
                    x0: float = 1.0, net: bool = True, risk_aversion: float = 1.0,
                    n_points: int = 50) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """One frontier per exit distribution on a shared variance grid."""
    coeffs = {}
    for name, dist in distributions.items():
        coeffs[name] = dp_coefficients(planning_moments(state, dist.T, r0, net=net), dist)
    grid = variance_grid(list(coeffs.values()), x0, risk_aversion, n_points)
    return grid, {name: frontier_expectation(c, x0, grid) for name, c in coeffs.items()}


def horizon_study(state: FilterState, horizons: Sequence[int], tail_mass: float, r0: float,
                  x0: float = 1.0, net: bool = True, risk_aversion: float = 1.0,
                  n_points: int = 50) -> Tuple[np.ndarray, Dict[int, np.ndarray]]:
    """Frontiers for several horizons, each with ``tail_mass`` per early period."""
    dists = {T: ExitDistribution.uniform_tail(T, tail_mass) for T in horizons}
    return exit_time_study(state, dists, r0, x0, net, risk_aversion, n_points)


# ---------------------------------------------------------------------------
# credible intervals


@dataclass(frozen=True)
class CredibleResult:
    risk_aversion: float
    expected: float
    lower: float
    upper: float
    variance: float
    alpha: float
    n_used: int
    n_excluded: int
    sample: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def credible_intervals(model: ArModel, omegas: Sequence[float], alpha: float = 0.5,
                       n_sims: int = 1000, seed: int = 42, lags=None, C0=None, horizon: int = 26,
                       r0: float = 1.0057, exit: Optional[ExitDistribution] = None,
                       x0: float = 1.0, net: bool = True, max_excluded: float = 0.05,
                       ) -> List[CredibleResult]:
    """Empirical intervals for the optimal expected terminal wealth.

    Each simulated return path from ``model`` (started at ``lags``) defines
    per-period excess moments: the mean is the initial parameter vector
    applied to the path's regressors, the variance is the prior predictive
    ``F' C0 F + sigma2`` (``sigma2`` alone without ``C0``).  The recursion
    then gives each path's optimal expected wealth for every ``omega``.  The
    implied variance is the frontier variance at each path's optimum,
    averaged over paths.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    omegas = [float(w) for w in omegas]
    if any(w <= 0 for w in omegas):
        raise ValueError("risk aversion must be positive")
    if not isinstance(model, ArModel):
        raise TypeError("credible intervals are implemented for single-asset models")
    p, T = model.p, horizon
    exit = exit or ExitDistribution.uniform_tail(T, 0.001)
    if exit.T != T:
        raise ValueError("exit distribution and horizon differ")
    lags = np.full(p, model.mu) if lags is None else np.asarray(lags, dtype=float).reshape(p)
    m0 = model.theta
    if C0 is not None and np.shape(C0) != (p + 1, p + 1):
        raise ValueError(f"C0 must be {p + 1}x{p + 1} for an AR({p}) model, got {np.shape(C0)}")
    level = (r0 - 1.0) if net else r0

    mean_e = np.empty((n_sims, T))
    second_e = np.empty((n_sims, T))
    for k in range(n_sims):
        path = simulate_path(model, T, _stream_seed(seed, k), init=lags)
        hist = np.concatenate([lags, path])
        F = np.empty((T, p + 1))
        F[:, 0] = 1.0
        for i in range(1, p + 1):
            F[:, i] = hist[p - i:p - i + T]
        f = F @ m0
        Q = np.full(T, model.sigma2)
        if C0 is not None:
            Q = Q + np.einsum("ti,ij,tj->t", F, np.asarray(C0), F)
        d = f - level
        mean_e[k] = d
        second_e[k] = Q + d * d

    om, la, th = _core.dp_backward(mean_e, second_e, np.full(T, r0), exit.probs)
    Theta = th.sum(axis=1)
    ok = np.isfinite(Theta) & (Theta > 0) & (Theta < 1)
    n_bad = int(np.sum(~ok))
    if n_bad > max_excluded * n_sims:
        raise InfeasibleError(
            f"{n_bad} of {n_sims} simulated paths have Theta outside (0, 1); exclusion budget exceeded"
        )
    Theta, lam0, om0 = Theta[ok], la[ok, 0], om[ok, 0]
    e_min = lam0 * x0 / (1.0 - Theta)
    v_min = (om0 - lam0**2 / (1.0 - Theta)) * x0 * x0

    results = []
    for w in omegas:
        lam_star = (1.0 + 2.0 * w * lam0 * x0) / (1.0 - Theta)
        wealth = lam0 * x0 + lam_star / (2.0 * w) * Theta
        var = (1.0 - Theta) / Theta * (wealth - e_min) ** 2 + v_min
        lo, hi = np.quantile(wealth, [alpha / 2.0, 1.0 - alpha / 2.0])
        results.append(
            CredibleResult(w, float(np.mean(wealth)), float(lo), float(hi), float(np.mean(var)),
                           alpha, int(ok.sum()), n_bad, wealth)
        )
    return results


# ---------------------------------------------------------------------------
# output


def write_csv(rows: Sequence[Mapping], fh, header: Sequence[str] = ()) -> None:
    """Write ``rows`` as CSV after ``# ``-prefixed header lines."""
    for line in header:
        fh.write(f"# {line}\n")
    if not rows:
        return
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_json(rows, fh, header: Mapping = None) -> None:
    doc = {"header": dict(header or {}), "rows": rows}
    json.dump(doc, fh, indent=2, sort_keys=False)
    fh.write("\n")
