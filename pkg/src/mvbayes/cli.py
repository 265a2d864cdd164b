"""Command-line front end: ``mvbayes <command> [options]``.

Exit status is 0 on success, 1 on a usage error and 2 on a data, estimation
or infeasibility error.  Every output starts with ``#`` comment lines giving
the software version, the command, a configuration digest and (for
randomised commands) the seed; outputs contain nothing time-dependent, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import sys
import warnings
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from mvbayes import __version__
from mvbayes.bayes_filter import filter_series, init_filter
from mvbayes.data_io import RunConfig, load_config, load_prices, parse_exit, split, to_returns
from mvbayes.errors import MvBayesError, NonStationaryWarning
from mvbayes.experiments import (
    backtest,
    credible_intervals,
    parameter_study,
    table_config,
    write_csv,
)
from mvbayes.returns_model import ArModel, fit_ols, select_order

__all__ = ["main", "build_parser"]

_OVERRIDES = {
    "convention": "convention",
    "horizon": "horizon",
    "x0": "x0",
    "riskfree_net": "riskfree_net",
    "exit": "exit",
    "omega": "omega",
    "est_len": "est_len",
    "upd_len": "upd_len",
    "order": "order",
    "p_max": "p_max",
}


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_config_options(p: argparse.ArgumentParser, prices: bool = True) -> None:
    if prices:
        p.add_argument("--prices", required=True, help="CSV file: date,<ticker>,...")
        p.add_argument("--tickers", help="comma-separated subset of columns (default: all)")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--convention", choices=("gross", "net"))
    p.add_argument("--horizon", type=int)
    p.add_argument("--x0", type=float)
    p.add_argument("--riskfree-net", dest="riskfree_net", type=float)
    p.add_argument("--exit", help="'certain', 'uniform_tail:<mass>' or 't:p,a-b:p,...'")
    p.add_argument("--omega", help="risk aversion, or a comma-separated grid")
    p.add_argument("--est-len", dest="est_len", type=int)
    p.add_argument("--upd-len", dest="upd_len", type=int)
    p.add_argument("--order", type=int, help="autoregressive order (0 = AIC)")
    p.add_argument("--p-max", dest="p_max", type=int)
    p.add_argument("-o", "--output", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvbayes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mvbayes {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="command")
    sub.required = True

    p = sub.add_parser("estimate", help="fit the return model; JSON with the prior covariance")
    _add_config_options(p)

    p = sub.add_parser("filter", help="per-step one-step predictives and posterior means (CSV)")
    _add_config_options(p)

    p = sub.add_parser("frontier", help="updated and non-updated frontiers per exit distribution (CSV)")
    _add_config_options(p)
    p.add_argument("--exits", help="';'-separated exit specs, one frontier each (default: --exit)")
    p.add_argument("--points", type=int, default=50)

    p = sub.add_parser("backtest", help="paired updated/non-updated frontier files")
    _add_config_options(p)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--prefix", required=True,
                   help="writes <prefix>_updated.csv and <prefix>_fixed.csv")

    p = sub.add_parser("study", help="win-probability table (CSV)")
    p.add_argument("--table", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--metric", choices=("oracle", "dominance"), default="oracle")
    p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = sub.add_parser("credible", help="credible intervals of optimal expected wealth (CSV)")
    _add_config_options(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--sims", type=int, default=1000)
    p.add_argument("--prior-uncertainty", action="store_true",
                   help="add the prior parameter variance F' C0 F to each period's variance")
    return parser


# ---------------------------------------------------------------------------


def _run_config(args) -> RunConfig:
    overrides = {}
    for key, attr in _OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    return load_config(args.config, overrides)


def _returns(args, cfg: RunConfig) -> np.ndarray:
    prices = load_prices(args.prices)
    if args.tickers:
        wanted = [t.strip() for t in args.tickers.split(",")]
        missing = [t for t in wanted if t not in prices.tickers]
        if missing:
            raise MvBayesError(f"unknown ticker(s): {', '.join(missing)}")
        cols = [prices.tickers.index(t) for t in wanted]
        P = prices.prices[:, cols]
    else:
        P = prices.prices
    if P.shape[1] == 1:
        P = P[:, 0]
    return to_returns(P, cfg.convention)


def _header(command: str, cfg_digest: str, seed: Optional[int] = None) -> List[str]:
    lines = [f"mvbayes {__version__}", f"command: {command}", f"config: {cfg_digest}"]
    if seed is not None:
        lines.append(f"seed: {seed}")
    return lines


def _digest(*parts) -> str:
    return hashlib.sha256(";".join(repr(p) for p in parts).encode()).hexdigest()[:16]


@contextlib.contextmanager
def _open_out(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with Path(path).open("w", newline="") as fh:
            yield fh


def _fit(returns, cfg: RunConfig):
    est, upd = split(returns, cfg.est_len, cfg.upd_len)
    p = cfg.order or select_order(est, cfg.p_max)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonStationaryWarning)
        model, C0 = fit_ols(est, p)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return est, upd, model, C0


def _model_json(model) -> dict:
    if isinstance(model, ArModel):
        return {
            "kind": "AR",
            "order": model.p,
            "mu": model.mu,
            "phi": list(model.phi),
            "sigma2": model.sigma2,
            "flagged": model.flagged,
        }
    return {
        "kind": "VAR",
        "order": model.p,
        "assets": model.n,
        "mu": model.mu.tolist(),
        "Phi": [P.tolist() for P in model.Phi],
        "Sigma": model.Sigma.tolist(),
        "flagged": model.flagged,
    }


def cmd_estimate(args) -> int:
    cfg = _run_config(args)
    returns = _returns(args, cfg)
    _, _, model, C0 = _fit(returns, cfg)
    doc = {
        "_header": _header("estimate", cfg.digest()),
        "model": _model_json(model),
        "theta": model.theta.tolist(),
        "C0": np.asarray(C0).tolist(),
    }
    with _open_out(args.output) as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return 0


def cmd_filter(args) -> int:
    cfg = _run_config(args)
    returns = _returns(args, cfg)
    est, upd, model, C0 = _fit(returns, cfg)
    if len(upd) == 0:
        raise MvBayesError("update segment is empty: set upd_len > 0")
    state = init_filter(model, C0, est[-model.p:])
    _, preds, means = filter_series(state, upd)
    rows = []
    for step, (pred, m) in enumerate(zip(preds, means), start=1):
        row = {"step": step}
        f = np.atleast_1d(pred.f)
        Q = np.atleast_2d(pred.Q)
        for i, v in enumerate(f):
            row[f"f{i}"] = float(v)
        for i in range(Q.shape[0]):
            for j in range(i, Q.shape[1]):
                row[f"Q{i}_{j}"] = float(Q[i, j])
        for i, v in enumerate(m):
            row[f"m{i}"] = float(v)
        rows.append(row)
    with _open_out(args.output) as fh:
        write_csv(rows, fh, _header("filter", cfg.digest()))
    return 0


def _frontier_pair(returns, cfg: RunConfig, exit_spec: str, points: int):
    return backtest(
        returns,
        cfg.est_len,
        cfg.upd_len,
        cfg.horizon,
        parse_exit(exit_spec, cfg.horizon),
        cfg.r0,
        x0=cfg.x0,
        order=cfg.order or None,
        p_max=cfg.p_max,
        net=cfg.convention == "net",
        risk_aversion=min(cfg.omega),
        n_points=points,
    )


def cmd_frontier(args) -> int:
    cfg = _run_config(args)
    returns = _returns(args, cfg)
    specs = [s.strip() for s in args.exits.split(";")] if args.exits else [cfg.exit]
    rows = []
    for spec in specs:
        res = _frontier_pair(returns, cfg, spec, args.points)
        for v, eu, ef in zip(res.variance, res.expected_updated, res.expected_fixed):
            rows.append({"exit": spec, "variance": float(v), "expected_updated": float(eu),
                         "expected_fixed": float(ef)})
    with _open_out(args.output) as fh:
        write_csv(rows, fh, _header("frontier", _digest(cfg.digest(), specs, args.points)))
    return 0


def cmd_backtest(args) -> int:
    cfg = _run_config(args)
    returns = _returns(args, cfg)
    res = _frontier_pair(returns, cfg, cfg.exit, args.points)
    header = _header("backtest", _digest(cfg.digest(), args.points))
    for name, expected in (("updated", res.expected_updated), ("fixed", res.expected_fixed)):
        rows = [{"variance": float(v), "expected": float(e)} for v, e in zip(res.variance, expected)]
        with Path(f"{args.prefix}_{name}.csv").open("w", newline="") as fh:
            write_csv(rows, fh, header + [f"frontier: {name}"])
    return 0


def cmd_study(args) -> int:
    cfg = table_config(args.table, samples=args.samples, seed=args.seed, metric=args.metric)
    table = parameter_study(cfg)
    with _open_out(args.output) as fh:
        write_csv(table.rows(), fh, _header(f"study table {args.table}", _digest(cfg), args.seed))
    return 0


def cmd_credible(args) -> int:
    cfg = _run_config(args)
    returns = _returns(args, cfg)
    est, _, model, C0 = _fit(returns, cfg)
    if not isinstance(model, ArModel):
        raise MvBayesError("credible intervals need a single-asset price series")
    results = credible_intervals(
        model,
        cfg.omega,
        alpha=args.alpha,
        n_sims=args.sims,
        seed=args.seed,
        lags=est[-model.p:],
        C0=C0 if args.prior_uncertainty else None,
        horizon=cfg.horizon,
        r0=cfg.r0,
        exit=cfg.exit_distribution,
        x0=cfg.x0,
        net=cfg.convention == "net",
    )
    rows = [
        {
            "risk_aversion": r.risk_aversion,
            "expected": r.expected,
            "lower": r.lower,
            "upper": r.upper,
            "variance": r.variance,
            "alpha": r.alpha,
            "n_used": r.n_used,
            "n_excluded": r.n_excluded,
        }
        for r in results
    ]
    with _open_out(args.output) as fh:
        write_csv(rows, fh, _header("credible", _digest(cfg.digest(), args.alpha, args.sims, args.prior_uncertainty), args.seed))
    return 0


_COMMANDS = {
    "estimate": cmd_estimate,
    "filter": cmd_filter,
    "frontier": cmd_frontier,
    "backtest": cmd_backtest,
    "study": cmd_study,
    "credible": cmd_credible,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (MvBayesError, ValueError) as exc:
        print(f"mvbayes {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
