"""Price ingestion, return construction, sample splitting and run configuration."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from mvbayes.errors import DataError
from mvbayes.mv_optimizer import ExitDistribution

__all__ = [
    "PriceSeries",
    "RunConfig",
    "load_prices",
    "write_prices",
    "align",
    "to_returns",
    "split",
    "parse_exit",
    "load_config",
]


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Prices on common, strictly increasing dates; ``prices`` is ``(dates, assets)``."""

    dates: Tuple[dt.date, ...]
    tickers: Tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim == 1:
            prices = prices[:, None]
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if prices.shape != (len(self.dates), len(self.tickers)):
            raise DataError("price matrix does not match dates x tickers")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        if np.any(~np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("prices must be finite and positive")

    def __len__(self):
        return len(self.dates)

    def column(self, ticker: str) -> np.ndarray:
        return self.prices[:, self.tickers.index(ticker)]

    def equals(self, other: "PriceSeries") -> bool:
        return (
            self.dates == other.dates
            and self.tickers == other.tickers
            and np.array_equal(self.prices, other.prices)
        )


def align(columns: Dict[str, Dict[dt.date, float]]) -> PriceSeries:
    """Inner-join per-asset ``{date: price}`` maps on their common dates."""
    tickers = list(columns)
    if not tickers:
        raise DataError("no assets to align")
    common = set(columns[tickers[0]])
    for t in tickers[1:]:
        common &= set(columns[t])
    dates = sorted(common)
    prices = np.array([[columns[t][d] for t in tickers] for d in dates], dtype=float)
    return PriceSeries(tuple(dates), tuple(tickers), prices.reshape(len(dates), len(tickers)))


def load_prices(path: Union[str, Path]) -> PriceSeries:
    """Read ``date,<ticker1>,<ticker2>,...`` with ISO-8601 dates.

    An empty cell means the asset has no price that day; such dates are
    dropped for all assets.  Anything else that is not a positive number is
    an error naming the line and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0].lower() != "date":
        raise DataError(f"{path}: header must be 'date,<ticker>,...'")
    tickers = header[1:]
    if len(set(tickers)) != len(tickers):
        raise DataError(f"{path}: duplicate ticker in header")
    columns: Dict[str, Dict[dt.date, float]] = {t: {} for t in tickers}
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            date = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad date {row[0]!r}") from None
        if date in seen:
            raise DataError(f"{path}:{lineno}: duplicate date {date}")
        seen.add(date)
        for col, (ticker, cell) in enumerate(zip(tickers, row[1:]), start=2):
            cell = cell.strip()
            if cell == "":
                continue
            try:
                value = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: column {col} ({ticker}): non-numeric price {cell!r}"
                ) from None
            if not math.isfinite(value) or value <= 0:
                raise DataError(f"{path}:{lineno}: column {col} ({ticker}): price must be positive")
            columns[ticker][date] = value
    return align(columns)


def write_prices(series: PriceSeries, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *series.tickers])
        for d, row in zip(series.dates, series.prices):
            w.writerow([d.isoformat(), *(repr(float(v)) for v in row)])


def to_returns(prices: Union[PriceSeries, np.ndarray], convention: str = "net") -> np.ndarray:
    """Simple returns ``P_t / P_{t-1}`` (gross) or that minus one (net).

    A single-asset :class:`PriceSeries` gives a 1-D array.
    """
    if convention not in ("gross", "net"):
        raise ValueError(f"unknown return convention {convention!r}")
    if isinstance(prices, PriceSeries):
        P = prices.prices
        if P.shape[1] == 1:
            P = P[:, 0]
    else:
        P = np.asarray(prices, dtype=float)
    if P.shape[0] < 2:
        raise DataError("need at least two prices to form a return")
    gross = P[1:] / P[:-1]
    return gross if convention == "gross" else gross - 1.0


def split(series, estimation_len: int, update_len: int):
    """Leading estimation segment followed by the update segment."""
    series = np.asarray(series)
    if estimation_len < 0 or update_len < 0:
        raise ValueError("segment lengths must be non-negative")
    need = estimation_len + update_len
    if need > series.shape[0]:
        raise DataError(
            f"insufficient data: split needs {need} observations, {series.shape[0]} available"
        )
    return series[:estimation_len], series[estimation_len:need]


def parse_exit(spec: str, horizon: int) -> ExitDistribution:
    """Parse an exit-time specification.

    Accepted forms: ``certain``; ``uniform_tail:<mass>`` (``mass`` at each
    period before ``T``, the rest at ``T``); or comma-separated ``t:p`` items
    where ``t`` may be a range ``a-b``.
    """
    spec = spec.strip()
    if spec == "certain":
        return ExitDistribution.certain(horizon)
    if spec.startswith("uniform_tail:"):
        try:
            mass = float(spec.split(":", 1)[1])
        except ValueError:
            raise DataError(f"bad exit spec {spec!r}") from None
        try:
            return ExitDistribution.uniform_tail(horizon, mass)
        except ValueError as exc:
            raise DataError(f"bad exit spec {spec!r}: {exc}") from None
    pairs: Dict[int, float] = {}
    try:
        for item in spec.split(","):
            when, p = item.split(":")
            if "-" in when:
                a, b = (int(v) for v in when.split("-"))
                ts = range(a, b + 1)
            else:
                ts = [int(when)]
            for t in ts:
                pairs[t] = pairs.get(t, 0.0) + float(p)
        return ExitDistribution.from_pairs(pairs, horizon)
    except ValueError as exc:
        raise DataError(f"bad exit spec {spec!r}: {exc}") from None


@dataclass
class RunConfig:
    """Run settings; see ``load_config`` for the file format."""

    convention: str = "net"
    horizon: int = 26
    x0: float = 1.0
    riskfree_net: float = 0.0057
    exit: str = "uniform_tail:0.001"
    omega: Tuple[float, ...] = (1.0,)
    seed: int = 42
    est_len: int = 130
    upd_len: int = 26
    order: int = 0  # 0 selects by AIC up to p_max
    p_max: int = 5

    def __post_init__(self):
        if isinstance(self.omega, (int, float)):
            self.omega = (float(self.omega),)
        self.omega = tuple(float(w) for w in self.omega)
        if self.convention not in ("gross", "net"):
            raise DataError(f"convention must be gross or net, got {self.convention!r}")
        if self.horizon < 1:
            raise DataError("horizon must be >= 1")
        if not self.x0 > 0:
            raise DataError("x0 must be positive")
        if any(w <= 0 for w in self.omega):
            raise DataError("risk aversion omega must be positive")
        if self.est_len < 0 or self.upd_len < 0:
            raise DataError("segment lengths must be non-negative")
        parse_exit(self.exit, self.horizon)

    @property
    def r0(self) -> float:
        """Gross riskless return per period."""
        return 1.0 + self.riskfree_net

    @property
    def exit_distribution(self) -> ExitDistribution:
        return parse_exit(self.exit, self.horizon)

    def digest(self) -> str:
        text = ";".join(f"{k}={v!r}" for k, v in sorted(asdict(self).items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _coerce(name: str, raw: str):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise DataError(f"unknown config key {name!r}")
    raw = raw.strip()
    try:
        if name == "omega":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if name in ("horizon", "seed", "est_len", "upd_len", "order", "p_max"):
            return int(raw)
        if name in ("x0", "riskfree_net"):
            return float(raw)
    except ValueError:
        raise DataError(f"bad value for {name}: {raw!r}") from None
    return raw


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """Flat ``key = value`` file (``#`` comments) with overrides applied on top."""
    values: Dict[str, object] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise DataError(f"{path}: no such config file")
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected key = value")
            key, raw = line.split("=", 1)
            values[key.strip()] = _coerce(key.strip(), raw)
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = _coerce(key, str(raw))
    return RunConfig(**values)
