import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from mvbayes.data_io import (
    PriceSeries,
    RunConfig,
    align,
    load_config,
    load_prices,
    parse_exit,
    split,
    to_returns,
    write_prices,
)
from mvbayes.errors import DataError

D = [dt.date(2020, 1, 6) + dt.timedelta(weeks=i) for i in range(10)]


def _write(tmp_path, text):
    path = tmp_path / "prices.csv"
    path.write_text(text)
    return path


class TestLoad:
    def test_basic(self, tmp_path):
        path = _write(tmp_path, "date,A,B\n2020-01-06,10,20\n2020-01-13,11,19.5\n")
        s = load_prices(path)
        assert s.tickers == ("A", "B")
        assert s.dates == (dt.date(2020, 1, 6), dt.date(2020, 1, 13))
        assert_array_equal(s.prices, [[10, 20], [11, 19.5]])

    def test_missing_cell_drops_date(self, tmp_path):
        path = _write(tmp_path, "date,A,B\n2020-01-06,10,20\n2020-01-13,,19.5\n2020-01-20,12,19\n")
        s = load_prices(path)
        assert s.dates == (dt.date(2020, 1, 6), dt.date(2020, 1, 20))

    def test_non_numeric_names_location(self, tmp_path):
        path = _write(tmp_path, "date,A,B\n2020-01-06,10,20\n2020-01-13,11,abc\n")
        with pytest.raises(DataError, match=r":3: column 3 \(B\)"):
            load_prices(path)

    @pytest.mark.parametrize(
        "text, match",
        [
            ("price,A\n2020-01-06,1\n", "header"),
            ("date,A\n2020-13-06,1\n", "bad date"),
            ("date,A\n2020-01-06,-1\n", "positive"),
            ("date,A\n2020-01-06,1\n2020-01-06,2\n", "duplicate date"),
            ("date,A,A\n2020-01-06,1,2\n", "duplicate ticker"),
            ("date,A\n2020-01-06,1,2\n", "expected 2 fields"),
            ("", "empty"),
        ],
    )
    def test_malformed(self, tmp_path, text, match):
        with pytest.raises(DataError, match=match):
            load_prices(_write(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_prices(tmp_path / "nope.csv")

    def test_unsorted_dates_rejected(self):
        with pytest.raises(DataError, match="increasing"):
            PriceSeries((D[1], D[0]), ("A",), np.array([1.0, 2.0]))


class TestAlign:
    def test_intersection_order_preserved(self):
        a = {D[0]: 1.0, D[1]: 2.0, D[3]: 4.0}
        b = {D[3]: 5.0, D[0]: 6.0, D[2]: 7.0}
        s = align({"A": a, "B": b})
        assert s.dates == (D[0], D[3])
        assert_array_equal(s.prices, [[1.0, 6.0], [4.0, 5.0]])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sets(st.integers(0, 9), min_size=0), min_size=1, max_size=4))
    def test_drops_exactly_missing_dates(self, day_sets):
        cols = {f"T{i}": {D[d]: 1.0 + d for d in days} for i, days in enumerate(day_sets)}
        expected = sorted(set.intersection(*[set(c) for c in cols.values()]))
        assert list(align(cols).dates) == expected


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.floats(1e-6, 1e9, allow_nan=False, allow_infinity=False), min_size=1, max_size=10),
)
def test_write_read_roundtrip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    s = PriceSeries(tuple(D[: len(values)]), ("X",), np.array(values))
    write_prices(s, path)
    assert load_prices(path).equals(s)


class TestReturns:
    def test_gross_and_net(self):
        P = np.array([100.0, 110.0, 99.0])
        assert_allclose(to_returns(P, "gross"), [1.1, 0.9])
        assert_allclose(to_returns(P, "net"), [0.1, -0.1], atol=1e-15)

    def test_single_asset_series_is_1d(self):
        s = PriceSeries(tuple(D[:3]), ("A",), np.array([1.0, 2.0, 4.0]))
        assert to_returns(s).shape == (2,)

    def test_unknown_convention(self):
        with pytest.raises(ValueError):
            to_returns(np.array([1.0, 2.0]), "log")


class TestSplit:
    def test_default_lengths(self):
        est, upd = split(np.arange(156.0), 130, 26)
        assert len(est) == 130 and len(upd) == 26
        assert est[-1] + 1 == upd[0]

    def test_insufficient(self):
        with pytest.raises(DataError, match="needs 157 observations, 156 available"):
            split(np.arange(156.0), 156, 1)

    def test_empty_update(self):
        _, upd = split(np.arange(20.0), 10, 0)
        assert upd.shape == (0,)


class TestExitSpec:
    def test_uniform_tail(self):
        d = parse_exit("uniform_tail:0.001", 26)
        assert d.probs[-1] == pytest.approx(0.975)

    def test_ranges(self):
        d = parse_exit("1-15:0.001,16-25:0.05,26:0.485", 26)
        assert d.probs[0] == 0.001 and d.probs[20] == 0.05 and d.probs[25] == 0.485

    def test_certain(self):
        assert parse_exit("certain", 3).probs.tolist() == [0, 0, 1]

    @pytest.mark.parametrize("spec", ["1:0.5,2:0.6", "uniform_tail:x", "3:1.0", "garbage"])
    def test_invalid(self, spec):
        with pytest.raises(DataError):
            parse_exit(spec, 2)


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.horizon == 26 and cfg.x0 == 1.0
        assert cfg.r0 == pytest.approx(1.0057)

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# weekly\nhorizon = 13\nomega = 0.5, 1, 2\nexit = certain\nseed = 7\n")
        cfg = load_config(path, {"seed": "9"})
        assert cfg.horizon == 13
        assert cfg.omega == (0.5, 1.0, 2.0)
        assert cfg.seed == 9
        assert cfg.exit_distribution.probs[-1] == 1.0

    @pytest.mark.parametrize(
        "line", ["horizon = 0", "x0 = -1", "omega = 0", "exit = 1:0.5", "bogus = 1", "horizon"]
    )
    def test_invalid(self, tmp_path, line):
        path = tmp_path / "bad.cfg"
        path.write_text(line + "\n")
        with pytest.raises(DataError):
            load_config(path)

    def test_digest_depends_on_values(self):
        assert RunConfig().digest() == RunConfig().digest()
        assert RunConfig(seed=1).digest() != RunConfig(seed=2).digest()
