import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nswtrade.errors import (AlignmentError, DomainError, EmptyInputError, LengthError, OrderError,
                             ParseError)
from nswtrade.market_data import (Bar, BarSeries, Combo, align_series, base_series, load_candles,
                                  log_returns, random_walk_bars, write_candles)


def _write(tmp_path, text):
    p = tmp_path / "c.csv"
    p.write_text(text)
    return p


def test_row_maps_to_bar_fields(tmp_path):
    s = load_candles(_write(tmp_path, "1315224000,1.4112,1.4120,1.4105,1.4118,230\n"), "eurusd", 60)
    b = s[0]
    assert (b.timestamp, b.open, b.high, b.low, b.close, b.volume) == (1315224000, 1.4112, 1.4120, 1.4105, 1.4118, 230)


def test_header_is_optional(tmp_path):
    s = load_candles(_write(tmp_path, "timestamp,open,high,low,close,volume\n1,1,2,0.5,1.5,3\n2,1.5,2,1,1.2,0\n"),
                     "x", 60)
    assert len(s) == 2 and s.close.tolist() == [1.5, 1.2]


def test_empty_file_gives_empty_series(tmp_path):
    assert len(load_candles(_write(tmp_path, ""), "x", 60)) == 0


def test_high_below_low_names_line(tmp_path):
    with pytest.raises(ParseError) as e:
        load_candles(_write(tmp_path, "1,1,1,1,1,1\n2,1.0,0.9,1.1,1.0,5\n"), "x", 60)
    assert e.value.line == 2 and "line 2" in str(e.value)


def test_malformed_row_names_line(tmp_path):
    with pytest.raises(ParseError) as e:
        load_candles(_write(tmp_path, "1,1,1,1,1,1\n2,abc,1,1,1,1\n"), "x", 60)
    assert e.value.line == 2


def test_non_increasing_timestamps(tmp_path):
    with pytest.raises(OrderError):
        load_candles(_write(tmp_path, "5,1,1,1,1,1\n5,1,1,1,1,1\n"), "x", 60)


def test_missing_file():
    with pytest.raises(OSError):
        load_candles("/nonexistent/candles.csv", "x", 60)


def test_market_gap_accepted(tmp_path):
    s = load_candles(_write(tmp_path, "0,1,1,1,1,1\n60,1,1,1,1,1\n172800,1,1,1,1,1\n"), "x", 60)
    assert len(s) == 3


def test_write_read_round_trip(tmp_path):
    s = random_walk_bars("eurusd", 50, seed=3)
    write_candles(s, tmp_path / "rw.csv")
    r = load_candles(tmp_path / "rw.csv", "eurusd", 60)
    for a, b in (("open", "open"), ("high", "high"), ("low", "low"), ("close", "close")):
        np.testing.assert_array_equal(getattr(s, a), getattr(r, b))


def _series(bars):
    return BarSeries.from_bars("x", 60, bars)


def test_base_series_combos():
    s = _series([Bar(0, 2, 4, 2, 4), Bar(60, 1.6, 1.8, 1.4, 1.6)])
    assert base_series(s, Combo.HALF_SUM_OPEN_CLOSE).values.tolist() == [3.0, 1.6]
    assert base_series(s, "Close").values.tolist() == [4.0, 1.6]
    assert base_series(s, Combo.OHLC4).values[1] == pytest.approx(1.6, abs=1e-15)


def test_base_series_identity_when_open_equals_close():
    s = _series([Bar(0, 1.25, 1.3, 1.2, 1.25)])
    assert base_series(s).values[0] == 1.25


def test_base_series_empty():
    with pytest.raises(EmptyInputError):
        base_series(BarSeries("x", 60))


def test_log_returns_examples():
    assert log_returns([1, 1, 1]).tolist() == [0.0, 0.0]
    assert log_returns([1, math.e])[0] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(log_returns([2, 4, 2]), [0.6931471805599453, -0.6931471805599453], atol=1e-15)


def test_log_returns_errors():
    with pytest.raises(LengthError):
        log_returns([1.0])
    with pytest.raises(DomainError):
        log_returns([1.0, 0.0, 2.0])


def test_align_series_intersects_timestamps():
    a = random_walk_bars("a", 10, seed=1)
    b = a.take(np.arange(2, 10))
    out = align_series([a, b])
    assert len(out[0]) == len(out[1]) == 8
    np.testing.assert_array_equal(out[0].timestamp, out[1].timestamp)
    with pytest.raises(AlignmentError):
        align_series([a, random_walk_bars("c", 5, t0=10**9)])


pos = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@given(st.lists(pos, min_size=2, max_size=40), st.floats(min_value=1e-3, max_value=1e3))
def test_log_returns_scale_invariant(xs, a):
    np.testing.assert_allclose(log_returns(np.array(xs) * a), log_returns(xs), atol=1e-12)


@given(pos, st.integers(min_value=2, max_value=30))
def test_log_returns_of_constant_is_zero(c, n):
    assert np.all(log_returns([c] * n) == 0.0)


@given(st.integers(min_value=0, max_value=10_000))
def test_half_sum_inside_bar_range(seed):
    s = random_walk_bars("x", 20, seed=seed)
    v = base_series(s).values
    assert np.all(v >= s.low) and np.all(v <= s.high)
