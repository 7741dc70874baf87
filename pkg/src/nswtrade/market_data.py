"""OHLC candle ingestion and construction of base and log-return series."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, DomainError, EmptyInputError, LengthError, OrderError, ParseError


@dataclass(frozen=True)
class Bar:
    timestamp: int
    open: float
    high: float
    low: float
    close: float
    volume: float = 0.0

    def check(self) -> str | None:
        """Return a description of the first violated invariant, or None."""
        vals = (self.open, self.high, self.low, self.close)
        if not all(math.isfinite(v) for v in vals):
            return "non-finite price"
        if self.low > self.high:
            return f"low {self.low} > high {self.high}"
        if self.low > min(self.open, self.close):
            return "low above open/close"
        if self.high < max(self.open, self.close):
            return "high below open/close"
        if self.volume < 0:
            return "negative volume"
        return None


@dataclass
class BarSeries:
    """Column-oriented bar storage; ``bars`` materialises :class:`Bar` rows on demand."""

    symbol: str
    frame: int
    timestamp: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    open: np.ndarray = field(default_factory=lambda: np.zeros(0))
    high: np.ndarray = field(default_factory=lambda: np.zeros(0))
    low: np.ndarray = field(default_factory=lambda: np.zeros(0))
    close: np.ndarray = field(default_factory=lambda: np.zeros(0))
    volume: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_bars(cls, symbol: str, frame: int, bars: Iterable[Bar]) -> "BarSeries":
        bars = list(bars)
        ts = np.array([b.timestamp for b in bars], dtype=np.int64)
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            raise OrderError(f"{symbol}: timestamps must be strictly increasing")
        col = lambda name: np.array([getattr(b, name) for b in bars], dtype=float)
        return cls(symbol, frame, ts, col("open"), col("high"), col("low"), col("close"), col("volume"))

    def __len__(self) -> int:
        return len(self.timestamp)

    def __getitem__(self, i: int) -> Bar:
        return Bar(int(self.timestamp[i]), float(self.open[i]), float(self.high[i]),
                   float(self.low[i]), float(self.close[i]), float(self.volume[i]))

    @property
    def bars(self) -> list[Bar]:
        return [self[i] for i in range(len(self))]

    def take(self, idx: np.ndarray) -> "BarSeries":
        return BarSeries(self.symbol, self.frame, self.timestamp[idx], self.open[idx], self.high[idx],
                         self.low[idx], self.close[idx], self.volume[idx])


class Combo(enum.Enum):
    HALF_SUM_OPEN_CLOSE = "HalfSumOpenClose"
    CLOSE = "Close"
    OHLC4 = "OHLC4"

    @classmethod
    def parse(cls, value: "Combo | str") -> "Combo":
        if isinstance(value, cls):
            return value
        for c in cls:
            if value in (c.value, c.name):
                return c
        raise ValueError(f"unknown price combination {value!r}")


@dataclass
class BaseSeries:
    symbol: str
    values: np.ndarray
    combo: Combo = Combo.HALF_SUM_OPEN_CLOSE

    def __len__(self) -> int:
        return len(self.values)


def _is_header(row: Sequence[str]) -> bool:
    try:
        float(row[0])
    except (ValueError, IndexError):
        return True
    return False


def load_candles(path, symbol: str, frame: int) -> BarSeries:
    """Read ``timestamp,open,high,low,close,volume`` rows (header optional).

    Market gaps are accepted: only strict monotonicity of timestamps is enforced.
    """
    bars: list[Bar] = []
    prev_ts = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and _is_header(row):
                continue
            if len(row) not in (5, 6):
                raise ParseError(f"expected 6 columns, got {len(row)}", lineno)
            try:
                ts = int(float(row[0]))
                o, h, l, c = (float(x) for x in row[1:5])
                v = float(row[5]) if len(row) == 6 and row[5].strip() else 0.0
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            bar = Bar(ts, o, h, l, c, v)
            problem = bar.check()
            if problem:
                raise ParseError(problem, lineno)
            if prev_ts is not None and ts <= prev_ts:
                raise OrderError(f"line {lineno}: timestamp {ts} does not increase (previous {prev_ts})")
            prev_ts = ts
            bars.append(bar)
    return BarSeries.from_bars(symbol, frame, bars)


def write_candles(series: BarSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "open", "high", "low", "close", "volume"])
        for i in range(len(series)):
            w.writerow([int(series.timestamp[i]), repr(float(series.open[i])), repr(float(series.high[i])),
                        repr(float(series.low[i])), repr(float(series.close[i])), repr(float(series.volume[i]))])


def base_series(bars: BarSeries, combo: Combo | str = Combo.HALF_SUM_OPEN_CLOSE) -> BaseSeries:
    combo = Combo.parse(combo)
    if len(bars) == 0:
        raise EmptyInputError(f"{bars.symbol}: no bars")
    if combo is Combo.HALF_SUM_OPEN_CLOSE:
        values = (bars.open + bars.close) / 2.0
    elif combo is Combo.CLOSE:
        values = bars.close.copy()
    else:
        values = (bars.open + bars.high + bars.low + bars.close) / 4.0
    return BaseSeries(bars.symbol, values, combo)


def log_returns(series) -> np.ndarray:
    """``ln(X_n / X_{n-1})``; accepts a :class:`BaseSeries` or any real sequence."""
    x = np.asarray(series.values if isinstance(series, BaseSeries) else series, dtype=float)
    if len(x) < 2:
        raise LengthError("log returns need at least two values")
    if np.any(~(x > 0)):
        raise DomainError("log returns need strictly positive values")
    return np.log(x[1:] / x[:-1])


def align_series(series: Sequence[BarSeries]) -> list[BarSeries]:
    """Restrict every series to the intersection of their timestamps (bar-index alignment)."""
    if not series:
        return []
    common = series[0].timestamp
    for s in series[1:]:
        common = np.intersect1d(common, s.timestamp, assume_unique=True)
    if len(common) == 0:
        raise AlignmentError("series share no timestamps")
    out = []
    for s in series:
        idx = np.searchsorted(s.timestamp, common)
        out.append(s.take(idx))
    return out


def random_walk_bars(symbol: str, n: int, seed: int = 0, start: float = 1.4, vol: float = 2e-4,
                     drift: float = 0.0, frame: int = 60, t0: int = 1313020800) -> BarSeries:
    """Synthetic bars from a geometric random walk sampled four times per bar."""
    rng = np.random.default_rng(seed)
    steps = rng.normal(drift / 4.0, vol / 2.0, size=(n, 4))
    path = start * np.exp(np.cumsum(steps.ravel())).reshape(n, 4)
    o = np.concatenate(([start], path[:-1, 3]))
    c = path[:, 3]
    hi = np.maximum(path.max(axis=1), o)
    lo = np.minimum(path.min(axis=1), o)
    ts = t0 + frame * np.arange(n, dtype=np.int64)
    return BarSeries(symbol, frame, ts, o, hi, lo, c, rng.integers(1, 500, size=n).astype(float))
