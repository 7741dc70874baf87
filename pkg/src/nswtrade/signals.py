"""Elementary decision generators mapping model or indicator state to {-1, 0, +1}.

The model-driven blocks follow the entry rule: go long when the forecast
increment of the first Haar coefficient is negative (``-dY1 > 0``) and the
stationary mass below zero exceeds ``1 - alpha1``; go short in the mirror case.
Indicator blocks (MACD, Bollinger, RSI) precompute a causal signal array once
per series; every entry depends only on data up to that bar.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthError


@dataclass(frozen=True)
class ElementarySignal:
    block_id: str
    symbol: str
    t: int
    u: int

    def __post_init__(self):
        if self.u not in (-1, 0, 1):
            raise ValueError("u must be -1, 0 or +1")


@dataclass(frozen=True)
class MacdParams:
    fast: int = 12
    slow: int = 26
    signal: int = 9


@dataclass(frozen=True)
class BollingerParams:
    period: int = 20
    width: float = 2.0


@dataclass(frozen=True)
class RsiParams:
    period: int = 14
    lower: float = 30.0
    upper: float = 70.0


@dataclass(frozen=True)
class CriterionParams:
    alpha1: float = 0.15
    macd: MacdParams = MacdParams()
    bb: BollingerParams = BollingerParams()

    def __post_init__(self):
        if not 0.0 < self.alpha1 < 0.5:
            raise ValueError("alpha1 must lie in (0, 0.5)")
        for p in (self.macd.fast, self.macd.slow, self.macd.signal, self.bb.period):
            if p <= 0:
                raise ValueError("indicator periods must be positive")


EPSILON_DYN = 1e-12


def composite_signal(dY1: float, P_s: float, alpha1: float, gate_passed: bool) -> int:
    """Statistical criterion; ``gate_passed`` means the shifted densities differ significantly."""
    if not gate_passed:
        return 0
    if -dY1 > 0 and P_s > 1.0 - alpha1:
        return 1
    if -dY1 < 0 and P_s < alpha1:
        return -1
    return 0


def dynamic_signal(dY1: float, epsilon: float = EPSILON_DYN) -> int:
    if abs(dY1) < epsilon:
        return 0
    return 1 if dY1 < 0 else -1


def ema(x, period: int) -> np.ndarray:
    """Exponential moving average with smoothing ``2 / (period + 1)``, seeded at ``x[0]``."""
    x = np.asarray(x, dtype=float)
    a = 2.0 / (period + 1.0)
    out = np.empty_like(x)
    e = x[0]
    for i, v in enumerate(x):
        e += a * (v - e)  # exact for constant input
        out[i] = e
    return out


def _cross(diff_prev: float, diff_now: float) -> int:
    if diff_prev <= 0.0 < diff_now:
        return 1
    if diff_prev >= 0.0 > diff_now:
        return -1
    return 0


def macd_lines(series, params: MacdParams = MacdParams()):
    x = np.asarray(series, dtype=float)
    line = ema(x, params.fast) - ema(x, params.slow)
    return line, ema(line, params.signal)


def macd_signals(series, params: MacdParams = MacdParams()) -> np.ndarray:
    """Per-bar MACD crossing signal; zero during the first ``slow + signal - 1`` bars."""
    x = np.asarray(series, dtype=float)
    out = np.zeros(len(x), dtype=int)
    if len(x) < 2:
        return out
    line, sig = macd_lines(x, params)
    d = line - sig
    for t in range(max(1, params.slow + params.signal - 1), len(x)):
        out[t] = _cross(d[t - 1], d[t])
    return out


def macd_signal(series, params: MacdParams = MacdParams()) -> int:
    """+1 when the MACD line crosses above its signal line at the last bar, -1 below."""
    if len(series) < params.slow + params.signal:
        raise LengthError(f"MACD needs {params.slow + params.signal} values")
    return int(macd_signals(series, params)[-1])


def _rolling_mean_std(x: np.ndarray, period: int):
    n = len(x)
    mean = np.full(n, np.nan)
    std = np.full(n, np.nan)
    if n < period:
        return mean, std
    w = np.lib.stride_tricks.sliding_window_view(x, period)
    mean[period - 1:] = w.mean(axis=1)
    std[period - 1:] = w.std(axis=1)
    return mean, std


def bollinger_signals(series, params: BollingerParams = BollingerParams()) -> np.ndarray:
    """+1 on a close back above the lower band, -1 on a close back below the upper band."""
    x = np.asarray(series, dtype=float)
    mean, std = _rolling_mean_std(x, params.period)
    lower = mean - params.width * std
    upper = mean + params.width * std
    out = np.zeros(len(x), dtype=int)
    for t in range(params.period, len(x)):
        if x[t - 1] < lower[t - 1] and x[t] >= lower[t]:
            out[t] = 1
        elif x[t - 1] > upper[t - 1] and x[t] <= upper[t]:
            out[t] = -1
    return out


def bollinger_signal(series, params: BollingerParams = BollingerParams()) -> int:
    if len(series) < params.period:
        raise LengthError(f"Bollinger bands need {params.period} values")
    return int(bollinger_signals(series, params)[-1])


def rsi(series, period: int = 14) -> np.ndarray:
    """Wilder relative strength index; NaN until ``period`` changes are available."""
    x = np.asarray(series, dtype=float)
    out = np.full(len(x), np.nan)
    if len(x) <= period:
        return out
    d = np.diff(x)
    gain = np.clip(d, 0, None)
    loss = np.clip(-d, 0, None)
    ag = gain[:period].mean()
    al = loss[:period].mean()
    for t in range(period, len(x)):
        if t > period:
            ag = (ag * (period - 1) + gain[t - 1]) / period
            al = (al * (period - 1) + loss[t - 1]) / period
        if al == 0.0:
            out[t] = 100.0 if ag > 0 else 50.0
        else:
            out[t] = 100.0 - 100.0 / (1.0 + ag / al)
    return out


def rsi_signals(series, params: RsiParams = RsiParams()) -> np.ndarray:
    r = rsi(series, params.period)
    out = np.zeros(len(r), dtype=int)
    for t in range(1, len(r)):
        if np.isnan(r[t - 1]):
            continue
        if r[t - 1] < params.lower <= r[t]:
            out[t] = 1
        elif r[t - 1] > params.upper >= r[t]:
            out[t] = -1
    return out


def rsi_signal(series, params: RsiParams = RsiParams()) -> int:
    if len(series) <= params.period + 1:
        raise LengthError(f"RSI needs more than {params.period + 1} values")
    return int(rsi_signals(series, params)[-1])


# --- block registry -------------------------------------------------------

@dataclass
class BarContext:
    """What a block may look at for one symbol at bar ``t``."""

    t: int
    dY1: float = 0.0
    P_s: float = 0.5
    gate_passed: bool = False


class Block:
    """A named generator of elementary signals."""

    name = "block"

    def prepare(self, prices: np.ndarray) -> None:
        pass

    def signal(self, ctx: BarContext) -> int:
        raise NotImplementedError


class StatisticalBlock(Block):
    name = "statistical"

    def __init__(self, alpha1: float = 0.15):
        if not 0.0 < alpha1 < 0.5:
            raise ValueError("alpha1 must lie in (0, 0.5)")
        self.alpha1 = alpha1

    def signal(self, ctx):
        return composite_signal(ctx.dY1, ctx.P_s, self.alpha1, ctx.gate_passed)


class DynamicBlock(Block):
    name = "dynamic"

    def __init__(self, epsilon: float = EPSILON_DYN):
        self.epsilon = epsilon

    def signal(self, ctx):
        return dynamic_signal(ctx.dY1, self.epsilon)


class _PrecomputedBlock(Block):
    _u: np.ndarray = None

    def signal(self, ctx):
        return int(self._u[ctx.t]) if self._u is not None and ctx.t < len(self._u) else 0


class MacdBlock(_PrecomputedBlock):
    name = "macd"

    def __init__(self, fast: int = 12, slow: int = 26, signal: int = 9):
        self.params = MacdParams(fast, slow, signal)

    def prepare(self, prices):
        self._u = macd_signals(prices, self.params)


class BollingerBlock(_PrecomputedBlock):
    name = "bollinger"

    def __init__(self, period: int = 20, width: float = 2.0):
        self.params = BollingerParams(period, width)

    def prepare(self, prices):
        self._u = bollinger_signals(prices, self.params)


class RsiBlock(_PrecomputedBlock):
    name = "rsi"

    def __init__(self, period: int = 14, lower: float = 30.0, upper: float = 70.0):
        self.params = RsiParams(period, lower, upper)

    def prepare(self, prices):
        self._u = rsi_signals(prices, self.params)


class ConstantBlock(Block):
    name = "constant"

    def __init__(self, value: int = 0):
        if value not in (-1, 0, 1):
            raise ValueError("value must be -1, 0 or +1")
        self.value = value

    def signal(self, ctx):
        return self.value


class ScheduleBlock(Block):
    """Emits fixed votes at chosen bars, e.g. ``{10: 1}`` forces a long vote at bar 10."""

    name = "schedule"

    def __init__(self, votes: dict | None = None):
        self.votes = {int(k): int(v) for k, v in (votes or {}).items()}

    def signal(self, ctx):
        return self.votes.get(ctx.t, 0)


REGISTRY: dict[str, type] = {
    cls.name: cls
    for cls in (StatisticalBlock, DynamicBlock, MacdBlock, BollingerBlock, RsiBlock, ConstantBlock, ScheduleBlock)
}


def register_block(cls: type) -> type:
    """Class decorator adding a :class:`Block` subclass to the registry."""
    REGISTRY[cls.name] = cls
    return cls


def make_block(name: str, **params) -> Block:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown signal block {name!r}; known: {sorted(REGISTRY)}") from None
    return cls(**params)
