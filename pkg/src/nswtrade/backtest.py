"""Deterministic bar-by-bar execution of the multi-symbol strategy.

A run has two phases. The per-symbol phase depends on prices only: wavelet
features, online model fitting, density synthesis on the slow cadence, the KS
gate and every block's vote. Symbols are independent there, so it may use a
thread pool. The execution phase then walks the bars in order: exits, trailing
stops, emergency closes, fusion and coupling of votes, allocation and order
emission. Its output does not depend on the number of threads.

Fill model: market orders fill at the bar close plus (buy) or minus (sell) half
the spread; take-profit and stop levels are mid-price levels that fill when the
bar's high/low reaches them, at the level less half the spread on the exit
side. The stop is tested before the take profit.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_DOWN, ROUND_HALF_EVEN, Decimal

import numpy as np

from . import assembly as asm
from .errors import (AlignmentError, ConfigError, DegenerateError, DensityOverflowError, GridError,
                     InsufficientDataError)
from .ledger import Statement, TradeRecord
from .market_data import BarSeries, Combo, align_series, base_series
from .portfolio import Allocation, allocate, estimate_profit_stats, rebalance_trigger
from .sde import Observation, RunningScale, SdeModel, forecast_increment, rm_update
from .signals import BarContext, make_block
from .stationary import KsGate, prob_negative, solve_stationary, ks_gate
from .wavelet import haar_detail_stream

CENT = Decimal("0.01")
LOT = Decimal("0.01")
WARMUP_BARS = 50


@dataclass
class ExecConfig:
    tp_mult: float = 2.0
    trail_mult: float = 3.0
    emergency_share: float = 0.3
    second_pos_delay: int = 60
    slow_window: int = 240
    spread: dict = field(default_factory=dict)  # symbol -> price units
    default_spread: float = 0.0002
    alpha: float = 0.15
    alpha1: float = 0.15
    frame: int = 60
    initial_deposit: float = 5000.0
    s_min: float = 0.5
    contract_size: float = 100000.0
    risk_fraction: float = 10.0
    price_digits: int = 5
    account_currency: str = "usd"

    def validate(self) -> None:
        for name in ("tp_mult", "trail_mult", "contract_size", "risk_fraction", "initial_deposit", "frame"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"exec.{name} must be positive")
        if not 0.0 < self.emergency_share < 1.0:
            raise ConfigError("exec.emergency_share must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("exec.alpha must lie in (0, 1)")
        if not 0.0 < self.alpha1 < 0.5:
            raise ConfigError("exec.alpha1 must lie in (0, 0.5)")
        if self.second_pos_delay < 0:
            raise ConfigError("exec.second_pos_delay must be non-negative")
        if self.slow_window < 2:
            raise ConfigError("exec.slow_window must be at least 2")
        if self.s_min < 0:
            raise ConfigError("exec.s_min must be non-negative")
        if any(v < 0 for v in self.spread.values()) or self.default_spread < 0:
            raise ConfigError("spreads must be non-negative")

    def spread_of(self, symbol: str) -> float:
        return float(self.spread.get(symbol, self.default_spread))


@dataclass
class PipelineConfig:
    combo: str = "HalfSumOpenClose"
    p1: int = 5
    order_F: int = 3
    order_G: int = 2
    beta_rm: float = 0.01
    T: int = 240
    grid_width: float = 8.0  # half-width of the density grid, in running standard deviations
    grid_points: int = 257
    variant: str = "half_ratio"
    blocks: list = field(default_factory=lambda: [("statistical", {}), ("dynamic", {})])
    beta_w: float = 0.01
    init_weight: float = 1.0
    compensation: float = 0.5
    accuracy_window: int = 100
    coupling_window: int = 240
    coupling_every: int = 60
    portfolio_beta: float = 0.25
    bucket_seconds: int = 3600
    rebalance_n_min: int = 10
    rebalance_t_max: int = 120
    state_machine: bool = True  # False keeps every symbol Active

    def validate(self) -> None:
        try:
            Combo.parse(self.combo)
        except ValueError as e:
            raise ConfigError(f"model.combo: {e}") from None
        for name in ("p1", "T", "grid_points", "coupling_window", "coupling_every", "accuracy_window",
                     "bucket_seconds", "rebalance_n_min", "rebalance_t_max"):
            if not getattr(self, name) >= 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.order_F < 0 or self.order_G < 0:
            raise ConfigError("basis orders must be non-negative")
        if not self.beta_rm > 0:
            raise ConfigError("model.beta_rm must be positive")
        if self.grid_points < 64:
            raise ConfigError("model.grid_points must be at least 64")
        if not self.grid_width > 0:
            raise ConfigError("model.grid_width must be positive")
        if self.variant not in ("half_ratio", "fokker_planck"):
            raise ConfigError("model.variant must be 'half_ratio' or 'fokker_planck'")
        if not 0.0 < self.compensation <= 1.0:
            raise ConfigError("assembly.compensation must lie in (0, 1]")
        if self.beta_w < 0:
            raise ConfigError("assembly.beta_w must be non-negative")
        if not self.blocks:
            raise ConfigError("signals.blocks must name at least one block")
        if not math.isfinite(self.portfolio_beta):
            raise ConfigError("portfolio.beta must be finite")


# --- execution primitives ----------------------------------------------------

def _sign(side) -> int:
    if side in (1, "long", "buy"):
        return 1
    if side in (-1, "short", "sell"):
        return -1
    raise ValueError(f"unknown side {side!r}")


def take_profit_level(side, open_price: float, slow_rms: float, tp_mult: float, min_distance: float = 0.0) -> float:
    """``open +/- tp_mult * slow_rms``, at least ``min_distance`` away from the open."""
    if slow_rms < 0:
        raise ValueError("slow_rms must be non-negative")
    return open_price + _sign(side) * max(tp_mult * slow_rms, min_distance)


@dataclass
class Position:
    ticket: int
    symbol: str
    side: int
    size: Decimal
    open_time: int  # bar index
    open_price: float  # fill price
    open_mid: float
    tp: float
    trailing_stop: float
    floating_pnl: float = 0.0
    timestamp: int = 0

    def __post_init__(self):
        if not self.size > 0:
            raise ValueError("position size must be positive")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")


def trailing_stop_update(pos: Position, bar, slow_rms: float, trail_mult: float) -> Position:
    """Tighten the stop toward ``close -/+ trail_mult * slow_rms``; never loosen it."""
    close = bar.close if hasattr(bar, "close") else float(bar)
    if pos.side > 0:
        pos.trailing_stop = max(pos.trailing_stop, close - trail_mult * slow_rms)
    else:
        pos.trailing_stop = min(pos.trailing_stop, close + trail_mult * slow_rms)
    return pos


def emergency_check(positions, free_assets: float, emergency_share: float) -> list:
    """Tickets whose floating loss strictly exceeds ``emergency_share * free_assets``."""
    if not free_assets > 0:
        raise ValueError("free assets must be positive")
    limit = emergency_share * free_assets
    return [p.ticket for p in positions if -p.floating_pnl > limit]


def second_position_gate(existing: Position, now: int, cfg: ExecConfig) -> bool:
    return existing.floating_pnl < 0 and now - existing.open_time >= cfg.second_pos_delay


def slow_rms(prices, window: int) -> np.ndarray:
    """Trailing RMS of price minus its ``window``-bar moving average; NaN during warm-up."""
    x = np.asarray(prices, dtype=float)
    n = len(x)
    out = np.full(n, np.nan)
    if n < 2 * window - 1:
        return out
    c = np.concatenate(([0.0], np.cumsum(x)))
    ma = np.full(n, np.nan)
    ma[window - 1:] = (c[window:] - c[:-window]) / window
    dev = x - ma
    d = dev[window - 1:]
    c1 = np.concatenate(([0.0], np.cumsum(d)))
    c2 = np.concatenate(([0.0], np.cumsum(d * d)))
    m = (c1[window:] - c1[:-window]) / window
    v = (c2[window:] - c2[:-window]) / window - m * m
    out[2 * window - 2:] = np.sqrt(np.maximum(v, 0.0))
    return out


def quote_factor(symbol: str, price: float, account: str = "usd") -> float:
    """Account-currency value of one unit of the quote currency (``symbol`` as ``basequote``)."""
    s = symbol.lower()
    if s[3:6] == account:
        return 1.0
    if s[:3] == account:
        return 1.0 / price
    return 1.0  # crosses: no conversion series available


def _pnl(pos: Position, exit_price: float, cfg: ExecConfig) -> float:
    units = float(pos.size) * cfg.contract_size
    return pos.side * (exit_price - pos.open_price) * units * quote_factor(pos.symbol, exit_price, cfg.account_currency)


def _cents(x: float) -> int:
    return int(Decimal(repr(float(x))).quantize(CENT, rounding=ROUND_HALF_EVEN) * 100)


# --- per-symbol phase ----------------------------------------------------------

@dataclass
class SymbolTrack:
    symbol: str
    timestamps: np.ndarray
    close: np.ndarray
    high: np.ndarray
    low: np.ndarray
    base: np.ndarray
    dY1: np.ndarray
    P_s: np.ndarray
    gate: np.ndarray
    rms: np.ndarray
    votes: np.ndarray  # n_bars x n_blocks
    density_failures: int = 0
    model: SdeModel | None = None


def _density_grid(scale, width):
    half = abs(scale.mean1) + width * scale.std1
    return (-half, half)


def symbol_pipeline(series: BarSeries, pcfg: PipelineConfig, ecfg: ExecConfig) -> SymbolTrack:
    """Model, density, gate and block votes for one symbol; depends on its prices only."""
    X = base_series(series, pcfg.combo).values
    n = len(X)
    p1 = pcfg.p1
    y1 = np.full(n, np.nan)
    y2 = np.full(n, np.nan)
    if n >= 4 * p1:
        # the model works with the textbook Haar sign: Y1 falls while prices rise
        y1 = -haar_detail_stream(X, p1)
        y2 = -haar_detail_stream(X, 2 * p1)
    T = pcfg.T
    model = None
    warm = []  # increments seen before the model starts; they set its initial diffusion
    n_warm = min(T, WARMUP_BARS)
    scale = RunningScale(horizon=T)
    gate = KsGate(alpha=ecfg.alpha)
    dY1 = np.zeros(n)
    P_s = np.full(n, 0.5)
    passed = np.zeros(n, dtype=bool)
    prev_d = None
    cur_P, cur_gate = 0.5, False
    failures = 0
    for t in range(1, n):
        a, b = y1[t - 1], y2[t - 1]
        if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(y1[t])):
            continue
        scale.update(a, b)
        if model is None:
            warm.append(y1[t] - a)
            if len(warm) < n_warm:
                continue
            g0 = float(np.std(warm)) or 1.0
            model = SdeModel.zeros(pcfg.order_F, pcfg.order_G, g0=g0, beta_rm=pcfg.beta_rm, avg_horizon=T)
        model.scale = scale.scale
        model = rm_update(model, Observation(a, b, y1[t] - a))
        avg = model.averaged()
        if model.n_updates % T == 0:
            lo, hi = _density_grid(model.scale, pcfg.grid_width)
            try:
                d = solve_stationary(avg, (lo, hi, pcfg.grid_points), variant=pcfg.variant, t_stamp=t)
            except (DensityOverflowError, DegenerateError, GridError, FloatingPointError):
                failures += 1
                d = None
            if d is not None:
                cur_P = prob_negative(d)
                if prev_d is not None:
                    g = ks_gate(prev_d, d, KsGate(gate.alpha, gate.k_alpha, min(model.n_updates, T)))
                    cur_gate = g.distinguishable
                else:
                    cur_gate = False
            else:
                cur_P, cur_gate = 0.5, False
            prev_d = d
        dY1[t] = forecast_increment(avg, y1[t], y2[t])
        P_s[t] = cur_P
        passed[t] = cur_gate

    blocks = []
    for name, params in pcfg.blocks:
        params = dict(params)
        if name == "statistical":
            params.setdefault("alpha1", ecfg.alpha1)
        blk = make_block(name, **params)
        blk.prepare(X)
        blocks.append(blk)
    votes = np.zeros((n, len(blocks)), dtype=np.int8)
    for t in range(n):
        ctx = BarContext(t, float(dY1[t]), float(P_s[t]), bool(passed[t]))
        for j, blk in enumerate(blocks):
            votes[t, j] = blk.signal(ctx)
    return SymbolTrack(series.symbol, series.timestamp, series.close, series.high, series.low, X,
                       dY1, P_s, passed, slow_rms(series.close, ecfg.slow_window), votes, failures, model)


# --- execution phase -------------------------------------------------------------

@dataclass
class EquityCurve:
    timestamps: np.ndarray
    balance: np.ndarray
    equity: np.ndarray
    floating_pnl: np.ndarray
    open_positions: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["timestamp", "balance", "equity", "floating_pnl", "open_positions"])
        for row in zip(self.timestamps.tolist(), self.balance.tolist(), self.equity.tolist(),
                       self.floating_pnl.tolist(), self.open_positions.tolist()):
            w.writerow([row[0], f"{row[1]:.2f}", f"{row[2]:.2f}", f"{row[3]:.2f}", row[4]])
        return buf.getvalue()


@dataclass
class RunResult:
    statement: Statement
    equity: EquityCurve
    allocations: list  # (timestamp, Allocation)
    tracks: list
    max_open_per_symbol: int = 0

    def allocations_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["timestamp", "symbol", "share", "J", "beta"])
        for ts, a in self.allocations:
            for s, v in zip(a.symbols, a.n):
                w.writerow([ts, s, f"{v:.6f}", f"{a.J:.8g}", a.beta])
        return buf.getvalue()


def _when(ts: int) -> datetime:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).replace(tzinfo=None)


class _Book:
    """Account state of the execution phase; balance kept in integer cents."""

    def __init__(self, cfg: ExecConfig, first_ts: int):
        self.cfg = cfg
        self.balance_c = _cents(cfg.initial_deposit)
        self.next_ticket = 2
        self.open: dict = {}
        self.closed: list = []
        self.closed_since = 0
        q = Decimal(1).scaleb(-cfg.price_digits)
        self.q = q
        self.deposit = TradeRecord(1, _when(first_ts), "balance", "Deposit",
                                   profit=Decimal(self.balance_c).scaleb(-2))

    def price(self, x: float) -> Decimal:
        return Decimal(repr(float(x))).quantize(self.q, rounding=ROUND_HALF_EVEN)

    @property
    def balance(self) -> float:
        return self.balance_c / 100.0

    def positions(self, symbol=None) -> list:
        return [p for p in self.open.values() if symbol is None or p.symbol == symbol]

    def close(self, pos: Position, exit_price: float, t: int, ts: int, reason: str) -> None:
        cents = _cents(_pnl(pos, exit_price, self.cfg))
        self.balance_c += cents
        self.closed.append(TradeRecord(
            pos.ticket, _when(pos.timestamp), "buy" if pos.side > 0 else "sell", pos.symbol, pos.size,
            self.price(pos.open_price), self.price(pos.trailing_stop), self.price(pos.tp), _when(ts),
            self.price(exit_price), profit=Decimal(cents).scaleb(-2), close_reason=reason))
        del self.open[pos.ticket]
        self.closed_since += 1

    def open_record(self, pos: Position, mark: float) -> TradeRecord:
        return TradeRecord(pos.ticket, _when(pos.timestamp), "buy" if pos.side > 0 else "sell", pos.symbol,
                           pos.size, self.price(pos.open_price), self.price(pos.trailing_stop),
                           self.price(pos.tp), None, self.price(mark),
                           profit=Decimal(_cents(pos.floating_pnl)).scaleb(-2))


def lot_size(share: float, balance: float, price: float, cfg: ExecConfig) -> Decimal:
    """``share * balance * risk_fraction / (contract_size * price)`` lots, floored to 0.01, at least 0.01."""
    raw = share * balance * cfg.risk_fraction / (cfg.contract_size * price)
    lots = Decimal(repr(float(max(raw, 0.0)))).quantize(LOT, rounding=ROUND_DOWN)
    return max(lots, LOT)


def run(data, pipeline: PipelineConfig | None = None, cfg: ExecConfig | None = None, seed: int = 0,
        threads: int = 1) -> RunResult:
    """Backtest ``data`` (a list of :class:`BarSeries`) and return the statement and equity curve."""
    pipeline = pipeline or PipelineConfig()
    cfg = cfg or ExecConfig()
    pipeline.validate()
    cfg.validate()
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    if not data:
        raise AlignmentError("no symbols to trade")
    series = align_series(list(data))
    syms = [s.symbol for s in series]
    if len(set(syms)) != len(syms):
        raise ConfigError("duplicate symbols")
    n = len(series[0])
    if threads == 1 or len(series) == 1:
        tracks = [symbol_pipeline(s, pipeline, cfg) for s in series]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            tracks = list(ex.map(lambda s: symbol_pipeline(s, pipeline, cfg), series))

    K = len(tracks)
    ts = tracks[0].timestamps
    book = _Book(cfg, int(ts[0]))
    fusion = asm.FusionState(len(pipeline.blocks), syms, pipeline.beta_w, pipeline.compensation,
                             pipeline.accuracy_window, pipeline.init_weight)
    logret = np.diff(np.log(np.column_stack([tr.base for tr in tracks])), axis=0)
    cm = asm.CouplingMatrix(np.eye(K), np.eye(K, dtype=bool), 0)
    alloc = Allocation(list(syms), np.full(K, 1.0 / K), float("nan"), pipeline.portfolio_beta)
    allocations = [(int(ts[0]), alloc)]
    last_rebalance = 0
    n_rebalances = 0
    prev_U = np.zeros(K)
    prev_u = [None] * K
    bal_arr = np.empty(n)
    fl_arr = np.empty(n)
    cnt_arr = np.empty(n, dtype=int)
    max_open = 0
    spreads = [cfg.spread_of(s) for s in syms]

    for t in range(n):
        stamp = int(ts[t])
        # exits on this bar's range, stop first
        for pos in sorted(book.open.values(), key=lambda p: p.ticket):
            if pos.open_time >= t:
                continue
            k = syms.index(pos.symbol)
            tr, half = tracks[k], 0.5 * spreads[k]
            if pos.side > 0:
                if tr.low[t] <= pos.trailing_stop:
                    book.close(pos, pos.trailing_stop - half, t, stamp, "sl")
                elif tr.high[t] >= pos.tp:
                    book.close(pos, pos.tp - half, t, stamp, "tp")
            else:
                if tr.high[t] >= pos.trailing_stop:
                    book.close(pos, pos.trailing_stop + half, t, stamp, "sl")
                elif tr.low[t] <= pos.tp:
                    book.close(pos, pos.tp + half, t, stamp, "tp")
        # mark to market and tighten stops
        for pos in book.open.values():
            k = syms.index(pos.symbol)
            c, half = tracks[k].close[t], 0.5 * spreads[k]
            pos.floating_pnl = _pnl(pos, c - pos.side * half, cfg)
            r = tracks[k].rms[t]
            if math.isfinite(r):
                trailing_stop_update(pos, c, r, cfg.trail_mult)
        equity = book.balance + sum(p.floating_pnl for p in book.open.values())
        if equity > 0:
            for ticket in emergency_check(sorted(book.open.values(), key=lambda p: p.ticket), equity,
                                          cfg.emergency_share):
                pos = book.open[ticket]
                k = syms.index(pos.symbol)
                book.close(pos, tracks[k].close[t] - pos.side * 0.5 * spreads[k], t, stamp, "emergency")

        # fusion with adaptation toward the realised direction of the last bar
        U = np.zeros(K)
        for k, tr in enumerate(tracks):
            if t > 0 and prev_u[k] is not None:
                change = tr.base[t] - tr.base[t - 1]
                fusion.record(syms[k], asm.forecast_correct(prev_U[k], change))
                if change != 0.0:
                    asm.adapt_weights(fusion, prev_u[k], 1 if change > 0 else -1, syms[k])
            u = tr.votes[t].astype(float)
            Uk = asm.fuse(u, fusion.weights[syms[k]])
            prev_U[k] = Uk
            prev_u[k] = u
            U[k] = asm.apply_compensation(Uk, fusion.last_correct(syms[k]), fusion.compensation)
        if pipeline.state_machine:
            states = [fusion.state(s).state for s in syms]
        else:
            states = [asm.State.ACTIVE] * K
        include = [s is not asm.State.PASSIVE for s in states]
        if K > 1 and t >= 3 and t % pipeline.coupling_every == 0:
            w = logret[max(0, t - pipeline.coupling_window):t]
            if len(w) >= 3:
                cm = asm.update_coupling(w)
        S = asm.couple(U, cm, include) if K > 1 else U

        # loosely coupled reallocation
        if rebalance_trigger(book.closed_since, t - last_rebalance, pipeline.rebalance_n_min,
                             pipeline.rebalance_t_max):
            last_rebalance = t
            book.closed_since = 0
            alloc = _reallocate(book, syms, pipeline, seed + n_rebalances, alloc)
            n_rebalances += 1
            allocations.append((stamp, alloc))

        # orders
        for k, tr in enumerate(tracks):
            if states[k] is not asm.State.ACTIVE or abs(S[k]) < cfg.s_min or t == n - 1:
                continue
            r = tr.rms[t]
            if not (math.isfinite(r) and r >= 0):
                continue
            mine = book.positions(syms[k])
            if len(mine) >= 2 or (len(mine) == 1 and not second_position_gate(mine[0], t, cfg)):
                continue
            side = 1 if S[k] > 0 else -1
            mid, half = tr.close[t], 0.5 * spreads[k]
            size = lot_size(alloc.share(syms[k]), book.balance, mid, cfg)
            pos = Position(book.next_ticket, syms[k], side, size, t, mid + side * half, mid,
                           take_profit_level(side, mid, r, cfg.tp_mult, min_distance=2 * half),
                           mid - side * cfg.trail_mult * r, timestamp=stamp)
            pos.floating_pnl = _pnl(pos, mid - side * half, cfg)
            book.open[pos.ticket] = pos
            book.next_ticket += 1

        floating = sum(p.floating_pnl for p in book.open.values())
        bal_arr[t] = book.balance
        fl_arr[t] = floating
        cnt_arr[t] = len(book.open)
        per = {}
        for p in book.open.values():
            per[p.symbol] = per.get(p.symbol, 0) + 1
        max_open = max([max_open] + list(per.values()))

    open_recs = []
    for p in sorted(book.open.values(), key=lambda p: p.ticket):
        k = syms.index(p.symbol)
        open_recs.append(book.open_record(p, tracks[k].close[-1] - p.side * 0.5 * spreads[k]))
    stmt = Statement(account=0, currency=cfg.account_currency.upper(),
                     generated=_when(int(ts[-1])).strftime("%Y %B %d, %H:%M"),
                     closed=list(book.closed), open=open_recs, deposits=[book.deposit])
    curve = EquityCurve(ts.copy(), bal_arr, bal_arr + fl_arr, fl_arr, cnt_arr)
    return RunResult(stmt, curve, allocations, tracks, max_open)


def _reallocate(book: _Book, syms: list, pipeline: PipelineConfig, seed: int, current: Allocation) -> Allocation:
    """Shares from closed-trade statistics; symbols without enough trades keep ``1/K``."""
    K = len(syms)
    curve = [(book.deposit.open_time, float(book.deposit.profit))]
    bal = float(book.deposit.profit)
    for r in book.closed:
        bal += float(r.net)
        curve.append((r.close_time, bal))
    try:
        stats = estimate_profit_stats(book.closed, curve, pipeline.bucket_seconds)
    except InsufficientDataError:
        return current
    a = allocate(stats, pipeline.portfolio_beta, seed=seed, certify_max_k=0)
    known = len(stats.symbols) / K
    shares = np.array([a.share(s) * known if s in stats.symbols else 1.0 / K for s in syms])
    return Allocation(list(syms), shares, a.J, a.beta)
