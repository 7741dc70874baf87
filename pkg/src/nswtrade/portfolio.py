"""Deposit allocation across symbols from closed-trade statistics.

Shares ``n`` on the simplex maximise ``J(n) = n . x + beta n^T R n`` where ``x``
is the mean balance-normalised profit per closed trade and ``R`` the correlation
of bucketed trade returns. ``beta`` may take either sign; with ``beta > 0`` the
quadratic rewards concentration in correlated symbols.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import InsufficientDataError, NonFiniteError

DEFAULT_BETA = 0.25


@dataclass
class ProfitStats:
    symbols: list
    x: np.ndarray
    R: np.ndarray
    n_trades: np.ndarray


@dataclass
class Allocation:
    symbols: list
    n: np.ndarray
    J: float
    beta: float
    grid_J: float | None = None  # dense grid-search value, small K only

    def share(self, symbol) -> float:
        return float(self.n[self.symbols.index(symbol)]) if symbol in self.symbols else 0.0


def _epoch(t) -> float:
    if isinstance(t, datetime):
        return t.timestamp()
    return float(t)


def _balance_lookup(balance_curve):
    """Step function ``t -> balance`` from ``(time, balance)`` pairs sorted by time."""
    pts = sorted((_epoch(t), float(b)) for t, b in balance_curve)
    times = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])

    def at(t):
        i = np.searchsorted(times, _epoch(t), side="right") - 1
        return vals[max(i, 0)]
    return at


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0
    ca, cb = a - a.mean(), b - b.mean()
    den = np.sqrt((ca @ ca) * (cb @ cb))
    return float(np.clip((ca @ cb) / den, -1.0, 1.0)) if den > 0 else 0.0


def estimate_profit_stats(trades, balance_curve, bucket_seconds: int = 3600, min_trades: int = 2) -> ProfitStats:
    """Mean normalised profit per symbol and the bucketed correlation of trade returns.

    ``trades`` are closed records with ``item``, ``open_time``, ``close_time`` and
    ``net``; ``balance_curve`` lists ``(time, balance)`` steps and supplies the
    balance at each trade's open. Symbols with fewer than ``min_trades`` trades are
    left out.
    """
    at = _balance_lookup(balance_curve)
    per = {}
    for tr in trades:
        bal = at(tr.open_time)
        if not bal > 0:
            raise InsufficientDataError(f"non-positive balance at {tr.open_time}")
        per.setdefault(tr.item, []).append((_epoch(tr.close_time), float(tr.net) / bal))
    symbols = sorted(s for s, v in per.items() if len(v) >= min_trades)
    if not symbols:
        raise InsufficientDataError(f"no symbol has {min_trades} closed trades")
    x = np.array([np.mean([r for _, r in per[s]]) for s in symbols])
    buckets = []
    for s in symbols:
        b = {}
        for t, r in per[s]:
            k = int(t // bucket_seconds)
            b[k] = b.get(k, 0.0) + r
        buckets.append(b)
    K = len(symbols)
    R = np.eye(K)
    for i, j in itertools.combinations(range(K), 2):
        common = sorted(set(buckets[i]) & set(buckets[j]))
        a = np.array([buckets[i][k] for k in common])
        b = np.array([buckets[j][k] for k in common])
        R[i, j] = R[j, i] = _corr(a, b)
    return ProfitStats(symbols, x, R, np.array([len(per[s]) for s in symbols]))


def objective(n, x, R, beta: float) -> float:
    n = np.asarray(n, dtype=float)
    return float(n @ x + beta * n @ R @ n)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{n >= 0, sum n = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _ascend(n, x, R, beta, iters=2000, tol=1e-13):
    L = 2.0 * abs(beta) * np.linalg.norm(R, 2) + 1e-12
    step = 1.0 / L
    J = objective(n, x, R, beta)
    for _ in range(iters):
        nn = project_simplex(n + step * (x + 2.0 * beta * R @ n))
        Jn = objective(nn, x, R, beta)
        if Jn < J - 1e-15:
            break
        done = np.max(np.abs(nn - n)) < tol
        n, J = nn, Jn
        if done:
            break
    return n, J


def _face_candidates(x, R, beta, max_k=10):
    """Stationary points of ``J`` on the relative interior of every face of the simplex."""
    K = len(x)
    if K > max_k:
        return
    for size in range(2, K + 1):
        for S in itertools.combinations(range(K), size):
            S = list(S)
            A = np.zeros((size + 1, size + 1))
            A[:size, :size] = 2.0 * beta * R[np.ix_(S, S)]
            A[:size, size] = -1.0
            A[size, :size] = 1.0
            rhs = np.concatenate([-x[S], [1.0]])
            try:
                sol = np.linalg.solve(A, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(sol)) and np.all(sol[:size] >= -1e-12):
                n = np.zeros(K)
                n[S] = np.maximum(sol[:size], 0.0)
                yield n / n.sum()


def grid_search(x, R, beta: float, step: float = 0.01):
    """Best ``J`` over the simplex lattice with spacing ``step`` (use for K <= 4)."""
    x = np.asarray(x, dtype=float)
    K = len(x)
    m = int(round(1.0 / step))
    axes = np.meshgrid(*[np.arange(m + 1)] * (K - 1), indexing="ij")
    head = np.stack([a.ravel() for a in axes], axis=1) if K > 1 else np.zeros((1, 0))
    head = head[head.sum(axis=1) <= m]
    pts = np.column_stack([head, m - head.sum(axis=1)]) / m
    J = pts @ x + beta * np.einsum("ij,jk,ik->i", pts, R, pts)
    i = int(np.argmax(J))
    return float(J[i]), pts[i]


def allocate(stats: ProfitStats, beta: float = DEFAULT_BETA, seed: int = 0, restarts: int = 8,
             certify_max_k: int = 3) -> Allocation:
    """Maximise ``J`` over the simplex.

    Projected gradient ascent runs from the uniform point, every vertex and
    ``restarts`` random interior points; stationary points of each face are
    added as candidates for small K. For ``K <= certify_max_k`` the grid-search
    value is attached as a certificate.
    """
    x = np.asarray(stats.x, dtype=float)
    R = np.asarray(stats.R, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(R)) and np.isfinite(beta)):
        raise NonFiniteError("profit statistics or beta contain non-finite values")
    K = len(x)
    if R.shape != (K, K):
        raise ValueError("R must be K x K")
    rng = np.random.default_rng(seed)
    starts = [np.full(K, 1.0 / K)] + list(np.eye(K)) + list(rng.dirichlet(np.ones(K), size=restarts))
    best_n, best_J = None, -np.inf
    for s in starts:
        n, J = _ascend(s, x, R, beta)
        if J > best_J + 1e-15:
            best_n, best_J = n, J
    for n in _face_candidates(x, R, beta):
        J = objective(n, x, R, beta)
        if J > best_J + 1e-15:
            best_n, best_J = n, J
    cert = grid_search(x, R, beta)[0] if K <= certify_max_k else None
    return Allocation(list(stats.symbols), best_n, float(best_J), float(beta), cert)


def rebalance_trigger(closed_since_last: int, elapsed_bars: int, n_min: int = 10, t_max: int = 120) -> bool:
    if closed_since_last < 0 or elapsed_bars < 0:
        raise ValueError("counters must be non-negative")
    return closed_since_last >= n_min or elapsed_bars >= t_max
