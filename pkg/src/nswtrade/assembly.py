"""Fusion of elementary signals, cross-symbol coupling and the block state machine.

``U_k = tanh(w . u)`` per symbol, with weights adapted online toward the realised
direction of the next quotation change. Symbols are then coupled through
statistically significant quotation correlations, ``S = Lambda_masked U``.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DimensionError, LengthError

ACCURACY_WINDOW = 100
COUPLING_ALPHA = 0.05


def fuse(u, weights) -> float:
    u = np.asarray(u, dtype=float)
    w = np.asarray(weights, dtype=float)
    if u.shape != w.shape:
        raise LengthError(f"{len(u)} signals but {len(w)} weights")
    return float(np.tanh(u @ w))


def weight_gradient(u, weights, A: int) -> np.ndarray:
    """Gradient of ``(A - tanh(w . u))^2`` with respect to ``w``."""
    u = np.asarray(u, dtype=float)
    U = fuse(u, weights)
    return -2.0 * (A - U) * (1.0 - U * U) * u


def weight_step(u, weights, A: int, beta_w: float) -> np.ndarray:
    """One descent step on ``(A - U)^2``: ``w + 2 beta_w (A - U)(1 - U^2) u``."""
    if A not in (-1, 1):
        raise ValueError("A must be -1 or +1")
    return np.asarray(weights, dtype=float) - beta_w * weight_gradient(u, weights, A)


def apply_compensation(U: float, forecast_correct: bool, compensation: float = 0.5) -> float:
    if not 0.0 < compensation <= 1.0:
        raise ValueError("compensation must lie in (0, 1]")
    return U if forecast_correct else compensation * U


def forecast_correct(U: float, change: float):
    """Whether ``sign(U)`` matched the realised change; None when either is zero."""
    if U == 0.0 or change == 0.0:
        return None
    return (U > 0) == (change > 0)


class State(enum.Enum):
    ACTIVE = "Active"
    SEMI_ACTIVE = "SemiActive"
    PASSIVE = "Passive"


@dataclass(frozen=True)
class BlockState:
    state: State
    accuracy: float


def block_state(accuracy: float) -> BlockState:
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must lie in [0, 1]")
    if accuracy > 0.5:
        s = State.ACTIVE
    elif accuracy >= 0.25:
        s = State.SEMI_ACTIVE
    else:
        s = State.PASSIVE
    return BlockState(s, float(accuracy))


@dataclass
class FusionState:
    """Per-symbol block weights and the rolling record of forecast correctness."""

    n_blocks: int
    symbols: list
    beta_w: float = 0.01
    compensation: float = 0.5
    window: int = ACCURACY_WINDOW
    init_weight: float = 1.0
    weights: dict = field(default_factory=dict)
    hits: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.compensation <= 1.0:
            raise ValueError("compensation must lie in (0, 1]")
        if self.window < 1:
            raise ValueError("accuracy window must be >= 1")
        for s in self.symbols:
            self.weights.setdefault(s, np.full(self.n_blocks, float(self.init_weight)))
            self.hits.setdefault(s, deque(maxlen=self.window))

    def accuracy(self, symbol) -> float:
        """Share of correct forecasts in the window; 1.0 before any evidence."""
        h = self.hits[symbol]
        return sum(h) / len(h) if h else 1.0

    def record(self, symbol, correct) -> None:
        if correct is not None:
            self.hits[symbol].append(bool(correct))

    def last_correct(self, symbol) -> bool:
        h = self.hits[symbol]
        return h[-1] if h else True

    def state(self, symbol) -> BlockState:
        return block_state(self.accuracy(symbol))


def adapt_weights(state: FusionState, u, A: int, symbol) -> FusionState:
    """Robbins-Monro step of ``symbol``'s weights toward the realised direction ``A``."""
    state.weights[symbol] = weight_step(u, state.weights[symbol], A, state.beta_w)
    return state


@dataclass
class CouplingMatrix:
    lam: np.ndarray
    significant: np.ndarray
    window: int

    def masked(self, include=None) -> np.ndarray:
        """Correlations with insignificant off-diagonals zeroed.

        ``include`` optionally marks the symbols allowed to take part; excluded
        symbols keep only their diagonal.
        """
        m = np.where(self.significant, self.lam, 0.0)
        if include is not None:
            inc = np.asarray(include, dtype=bool)
            keep = np.outer(inc, inc)
            np.fill_diagonal(keep, True)
            m = np.where(keep, m, 0.0)
        np.fill_diagonal(m, 1.0)
        return m


def critical_correlation(n: int, alpha: float = COUPLING_ALPHA) -> float:
    """Smallest |r| that is significant for ``n`` observations (two-sided t-test)."""
    t = stats.t.isf(alpha / 2.0, n - 2)
    return float(t / np.sqrt(n - 2 + t * t))


def update_coupling(returns, window: int | None = None, alpha: float = COUPLING_ALPHA) -> CouplingMatrix:
    """Pearson correlations between the columns of ``returns`` (T x K) over the trailing window."""
    r = np.asarray(returns, dtype=float)
    if r.ndim != 2:
        raise DimensionError("returns must be a T x K matrix")
    if window is not None:
        r = r[-window:]
    n, K = r.shape
    if n < 3:
        raise LengthError(f"coupling needs at least 3 observations, got {n}")
    c = r - r.mean(axis=0)
    ss = np.sqrt((c * c).sum(axis=0))
    ok = ss > 0
    lam = np.zeros((K, K))
    if ok.any():
        z = c[:, ok] / ss[ok]
        lam[np.ix_(ok, ok)] = np.clip(z.T @ z, -1.0, 1.0)
    np.fill_diagonal(lam, 1.0)
    sig = np.abs(lam) >= critical_correlation(n, alpha)
    sig &= np.outer(ok, ok)
    np.fill_diagonal(sig, True)
    return CouplingMatrix(lam, sig, n)


def couple(U, cm: CouplingMatrix, include=None) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    m = cm.masked(include)
    if U.shape != (m.shape[0],):
        raise DimensionError(f"{len(U)} decisions for a {m.shape[0]}-symbol coupling matrix")
    return m @ U
