"""Discrete wavelet cascade and the causal Haar detail stream.

The cascade computes ``a_i[k] = sum_p h_p a_{i-1}[2k + p]`` and the matching
detail ``d_i[k] = sum_p g_p a_{i-1}[2k + p]`` starting from ``a_0 = x``.
A trailing sample that does not complete a pair is dropped at every level.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LengthError, ShapeError

_SQRT1_2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class FilterBank:
    name: str
    h: tuple
    g: tuple = None

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        object.__setattr__(self, "h", h)
        if self.g is None:
            object.__setattr__(self, "g", quadrature_mirror(h))
        else:
            object.__setattr__(self, "g", tuple(float(v) for v in self.g))
        if len(h) < 2 or len(h) % 2:
            raise ValueError("filter length must be even and at least 2")
        if abs(sum(v * v for v in h) - 1.0) > 1e-12:
            raise ValueError(f"{self.name}: smoothing filter is not normalised (sum h^2 != 1)")
        if not np.allclose(self.g, quadrature_mirror(h), atol=1e-12):
            raise ValueError(f"{self.name}: detail filter is not the quadrature mirror of h")


def quadrature_mirror(h) -> tuple:
    """``g_p = (-1)^p h_{L-1-p}``; for Haar this gives ``(1/sqrt2, -1/sqrt2)``."""
    L = len(h)
    return tuple(((-1) ** p) * h[L - 1 - p] for p in range(L))


HAAR = FilterBank("haar", (_SQRT1_2, _SQRT1_2))


@dataclass
class WaveletPyramid:
    """``approx[0]`` is the source; ``approx[i]`` and ``detail[i-1]`` belong to level i."""

    approx: list = field(default_factory=list)
    detail: list = field(default_factory=list)
    K: int = 0
    base_len: int = 0

    def level(self, i: int):
        """Return ``(approximation, detail)`` at scale ``i`` (1-based)."""
        return self.approx[i], self.detail[i - 1]

    def to_csv(self, fh=None) -> str:
        """Rows ``level,index,kind,value``; returns the text when ``fh`` is None."""
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "index", "kind", "value"])
        for i in range(1, self.K + 1):
            for kind, seq in (("approx", self.approx[i]), ("detail", self.detail[i - 1])):
                for k, v in enumerate(seq):
                    w.writerow([i, k, kind, repr(float(v))])
        return buf.getvalue() if fh is None else ""


def _analysis(a: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = len(a) // 2
    a = a[: 2 * n]
    L = len(taps)
    out = np.zeros(n)
    for p in range(L):
        # periodic wrap only matters for filters longer than two taps
        out += taps[p] * np.take(a, (2 * np.arange(n) + p) % (2 * n))
    return out


def decompose(series, K: int, bank: FilterBank = HAAR) -> WaveletPyramid:
    x = np.asarray(series, dtype=float)
    if K < 1:
        raise ValueError("K must be a positive integer")
    if len(x) < 2 ** K:
        raise LengthError(f"series of length {len(x)} is shorter than 2^K = {2 ** K}")
    h = np.asarray(bank.h)
    g = np.asarray(bank.g)
    approx = [x.copy()]
    detail = []
    for _ in range(K):
        prev = approx[-1]
        approx.append(_analysis(prev, h))
        detail.append(_analysis(prev, g))
    return WaveletPyramid(approx, detail, K, len(x))


def reconstruct(pyramid: WaveletPyramid, bank: FilterBank = HAAR) -> np.ndarray:
    """Invert the cascade from the coarsest approximation and all details.

    Returns the first ``2^K * len(approx[K])`` source samples; samples dropped by
    truncation cannot be recovered.
    """
    K = pyramid.K
    if len(pyramid.approx) != K + 1 or len(pyramid.detail) != K:
        raise ShapeError("pyramid level count does not match K")
    for i in range(1, K + 1):
        a, d = pyramid.approx[i], pyramid.detail[i - 1]
        if len(a) != len(d):
            raise ShapeError(f"level {i}: approximation and detail lengths differ")
        if len(a) != len(pyramid.approx[i - 1]) // 2:
            raise ShapeError(f"level {i}: length {len(a)} inconsistent with level {i - 1}")
    h = np.asarray(bank.h)
    g = np.asarray(bank.g)
    a = np.asarray(pyramid.approx[K], dtype=float)
    for i in range(K, 0, -1):
        n = len(a)
        d = np.asarray(pyramid.detail[i - 1][:n], dtype=float)
        out = np.zeros(2 * n)
        idx = 2 * np.arange(n)
        for p in range(len(h)):
            np.add.at(out, (idx + p) % (2 * n), h[p] * a + g[p] * d)
        a = out
    return a


def haar_detail_stream(series, window: int) -> np.ndarray:
    """Causal per-bar Haar detail: short mean minus long mean, scaled by ``sqrt(2*window)``.

    Element t compares the mean of the last ``window`` values with the mean of the
    last ``2*window`` values ending at t. It is positive when recent values sit
    above the longer average, i.e. the negative of the textbook Haar detail.
    The first ``2*window - 1`` entries are NaN (warm-up).
    """
    x = np.asarray(series, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(x) < 2 * window:
        raise LengthError(f"need at least {2 * window} values, got {len(x)}")
    c = np.concatenate(([0.0], np.cumsum(x)))
    out = np.full(len(x), np.nan)
    t = np.arange(2 * window - 1, len(x))
    short = (c[t + 1] - c[t + 1 - window]) / window
    long_ = (c[t + 1] - c[t + 1 - 2 * window]) / (2 * window)
    out[t] = (short - long_) * math.sqrt(2.0 * window)
    return out
