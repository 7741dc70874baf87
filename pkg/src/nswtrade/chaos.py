"""Screening for low-dimensional deterministic chaos.

Polynomial lag maps ``x_{n+1} = f(x_n, ..., x_{n-Q+1})`` are fitted by least
squares; their fixed points on the diagonal are located and classified by the
eigenvalues of the companion-form Jacobian.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, LengthError, RankError

QMAX = 5


def monomials(Q: int, degree: int) -> list[tuple]:
    """Exponent tuples of all monomials in Q variables of total degree <= degree.

    Ordered by total degree, then reverse-lexicographically so that for Q=1 the
    order is ``1, x, x^2, ...``. Variable 0 is the most recent lag.
    """
    out = []
    for d in range(degree + 1):
        block = [e for e in itertools.product(range(d + 1), repeat=Q) if sum(e) == d]
        out.extend(sorted(block, reverse=True))
    return out


def _design(lags: np.ndarray, exps: list[tuple]) -> np.ndarray:
    cols = []
    for e in exps:
        col = np.ones(lags.shape[0])
        for j, p in enumerate(e):
            if p:
                col = col * lags[:, j] ** p
        cols.append(col)
    return np.column_stack(cols)


@dataclass
class MapModel:
    Q: int
    degree: int
    coeffs: np.ndarray
    fit_residual: float = 0.0
    domain: tuple = None  # data range seen at fit time

    def __post_init__(self):
        if self.Q < 1:
            raise ValueError("Q must be >= 1")
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if len(self.coeffs) != len(monomials(self.Q, self.degree)):
            raise ValueError("coefficient count does not match (Q, degree)")

    @property
    def exponents(self):
        return monomials(self.Q, self.degree)

    def __call__(self, state) -> float:
        """Evaluate f at ``state = (x_n, x_{n-1}, ..., x_{n-Q+1})``."""
        s = np.atleast_2d(np.asarray(state, dtype=float))
        return float(_design(s, self.exponents) @ self.coeffs)

    def gradient(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=float)
        grad = np.zeros(self.Q)
        for c, e in zip(self.coeffs, self.exponents):
            for j, p in enumerate(e):
                if p == 0 or c == 0.0:
                    continue
                term = c * p * s[j] ** (p - 1)
                for m, q in enumerate(e):
                    if m != j and q:
                        term *= s[m] ** q
                grad[j] += term
        return grad

    def diagonal_poly(self) -> np.ndarray:
        """Coefficients (ascending powers) of ``f(x, x, ..., x)``."""
        out = np.zeros(self.degree + 1)
        for c, e in zip(self.coeffs, self.exponents):
            out[sum(e)] += c
        return out


def logistic(lam: float) -> MapModel:
    """The logistic map ``x -> lam * x * (1 - x)`` as a Q=1, degree-2 model."""
    return MapModel(1, 2, np.array([0.0, lam, -lam]), 0.0, (0.0, 1.0))


def iterate_map(f, x0, n: int) -> np.ndarray:
    """Orbit of length ``n + 1`` starting from the most recent value of ``x0``.

    ``f`` is a :class:`MapModel` or a float, read as the logistic parameter.
    For Q > 1, ``x0`` lists the Q initial values oldest first.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if not isinstance(f, MapModel):
        lam = float(f)
        if not 0.0 <= lam <= 4.0:
            raise DomainError(f"logistic parameter {lam} outside [0, 4]")
        x = float(np.ravel(x0)[-1])
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"logistic start {x} outside [0, 1]")
        orbit = np.empty(n + 1)
        orbit[0] = x
        for k in range(n):
            x = lam * x * (1.0 - x)
            orbit[k + 1] = x
        return orbit
    hist = list(np.atleast_1d(np.asarray(x0, dtype=float)))
    if len(hist) < f.Q:
        raise ValueError(f"need {f.Q} initial values")
    state = hist[-f.Q:][::-1]  # most recent first
    orbit = np.empty(n + 1)
    orbit[0] = state[0]
    for k in range(n):
        nxt = f(state)
        if not np.isfinite(nxt):
            raise DomainError(f"orbit left the map's domain at step {k + 1}")
        state = [nxt] + state[:-1]
        orbit[k + 1] = nxt
    return orbit


def _lag_matrix(x: np.ndarray, Q: int):
    rows = len(x) - Q
    lags = np.column_stack([x[Q - 1 - j: Q - 1 - j + rows] for j in range(Q)])
    return lags, x[Q:]


def fit_map(series, Q: int, degree: int, rcond: float = 1e-10) -> MapModel:
    x = np.asarray(series, dtype=float)
    if not 1 <= Q <= QMAX:
        raise ValueError(f"Q must be in 1..{QMAX}")
    exps = monomials(Q, degree)
    if len(x) <= Q + len(exps):
        raise LengthError(f"series too short for Q={Q}, degree={degree}")
    lags, target = _lag_matrix(x, Q)
    A = _design(lags, exps)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise RankError("design matrix has an all-zero column")
    As = A / norms
    s = np.linalg.svd(As, compute_uv=False)
    if s[-1] <= rcond * s[0]:
        raise RankError(f"design matrix is rank deficient for Q={Q}, degree={degree}")
    sol, *_ = np.linalg.lstsq(As, target, rcond=None)
    coeffs = sol / norms
    resid = target - A @ coeffs
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return MapModel(Q, degree, coeffs, rms, (float(x.min()), float(x.max())))


@dataclass
class FixedPointReport:
    point: np.ndarray
    eigen_moduli: np.ndarray
    hyperbolic: bool
    degenerate: bool = False


def _jacobian(f: MapModel, xstar: float) -> np.ndarray:
    J = np.zeros((f.Q, f.Q))
    J[0] = f.gradient(np.full(f.Q, xstar))
    for i in range(1, f.Q):
        J[i, i - 1] = 1.0
    return J


def _report(f: MapModel, xstar: float, degenerate=False) -> FixedPointReport:
    mod = np.abs(np.linalg.eigvals(_jacobian(f, xstar)))
    return FixedPointReport(np.full(f.Q, xstar), np.sort(mod)[::-1], bool(np.any(mod > 1.0)), degenerate)


def default_interval(f: MapModel, widen: float = 0.1) -> tuple:
    lo, hi = f.domain if f.domain is not None else (-1.0, 1.0)
    pad = widen * (hi - lo) if hi > lo else widen * max(abs(lo), 1.0)
    return lo - pad, hi + pad


def fixed_points(f: MapModel, interval=None, scan_points: int = 4001, xtol: float = 1e-14) -> list[FixedPointReport]:
    """Fixed points ``f(x, ..., x) = x`` on ``interval`` by dense scan and bracketing polish."""
    lo, hi = interval if interval is not None else default_interval(f)
    poly = f.diagonal_poly()
    poly[1] -= 1.0 if len(poly) > 1 else 0.0
    if len(poly) == 1:
        poly = np.array([poly[0], -1.0])
    scale = max(1.0, float(np.max(np.abs(f.coeffs))) if len(f.coeffs) else 1.0)
    if np.all(np.abs(poly) <= 1e-12 * scale):
        # identity on the diagonal: every point is fixed
        mid = 0.5 * (lo + hi)
        return [_report(f, mid, degenerate=True)]
    g = np.polynomial.polynomial.Polynomial(poly)
    xs = np.linspace(lo, hi, scan_points)
    gv = g(xs)
    roots = []
    for k in range(scan_points - 1):
        if gv[k] == 0.0:
            roots.append(xs[k])
        elif gv[k] * gv[k + 1] < 0:
            roots.append(brentq(g, xs[k], xs[k + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    if gv[-1] == 0.0:
        roots.append(xs[-1])
    # tangential roots: local minima of |g| that polish to zero
    dg = g.deriv()
    for k in range(1, scan_points - 1):
        a = abs(gv[k])
        if a <= abs(gv[k - 1]) and a <= abs(gv[k + 1]) and gv[k - 1] * gv[k + 1] > 0:
            dv = dg(np.array([xs[k - 1], xs[k + 1]]))
            if dv[0] * dv[1] < 0:
                xc = brentq(dg, xs[k - 1], xs[k + 1], xtol=xtol)
                if abs(g(xc)) <= 1e-12 * scale:
                    roots.append(xc)
    roots = sorted(roots)
    uniq = []
    for r in roots:
        if not uniq or abs(r - uniq[-1]) > 1e-9 * max(1.0, abs(r)):
            uniq.append(r)
    return [_report(f, r) for r in uniq]


@dataclass
class ChaosVerdict:
    verdict: str
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["Q", "residual", "residual_fraction", "fixed_points", "moduli", "hyperbolic", "verdict"])
        for r in self.rows:
            pts = ";".join(f"{p:.10g}" for p in r["fixed_points"])
            mods = ";".join("/".join(f"{m:.10g}" for m in ms) for ms in r["moduli"])
            w.writerow([r["Q"], "" if r["residual"] is None else f"{r['residual']:.6g}",
                        "" if r["fraction"] is None else f"{r['fraction']:.6g}",
                        pts, mods, int(r["hyperbolic"]), self.verdict])
        return buf.getvalue()


def chaos_verdict(series, Qmax: int = QMAX, degree: int = 2, residual_fraction: float = 0.1) -> ChaosVerdict:
    """Flag ``chaotic-preconditions`` when some lag map both explains the series
    (RMS residual below ``residual_fraction`` of its standard deviation) and has a
    hyperbolic fixed point in the observed range.

    Lag orders whose design matrix is rank deficient are skipped because a lower
    order already determines the data exactly; a deficiency at Q=1 is raised.
    """
    x = np.asarray(series, dtype=float)
    if not 1 <= Qmax <= QMAX:
        raise ValueError(f"Qmax must be in 1..{QMAX}")
    sd = float(np.std(x))
    rows = []
    flagged = False
    for Q in range(1, Qmax + 1):
        try:
            m = fit_map(x, Q, degree)
        except RankError:
            if Q == 1:
                raise
            rows.append(dict(Q=Q, residual=None, fraction=None, fixed_points=[], moduli=[], hyperbolic=False))
            continue
        frac = m.fit_residual / sd if sd > 0 else 0.0
        fps = fixed_points(m) if np.all(np.isfinite(m.coeffs)) else []
        fps = [fp for fp in fps if not fp.degenerate]
        hyper = any(fp.hyperbolic for fp in fps)
        if frac < residual_fraction and hyper:
            flagged = True
        rows.append(dict(Q=Q, residual=m.fit_residual, fraction=frac,
                         fixed_points=[float(fp.point[0]) for fp in fps],
                         moduli=[list(fp.eigen_moduli) for fp in fps], hyperbolic=hyper))
    return ChaosVerdict("chaotic-preconditions" if flagged else "stochastic", rows)
