"""Quasistationary density of the fitted Ito model and comparisons between densities.

The default variant ``"half_ratio"`` is ``f(x) = Z^-1 exp( int_{x0}^{x} F(u) / (2 G(u)^2) du )``;
``variant="fokker_planck"`` switches to the stationary Fokker-Planck solution
``G^-2 exp( int 2F/G^2 )`` for comparison.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kstwobign

from .errors import DegenerateError, DensityOverflowError, GridError, RangeError
from .sde import SdeModel

MAX_EXPONENT_RANGE = 700.0


def trapezoid(y, dx: float) -> float:
    y = np.asarray(y, dtype=float)
    return float(dx * (y.sum() - 0.5 * (y[0] + y[-1])))


def cumulative_trapezoid(y, dx: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros(len(y))
    out[1:] = np.cumsum(0.5 * dx * (y[1:] + y[:-1]))
    return out


@dataclass
class StationaryDensity:
    grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray
    n_fit: int = 0
    t_stamp: int = 0

    @property
    def step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @classmethod
    def from_values(cls, grid, values, n_fit: int = 0, t_stamp: int = 0) -> "StationaryDensity":
        """Normalise non-negative ``values`` on a uniform ``grid`` and accumulate the CDF."""
        grid = np.asarray(grid, dtype=float)
        values = np.clip(np.asarray(values, dtype=float), 0.0, None)
        h = float(grid[1] - grid[0])
        if not np.allclose(np.diff(grid), h, rtol=1e-9, atol=1e-12 * max(1.0, abs(h))):
            raise GridError("grid is not uniform")
        z = trapezoid(values, h)
        if not z > 0:
            raise DegenerateError("density has no mass on the grid")
        dens = values / z
        cdf = cumulative_trapezoid(dens, h)
        return cls(grid, dens, cdf, n_fit, t_stamp)

    def mean(self) -> float:
        return trapezoid(self.grid * self.density, self.step)

    def variance(self) -> float:
        m = self.mean()
        return trapezoid((self.grid - m) ** 2 * self.density, self.step)

    def cdf_at(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.cdf, left=0.0, right=1.0)

    def to_csv(self) -> str:
        lines = ["x,f"]
        lines += [f"{x!r},{f!r}" for x, f in zip(self.grid.tolist(), self.density.tolist())]
        return "\n".join(lines) + "\n"


def _gauss_legendre_cumulative(fn, grid: np.ndarray, nodes: int) -> np.ndarray:
    """Running integral of ``fn`` over the cells of ``grid``, exact for polynomials
    of degree < 2*nodes on each cell."""
    t, w = np.polynomial.legendre.leggauss(nodes)
    a, b = grid[:-1], grid[1:]
    half = 0.5 * (b - a)
    pts = (0.5 * (a + b))[:, None] + half[:, None] * t[None, :]
    vals = fn(pts.ravel()).reshape(pts.shape)
    cell = half * (vals @ w)
    out = np.zeros(len(grid))
    out[1:] = np.cumsum(cell)
    return out


def stationary_density(drift, diffusion, grid_spec, variant: str = "half_ratio", rule: str = "gauss",
                       nodes: int = 5, n_fit: int = 0, t_stamp: int = 0) -> StationaryDensity:
    """Stationary density for vectorised callables ``drift(x)`` and ``diffusion(x)``.

    ``rule="trapezoid"`` integrates the exponent by cumulative trapezoid on the
    grid itself; the default integrates each cell by Gauss-Legendre quadrature.
    The lower integration limit is the grid midpoint.
    """
    lo, hi, points = grid_spec
    points = int(points)
    if not hi > lo:
        raise ValueError("grid upper bound must exceed the lower bound")
    if points < 64:
        raise ValueError("at least 64 grid points are required")
    if variant not in ("half_ratio", "fokker_planck"):
        raise ValueError(f"unknown variant {variant!r}")
    grid = np.linspace(lo, hi, points)
    h = float(grid[1] - grid[0])

    coef = 0.5 if variant == "half_ratio" else 2.0

    def integrand(x):
        g = np.asarray(diffusion(x), dtype=float)
        return coef * np.asarray(drift(x), dtype=float) / (g * g)

    if rule == "trapezoid":
        expo = cumulative_trapezoid(integrand(grid), h)
    elif rule == "gauss":
        expo = _gauss_legendre_cumulative(integrand, grid, nodes)
    else:
        raise ValueError(f"unknown integration rule {rule!r}")
    expo = expo - np.interp(0.5 * (lo + hi), grid, expo)
    if variant == "fokker_planck":
        g = np.asarray(diffusion(grid), dtype=float)
        expo = expo - 2.0 * np.log(g)
    if not np.all(np.isfinite(expo)):
        raise DensityOverflowError("non-finite exponent on the grid")
    span = float(expo.max() - expo.min())
    if span > MAX_EXPONENT_RANGE:
        raise DensityOverflowError(f"exponent range {span:.1f} exceeds {MAX_EXPONENT_RANGE}; shrink the grid")
    vals = np.exp(expo - expo.max())
    d = StationaryDensity.from_values(grid, vals, n_fit, t_stamp)
    cell_mass = np.sort(d.density * h)[::-1]
    covered = np.searchsorted(np.cumsum(cell_mass) / cell_mass.sum(), 1.0 - 1e-9) + 1
    if covered < 3:
        raise DegenerateError("density mass is concentrated in fewer than 3 grid cells")
    return d


def solve_stationary(model: SdeModel, grid_spec, y2: float | None = None, variant: str = "half_ratio",
                     rule: str = "gauss", t_stamp: int = 0) -> StationaryDensity:
    """Density of Y1 from a fitted model, with Y2 frozen at ``y2`` (default: its running mean)."""
    y2v = model.scale.mean2 if y2 is None else float(y2)
    return stationary_density(lambda x: model.drift_on_grid(x, y2v), model.diffusion_on_grid, grid_spec,
                              variant=variant, rule=rule, n_fit=model.n_updates, t_stamp=t_stamp)


def prob_negative(d: StationaryDensity) -> float:
    """Mass of the density below zero, ``P_s``."""
    if not d.grid[0] <= 0.0 <= d.grid[-1]:
        raise RangeError(f"grid [{d.grid[0]}, {d.grid[-1]}] does not contain 0")
    return float(min(1.0, max(0.0, np.interp(0.0, d.grid, d.cdf))))


def convolve_shifted(d_t: StationaryDensity, d_tT: StationaryDensity) -> StationaryDensity:
    """``f(z) = int f_t(y) f_tT(y + z) dy`` on the difference grid, renormalised."""
    h = d_t.step
    if not np.isclose(h, d_tT.step, rtol=1e-9, atol=0.0):
        raise GridError(f"grid steps differ: {h} vs {d_tT.step}")
    n = len(d_t.grid)
    offset = (d_tT.grid[0] - d_t.grid[0]) / h
    if abs(offset - round(offset)) > 1e-6:
        raise GridError("grids are not commensurate (origins differ by a non-integer number of steps)")
    vals = np.convolve(d_tT.density, d_t.density[::-1]) * h
    z0 = d_tT.grid[0] - d_t.grid[0] - (n - 1) * h
    zgrid = z0 + h * np.arange(len(vals))
    return StationaryDensity.from_values(zgrid, vals, min(d_t.n_fit, d_tT.n_fit), max(d_t.t_stamp, d_tT.t_stamp))


@dataclass
class KsGate:
    alpha: float = 0.15
    k_alpha: float | None = None
    N: int | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.k_alpha is None:
            self.k_alpha = float(kstwobign.isf(self.alpha))
        if not self.k_alpha > 0:
            raise ValueError("k_alpha must be positive")


@dataclass
class GateDecision:
    D: float
    threshold: float
    indistinguishable: bool
    N: int = field(default=0)

    @property
    def distinguishable(self) -> bool:
        return not self.indistinguishable


def ks_statistic(d_t: StationaryDensity, d_tT: StationaryDensity) -> float:
    grid = np.union1d(d_t.grid, d_tT.grid)
    return float(np.max(np.abs(d_t.cdf_at(grid) - d_tT.cdf_at(grid))))


def ks_gate(d_t: StationaryDensity, d_tT: StationaryDensity, gate: KsGate) -> GateDecision:
    """Kolmogorov-Smirnov comparison of two synthesized densities.

    ``N`` is ``gate.N`` when set, otherwise the smaller fit count of the two.
    """
    D = ks_statistic(d_t, d_tT)
    N = gate.N if gate.N is not None else min(d_t.n_fit, d_tT.n_fit)
    if N <= 0:
        return GateDecision(D, float("inf"), True, 0)
    thr = gate.k_alpha / np.sqrt(N)
    return GateDecision(D, float(thr), bool(D < thr), int(N))
