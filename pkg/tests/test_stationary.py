import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from nswtrade.errors import DegenerateError, DensityOverflowError, GridError, RangeError
from nswtrade.sde import SdeModel
from nswtrade.stationary import (KsGate, StationaryDensity, convolve_shifted, ks_gate, ks_statistic, prob_negative,
                                 solve_stationary, stationary_density)

GAUSS_PEAK = 1.0 / np.sqrt(4.0 * np.pi)


def ou_model(a=-1.0, g=1.0):
    m = SdeModel.zeros(1, 0, g0=g)
    m.lambda_F[1, 0] = a
    return m


def gaussian(mu, sd, lo, hi, points=513, n_fit=100):
    grid = np.linspace(lo, hi, points)
    return StationaryDensity.from_values(grid, norm.pdf(grid, mu, sd), n_fit=n_fit)


def test_gaussian_case():
    t0 = time.perf_counter()
    d = solve_stationary(ou_model(), (-10, 10, 513))
    elapsed = time.perf_counter() - t0
    np.testing.assert_allclose(d.density, np.exp(-d.grid ** 2 / 4) * GAUSS_PEAK, atol=1e-6)
    assert d.density.max() == pytest.approx(GAUSS_PEAK, abs=1e-6)
    assert d.variance() == pytest.approx(2.0, abs=1e-6)
    assert elapsed < 0.1


def test_power_law_case():
    lam1, lam2 = 0.5, 1.0
    d = stationary_density(lambda x: lam1 * x, lambda x: lam2 * x, (0.1, 10, 513))
    k = lam1 / (2 * lam2 ** 2)
    z = (10 ** (k + 1) - 0.1 ** (k + 1)) / (k + 1)
    # density normalised by trapezoid, so compare shapes after the same normalisation
    ref = StationaryDensity.from_values(d.grid, d.grid ** k)
    np.testing.assert_allclose(d.density, ref.density, rtol=1e-6)
    np.testing.assert_allclose(d.density, d.grid ** k / z, rtol=1e-3)


def test_trapezoid_rule_is_coarser():
    lam1, lam2 = 0.5, 1.0
    d = stationary_density(lambda x: lam1 * x, lambda x: lam2 * x, (0.1, 10, 513), rule="trapezoid")
    ref = StationaryDensity.from_values(d.grid, d.grid ** 0.25)
    err = np.max(np.abs(d.density / ref.density - 1))
    assert 1e-6 < err < 1e-2


def test_zero_drift_is_uniform():
    d = solve_stationary(SdeModel.zeros(1, 0), (-2, 2, 101))
    np.testing.assert_allclose(d.density, 0.25, rtol=1e-12)


def test_fokker_planck_variant_variance():
    d = solve_stationary(ou_model(), (-10, 10, 513), variant="fokker_planck")
    assert d.variance() == pytest.approx(0.5, abs=1e-6)


def test_solver_errors():
    with pytest.raises(ValueError):
        solve_stationary(ou_model(), (1, -1, 513))
    with pytest.raises(ValueError):
        solve_stationary(ou_model(), (-1, 1, 32))
    with pytest.raises(DensityOverflowError):
        solve_stationary(ou_model(a=-1.0, g=0.01), (-10, 10, 513))
    with pytest.raises(DegenerateError):
        # exponent -675 |x| stays inside the overflow limit but puts all mass in one cell
        stationary_density(lambda x: -1350.0 * np.sign(x), lambda x: np.ones_like(x), (-1, 1, 64))
    with pytest.raises(GridError):
        StationaryDensity.from_values([0, 1, 3, 4], [1, 1, 1, 1])


def test_prob_negative_examples():
    assert prob_negative(solve_stationary(ou_model(), (-10, 10, 513))) == pytest.approx(0.5, abs=1e-12)
    d = gaussian(1.0, 1.0, -8, 10, 1025)
    assert prob_negative(d) == pytest.approx(norm.cdf(-1), abs=1e-5)
    grid = np.linspace(-1, 1, 201)
    assert prob_negative(StationaryDensity.from_values(grid, (grid > 0.1).astype(float))) == 0.0
    with pytest.raises(RangeError):
        prob_negative(gaussian(5, 1, 1, 10))


def test_prob_negative_grid_refinement():
    p = [prob_negative(solve_stationary(ou_model(), (-9, 11, n))) for n in (513, 1025)]
    assert abs(p[0] - p[1]) < 1e-4
    assert p[1] == pytest.approx(norm.cdf(0, 0, np.sqrt(2)), abs=1e-4)


def spike(at, lo=-5, hi=5, points=201):
    grid = np.linspace(lo, hi, points)
    v = np.zeros(points)
    v[np.argmin(np.abs(grid - at))] = 1.0
    return StationaryDensity.from_values(grid, v)


def test_convolution_spikes():
    out = convolve_shifted(spike(1.0), spike(1.0))
    assert out.grid[np.argmax(out.density)] == pytest.approx(0.0, abs=1e-9)
    # f(z) = int f_t(y) f_tT(y + z) dy peaks where y + z hits the f_tT spike
    out = convolve_shifted(spike(0.0), spike(2.0))
    assert out.grid[np.argmax(out.density)] == pytest.approx(2.0, abs=1e-9)


def test_convolution_of_gaussians():
    a, b = gaussian(0, 1, -10, 10, 801), gaussian(0, 1, -10, 10, 801)
    out = convolve_shifted(a, b)
    assert out.mean() == pytest.approx(0.0, abs=1e-9)
    assert out.variance() == pytest.approx(2.0, abs=1e-4)
    assert out.to_csv().startswith("x,f\n")


def test_convolution_grid_errors():
    with pytest.raises(GridError):
        convolve_shifted(gaussian(0, 1, -5, 5, 201), gaussian(0, 1, -5, 5, 301))
    with pytest.raises(GridError):
        convolve_shifted(gaussian(0, 1, -5, 5, 201), gaussian(0, 1, -4.97, 5.03, 201))


def test_ks_gate_examples():
    g = KsGate(alpha=0.15)
    assert g.k_alpha == pytest.approx(1.138, abs=1e-3)
    d = gaussian(0, 1, -10, 15)
    dec = ks_gate(d, d, g)
    assert dec.D == 0.0 and dec.indistinguishable
    assert dec.threshold == pytest.approx(0.1138, abs=1e-4)
    far = ks_gate(gaussian(0, 1, -10, 15), gaussian(5, 1, -10, 15), g)
    assert far.D == pytest.approx(0.9876, abs=1e-3)
    assert far.distinguishable
    with pytest.raises(ValueError):
        KsGate(alpha=1.5)


def test_ks_gate_without_fits_is_indistinguishable():
    d = gaussian(0, 1, -5, 5, n_fit=0)
    assert ks_gate(d, gaussian(3, 1, -5, 5), KsGate()).indistinguishable


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(0.3, 2), st.floats(-2, 2), st.floats(0.3, 2))
def test_ks_symmetric(m1, s1, m2, s2):
    a, b = gaussian(m1, s1, -12, 12), gaussian(m2, s2, -12, 12)
    assert ks_statistic(a, b) == ks_statistic(b, a)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3))
def test_shift_invariance(c):
    def dens(drift_a, shift):
        return stationary_density(lambda x: drift_a * (x - shift), lambda x: np.ones_like(x),
                                  (-10 + shift, 10 + shift, 513))
    base = ks_statistic(dens(-1.0, 0.0), dens(-0.7, 0.0))
    moved = ks_statistic(dens(-1.0, c), dens(-0.7, c))
    assert moved == pytest.approx(base, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, -0.05), st.floats(0.2, 3), st.floats(-0.3, 0.3))
def test_density_normalised_and_monotone(a, g, b):
    m = ou_model(a, g)
    m.lambda_F[0, 0] = b
    try:
        d = solve_stationary(m, (-8, 8, 257))
    except (DensityOverflowError, DegenerateError):
        return
    h = d.step
    assert h * (d.density.sum() - 0.5 * (d.density[0] + d.density[-1])) == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(d.cdf) >= 0)
    assert d.cdf[-1] == pytest.approx(1.0, abs=1e-9)
    assert 0.0 <= prob_negative(d) <= 1.0
