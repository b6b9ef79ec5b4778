import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from kreinlab import krein, numerics
from kreinlab.errors import DomainError, InvalidInputError, SzegoViolationError
from kreinlab.krein import Coefficient
from kreinlab.measures import FREE_DENSITY, LineDensity, density_from_truncated_coefficient
from kreinlab.numerics import SampledGrid

STEP = Coefficient.step(0.5, 2.0)


def test_trapezoid_examples():
    assert numerics.integrate_trapezoid(SampledGrid([0, 1, 2], [0, 0, 0])) == 0
    assert numerics.integrate_trapezoid(SampledGrid([0, 1], [1, 1])) == 1
    x = np.linspace(0, np.pi, 1001)
    assert numerics.integrate_trapezoid(SampledGrid(x, np.sin(x))) == pytest.approx(2.0, abs=1e-5)


def test_sampled_grid_validation():
    with pytest.raises(InvalidInputError):
        SampledGrid([0.0], [1.0])
    with pytest.raises(InvalidInputError):
        SampledGrid([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(InvalidInputError):
        SampledGrid([0.0, 1.0], [1.0])


values = st.lists(st.floats(-100, 100), min_size=3, max_size=30)


@given(values, st.floats(-3, 3), st.integers(1, 28))
def test_trapezoid_linear_and_additive(vals, c, split):
    y = np.asarray(vals)
    x = np.cumsum(np.linspace(0.1, 1.0, len(y)))
    z = np.roll(y, 1)
    lin = numerics.trapezoid(c * y + z, x)
    assert lin == pytest.approx(c * numerics.trapezoid(y, x) + numerics.trapezoid(z, x), abs=1e-9)
    k = min(split, len(y) - 2)
    parts = numerics.trapezoid(y[: k + 1], x[: k + 1]) + numerics.trapezoid(y[k:], x[k:])
    assert parts == pytest.approx(numerics.trapezoid(y, x), abs=1e-9)


def test_kernels_at_origin_and_mass():
    assert numerics.r_kernel(0.0) == 1
    x = np.array([0.3, -2.0, 11.0])
    assert np.allclose(numerics.r_kernel(x), (np.exp(1j * x) - 1) / (1j * x), rtol=1e-14)
    assert numerics.fejer_kernel(0.0) == 1
    mass = 2 * integrate.quad(lambda t: float(numerics.fejer_kernel(t)), 0, 2000, limit=2000)[0]
    # tail beyond 2000 contributes about 2 * 2/2000
    assert mass + 4 / 2000 == pytest.approx(2 * np.pi, abs=1e-4)


def test_fejer_antiderivatives():
    u = np.array([-40.0, -3.0, -0.2, 1e-3, 0.4, 0.6, 5.0, 80.0])
    f0 = numerics._fejer_f0(u)
    cin = numerics._cin(u)
    for ui, a, b in zip(u, f0, cin):
        ref0 = integrate.quad(lambda t: float(numerics.fejer_kernel(t)), 0, ui, limit=500)[0]
        ref1 = integrate.quad(lambda t: (1 - math.cos(t)) / t if t else 0.0, 0, abs(ui), limit=500)[0]
        assert a == pytest.approx(ref0, abs=1e-12)
        assert b == pytest.approx(ref1, abs=1e-12)


@given(st.floats(0.01, 10.0), st.floats(-20, 20), st.floats(0.05, 500))
@settings(max_examples=60)
def test_fejer_fixes_constants(c, z, r):
    dens = LineDensity.constant(c, half_width=10.0, n_nodes=257)
    assert numerics.fejer_smooth(dens, z, r) == pytest.approx(2 * np.pi * c, rel=1e-10)


def test_fejer_point_mass():
    base = LineDensity.constant(1.0)
    with_mass = LineDensity.constant(1.0, point_masses=[(0.0, 1.0)])
    diff = numerics.fejer_smooth(with_mass, 0.0, 10.0) - numerics.fejer_smooth(base, 0.0, 10.0)
    assert diff == pytest.approx(10.0, rel=1e-12)


def test_fejer_matches_direct_convolution():
    dens = LineDensity.from_function(lambda x: FREE_DENSITY * (1 + 0.8 * np.exp(-x * x)), n_nodes=801)
    # Simpson on a mesh that refines every cell of the interpolant 64 times
    fine = np.linspace(-10, 10, 800 * 64 + 1)
    sig = dens.evaluate(fine)
    for z, r in [(0.3, 2.0), (-1.0, 7.5), (4.0, 30.0)]:
        inner = integrate.simpson(r * numerics.fejer_kernel(r * (z - fine)) * sig, x=fine)
        lo, hi = dens.window
        outer_mass = 2 * np.pi - (numerics._fejer_f0(r * (z - lo)) - numerics._fejer_f0(r * (z - hi)))
        ref = inner + dens.exterior_value * outer_mass
        assert numerics.fejer_smooth(dens, z, r) == pytest.approx(ref, rel=1e-8)


def test_fejer_approaches_density():
    dens = density_from_truncated_coefficient(STEP)
    target = 1 / abs(krein.transfer_to(STEP, [1.0], 2.0)[1][0]) ** 2
    vals = [numerics.fejer_smooth(dens, 1.0, r) for r in (10.0, 100.0, 1000.0)]
    errs = [abs(v / target - 1) for v in vals]
    assert errs[2] < 0.01
    assert errs[2] < errs[1] < errs[0]
    with pytest.raises(InvalidInputError):
        numerics.fejer_smooth(dens, 1.0, 0.0)


def test_outer_free_and_errors():
    free = LineDensity.constant(FREE_DENSITY)
    assert numerics.outer_function(free, 2j) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(DomainError):
        numerics.outer_function(free, 1.0)
    with pytest.raises(DomainError):
        numerics.outer_function(free, 1 - 1j)
    y = np.full(101, FREE_DENSITY)
    y[40:50] = 0
    with pytest.raises(SzegoViolationError):
        numerics.outer_function(LineDensity(np.linspace(-5, 5, 101), y), 1j)


@given(st.floats(-0.9, 0.9), st.floats(0.2, 3.0), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_outer_at_i_reduction(amp, width, center):
    dens = LineDensity.from_function(lambda x: FREE_DENSITY * (1 + amp * np.exp(-((x - center) / width) ** 2)), n_nodes=1025)
    assert numerics.outer_function(dens, 1j) == pytest.approx(numerics.outer_at_i(dens), rel=1e-8)
    assert abs(numerics.outer_function(dens, 1j).imag) < 1e-12


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_outer_matches_direct_cauchy_integral():
    dens = LineDensity.from_function(lambda x: FREE_DENSITY * (1 + 0.5 * np.cos(x) * np.exp(-0.1 * x * x)), n_nodes=4097)
    lam = 0.4 + 0.9j

    def g(s):
        return math.log(float(dens.evaluate(s)) / FREE_DENSITY)

    def part(fn):
        return integrate.quad(fn, -10, 10, limit=2000)[0]

    re = part(lambda s: g(s) * ((1 / (s - lam)).real - s / (1 + s * s)))
    im = part(lambda s: g(s) * (1 / (s - lam)).imag)
    ref = np.exp(0.5j / np.pi * (re + 1j * im))
    assert numerics.outer_function(dens, lam) == pytest.approx(ref, rel=1e-6)


def test_outer_equals_pstar_for_compact_support():
    dens = density_from_truncated_coefficient(STEP)
    lam = 1 + 1j
    ref = krein.transfer_to(STEP, [lam], 2.0)[1][0]
    assert abs(numerics.outer_function(dens, lam) - ref) < 1e-4


def test_outer_modulus_identity():
    dens = density_from_truncated_coefficient(STEP)
    for lam in (1j, 0.5 + 2j):
        tr = krein.propagate(STEP, lam, np.linspace(0, 2, 401))
        total = tr.acc_P2[-1] + abs(tr.P[-1]) ** 2 / (2 * lam.imag)
        pi = numerics.outer_function(dens, lam)
        assert abs(pi) ** 2 == pytest.approx(2 * lam.imag * total, rel=1e-4)
