import csv

import numpy as np
import pytest

from kreinlab import kernels, krein
from kreinlab.errors import DegeneratePairError, InvalidInputError
from kreinlab.krein import Coefficient, KreinState
from kreinlab.measures import FREE_DENSITY, LineDensity, density_from_truncated_coefficient

STEP = Coefficient.step(0.5, 2.0)
FREE = Coefficient.zero()


def test_free_kernel_closed_forms():
    g = np.linspace(0, 5, 5001)
    a, b = krein.propagate_many(FREE, [0.0, 1.7], g)
    assert kernels.kernel_at(b, b, 5.0) == pytest.approx(5.0, rel=1e-12)
    x = 1.7
    exact = (np.exp(1j * x * 5) - 1) / (1j * x)
    assert abs(kernels.kernel_at(a, b, 5.0) - exact) < 1e-6


def test_kernel_diagonal_equals_accumulator():
    tr = krein.propagate(STEP, 0.8 + 0.3j, np.linspace(0, 10, 101))
    k = kernels.kernel_at(tr, tr, 10.0)
    assert k.imag == 0 and k.real > 0
    assert abs(k - tr.acc_P2[-1]) <= 1e-12 * tr.acc_P2[-1]


def test_hermitian_symmetry_is_exact():
    a, b = krein.propagate_many(STEP, [1.0 + 0.2j, -0.5 + 0.9j], np.linspace(0, 8, 801))
    assert kernels.kernel_at(a, b, 8.0) == np.conj(kernels.kernel_at(b, a, 8.0))


def test_kernel_mismatched_grids():
    a = krein.propagate(STEP, 1.0, np.linspace(0, 5, 11))
    b = krein.propagate(STEP, 2.0, np.linspace(0, 5, 12))
    with pytest.raises(InvalidInputError):
        kernels.kernel_at(a, b, 5.0)


def test_cd_kernel_free_example():
    x = 0.9
    s_lam = krein.propagate(FREE, x, [0, 1.0]).state(1.0)
    s_mu = krein.propagate(FREE, 1j, [0, 1.0]).state(1.0)
    # integral_0^1 exp(i x s) conj(exp(i * i * s)) ds = integral exp((i x - 1) s) ds
    exact = (np.exp(1j * x - 1) - 1) / (1j * x - 1)
    assert kernels.kernel_via_cd(s_lam, s_mu) == pytest.approx(exact, abs=1e-14)


def test_cd_kernel_at_i_is_norm():
    tr = krein.propagate(STEP, 1j, np.linspace(0, 4, 401))
    st = tr.state(4.0)
    assert kernels.kernel_via_cd(st, st) == pytest.approx(tr.acc_P2[-1], rel=1e-10)


def test_cd_kernel_rejects_degenerate_pair():
    st = krein.propagate(STEP, 1.0, [0, 3.0]).state(3.0)
    with pytest.raises(DegeneratePairError):
        kernels.kernel_via_cd(st, st)
    with pytest.raises(InvalidInputError):
        kernels.kernel_via_cd(st, KreinState.initial(2.0))


def test_cd_kernel_matches_quadrature():
    rng = np.random.default_rng(7)
    lam = rng.uniform(-1.5, 1.5, 8) + 1j * rng.uniform(0, 0.5, 8)
    mu = rng.uniform(-1.5, 1.5, 8) + 1j * rng.uniform(0, 0.5, 8)
    lam[0], mu[0] = 1.0, 2.0  # distinct real pair at r = 50
    grid = np.linspace(0, 50, 50001)
    trs = krein.propagate_many(STEP, np.concatenate([lam, mu]), grid)
    for k in range(8):
        tl, tm = trs[k], trs[8 + k]
        via_cd = kernels.kernel_via_cd(tl.state(50.0), tm.state(50.0))
        quad = kernels.kernel_at(tm, tl, 50.0)
        assert abs(via_cd - quad) <= 1e-6 * max(1.0, abs(quad))


def test_christoffel_m_free_and_plateau():
    tr = krein.propagate(FREE, 2.0, [0, 7.0])
    est = kernels.christoffel_m(tr, 7.0)
    assert est.r_times_m == pytest.approx(1.0, abs=1e-14)
    assert est.m * est.K_diag == pytest.approx(1.0, abs=1e-12)
    tr = krein.propagate(STEP, 1.0, krein.default_r_grid(2000.0, extra=[20.0, 200.0]))
    target = 1 / abs(krein.transfer_to(STEP, [1.0], 2.0)[1][0]) ** 2
    errs = [abs(kernels.christoffel_m(tr, r).r_times_m / target - 1) for r in (20.0, 200.0, 2000.0)]
    assert errs[2] < 0.01 and errs[2] < errs[1] < errs[0]


def test_extremal_function():
    g = np.linspace(0, 4, 4001)
    z0, *others = krein.propagate_many(FREE, [0.0, 0.5, 2.0, -1.0], g)
    assert kernels.extremal_eval(z0, z0, 4.0) == 1
    for tr in others:
        x = tr.lam.real
        exact = (np.exp(1j * x * 4) - 1) / (1j * x * 4)
        assert abs(kernels.extremal_eval(z0, tr, 4.0) - exact) < 1e-6


def test_extremal_growth_lemma():
    r = 10.0
    t = np.linspace(-4, 4, 50)
    grid = np.linspace(0, r, 2001)
    z0 = 0.7 + 0.4j
    for gamma in (0.1 / r, 1 / r, 10 / r):
        trs = krein.propagate_many(STEP, np.concatenate([[z0], t, t + 1j * gamma]), grid)
        base = trs[0]
        for k in range(len(t)):
            low = abs(kernels.extremal_eval(base, trs[1 + k], r))
            high = abs(kernels.extremal_eval(base, trs[1 + len(t) + k], r))
            assert low <= high * np.exp(gamma * r)


def test_pw_oracle_free():
    dens = LineDensity.constant(FREE_DENSITY)
    assert kernels.pw_minimize_oracle(dens, 0.0, 5.0, 64) == pytest.approx(0.2, rel=0.01)


def test_pw_oracle_upper_bound_and_monotone():
    dens = density_from_truncated_coefficient(STEP)
    m = kernels.christoffel_m(krein.propagate(STEP, 1.0, np.linspace(0, 5, 501)), 5.0).m
    vals = [kernels.pw_minimize_oracle(dens, 1.0, 5.0, n) for n in (32, 64, 128)]
    assert vals[0] > vals[1] > vals[2] >= m
    assert vals[2] == pytest.approx(m, rel=0.005)


def test_reproducing_minimality():
    dens = density_from_truncated_coefficient(STEP)
    r, n, z0 = 5.0, 64, 0.5 + 0.2j
    m = kernels.christoffel_m(krein.propagate(STEP, z0, np.linspace(0, r, 501)), r).m
    q = kernels.pw_quadratic_form(dens, r, n)
    e = kernels._basis([z0], r, n)[0]
    rng = np.random.default_rng(11)
    for _ in range(100):
        c = rng.normal(size=n) + 1j * rng.normal(size=n)
        c /= e @ c  # f(z0) = 1
        assert np.real(np.conj(c) @ q @ c) >= m


def test_pw_oracle_validation():
    dens = LineDensity.constant(FREE_DENSITY)
    with pytest.raises(InvalidInputError):
        kernels.pw_minimize_oracle(dens, 0.0, 5.0, 4)
    with pytest.raises(InvalidInputError):
        kernels.pw_minimize_oracle(dens, 0.0, 0.0, 16)


def test_convergence_csv(tmp_path):
    kernels.write_convergence_csv(tmp_path / "c.csv", [(20.0, 1.1, 1.0), (200.0, 1.01, 1.0)])
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["r", "r_times_m", "target_2pi_sigma"] and rows[2] == ["200", "1.01", "1"]
