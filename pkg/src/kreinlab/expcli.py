"""Config-driven experiment runner: scenarios, result rows, CSV/JSON artifacts and the CLI."""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import dirac, kernels, krein, measures, numerics, opuc
from .errors import ConfigError, KreinLabError

__all__ = [
    "ResultRow",
    "ExperimentConfig",
    "ExperimentResult",
    "SCENARIOS",
    "load_config",
    "run_experiment",
    "write_results",
    "main",
]

log = logging.getLogger("kreinlab")

RESULT_COLUMNS = [
    "scenario",
    "parameters",
    "measured_re",
    "measured_im",
    "reference_re",
    "reference_im",
    "rel_error",
    "tolerance",
    "pass",
]


class UsageError(ConfigError):
    """Unknown scenario or malformed invocation."""


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_param(v) -> str:
    if isinstance(v, complex):
        return f"{_g(v.real)}{'+' if v.imag >= 0 else '-'}{_g(abs(v.imag))}j"
    if isinstance(v, float):
        return _g(v)
    return str(v)


@dataclass(frozen=True)
class ResultRow:
    """One measured quantity; rows without a tolerance are exploratory and carry no verdict."""

    scenario: str
    parameters: str
    measured: complex
    reference: complex | None = None
    rel_error: float | None = None
    tolerance: float | None = None
    passed: bool | None = None

    @classmethod
    def check(cls, scenario, params: dict, measured, reference, tolerance: float, relative: bool = True):
        measured, reference = complex(measured), complex(reference)
        err = abs(measured - reference)
        if relative and reference != 0:
            err /= abs(reference)
        return cls(scenario, _params(params), measured, reference, err, tolerance, bool(err <= tolerance))

    @classmethod
    def bound(cls, scenario, params: dict, measured: float, upper: float, tolerance: float = 1e-12):
        """Asserts measured <= upper; the error is the relative excess over the bound."""
        err = max(0.0, (measured - upper) / abs(upper))
        return cls(scenario, _params(params), complex(measured), complex(upper), err, tolerance, err <= tolerance)

    @classmethod
    def explore(cls, scenario, params: dict, measured, reference=None):
        ref = None if reference is None else complex(reference)
        err = None
        if ref is not None:
            err = abs(complex(measured) - ref) / (abs(ref) if ref != 0 else 1.0)
        return cls(scenario, _params(params), complex(measured), ref, err)

    @property
    def asserted(self) -> bool:
        return self.passed is not None

    def cells(self) -> list[str]:
        def opt(v, f):
            return "" if v is None else f(v)

        verdict = "" if self.passed is None else ("true" if self.passed else "false")
        return [
            self.scenario,
            self.parameters,
            _g(self.measured.real),
            _g(self.measured.imag),
            opt(self.reference, lambda z: _g(z.real)),
            opt(self.reference, lambda z: _g(z.imag)),
            opt(self.rel_error, _g),
            opt(self.tolerance, _g),
            verdict,
        ]


def _params(d: dict) -> str:
    return ";".join(f"{k}={_fmt_param(v)}" for k, v in d.items())


# ---------------------------------------------------------------- config parsing


def _complex(v, where: str) -> complex:
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{where}: expected a number or [re, im], got {v!r}")


def _real(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _positive(v, where: str) -> float:
    x = _real(v, where)
    if not x > 0:
        raise ConfigError(f"{where}: must be positive")
    return x


def _count(v, where: str, minimum: int = 1) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{where}: expected an integer >= {minimum}, got {v!r}")
    return v


def _points(v, where: str) -> list[complex]:
    """A list of numbers / [re, im] pairs, or {"linspace": [a, b, n]} for real points."""
    if isinstance(v, dict):
        if set(v) != {"linspace"} or not isinstance(v["linspace"], list) or len(v["linspace"]) != 3:
            raise ConfigError(f"{where}: expected {{'linspace': [a, b, n]}}")
        a, b, n = v["linspace"]
        return [complex(x) for x in np.linspace(_real(a, where), _real(b, where), _count(n, where))]
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a nonempty list")
    return [_complex(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _real_points(v, where: str) -> list[float]:
    pts = _points(v, where)
    if any(p.imag != 0 for p in pts):
        raise ConfigError(f"{where}: points must be real")
    return [p.real for p in pts]


def _schedule(v, where: str, integer: bool = False) -> list:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a nonempty list")
    vals = [_count(x, where) if integer else _positive(x, where) for x in v]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{where}: schedule must be strictly increasing")
    return vals


def _build_coefficient(desc, where: str) -> krein.Coefficient:
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigError(f"{where}: expected an object with a 'kind'")
    kind = desc["kind"]
    try:
        if kind == "zero":
            return krein.Coefficient.zero()
        if kind == "step":
            return krein.Coefficient.step(_complex(desc["value"], where), _positive(desc["length"], where))
        if kind == "pieces":
            vals = [_complex(x, where) for x in desc["values"]]
            return krein.Coefficient.pieces([_real(x, where) for x in desc["breakpoints"]], vals)
        if kind == "power":
            return krein.Coefficient.power_law(
                _real(desc["c"], where),
                _real(desc["p"], where),
                _positive(desc["truncate_at"], where),
                _positive(desc.get("max_piece_width", 0.05), where),
            )
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from None
    except KreinLabError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown coefficient kind {kind!r}")


def _build_potential(desc, where: str) -> dirac.DiracPotential:
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigError(f"{where}: expected an object with a 'kind'")
    kind = desc["kind"]
    try:
        if kind == "pieces":
            return dirac.DiracPotential(
                [_real(x, where) for x in desc["breakpoints"]],
                [_real(x, where) for x in desc["p"]],
                [_real(x, where) for x in desc["q"]],
            )
        if kind == "power":
            return dirac.DiracPotential.power_law(
                _real(desc["c"], where),
                _real(desc["p"], where),
                _positive(desc["truncate_at"], where),
                _positive(desc.get("max_piece_width", 0.025), where),
            )
    except KeyError as exc:
        raise ConfigError(f"{where}: missing field {exc.args[0]!r}") from None
    except KreinLabError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown potential kind {kind!r}")


def _build_verblunsky(v, where: str) -> opuc.VerblunskySeq:
    if not isinstance(v, list):
        raise ConfigError(f"{where}: expected a list of coefficients")
    try:
        return opuc.VerblunskySeq([_complex(x, where) for x in v] or np.zeros(0))
    except KreinLabError as exc:
        raise ConfigError(f"{where}: {exc}") from None


# ---------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class Scenario:
    name: str
    citation: str
    defaults: dict
    validate: Callable[[dict], None]
    run: Callable[["ExperimentConfig", "ScenarioOutput"], None]


@dataclass
class ScenarioOutput:
    """What a scenario produces besides its rows: extra CSV writers and summary entries."""

    rows: list = field(default_factory=list)
    files: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def _lams_from(params, key):
    return _points(params[key], key)


def _validate_free(p):
    _points(p["lambdas"], "lambdas")
    _schedule(p["radii"], "radii")
    _positive(p["tolerance"], "tolerance")


def _run_free(cfg, out):
    p = cfg.params
    tol = p["tolerance"]
    lams = _lams_from(p, "lambdas")
    radii = _schedule(p["radii"], "radii")
    zero = krein.Coefficient.zero()
    grid = krein.default_r_grid(radii[-1], extra=radii)
    trajs = krein.propagate_many(zero, lams, grid)
    free = measures.LineDensity.constant(measures.FREE_DENSITY)
    real = [lam.real for lam in lams if lam.imag == 0]
    dtrajs = {d.lam: d for d in dirac.propagate_dirac_many(dirac.DiracPotential.zero(), real, grid)} if real else {}
    name = cfg.scenario
    for lam, tr in zip(lams, trajs):
        for r in radii:
            key = {"lambda": lam, "r": r}
            st = tr.state(r)
            out.rows.append(ResultRow.check(name, {**key, "quantity": "P"}, st.P, np.exp(1j * lam * r), tol))
            out.rows.append(ResultRow.check(name, {**key, "quantity": "Pstar"}, st.P_star, 1.0, tol))
            if lam.imag == 0:
                rm = kernels.christoffel_m(tr, r).r_times_m
                out.rows.append(ResultRow.check(name, {**key, "quantity": "r_m_r"}, rm, 1.0, tol))
                out.rows.append(ResultRow.check(name, {**key, "quantity": "cesaro_P2"}, krein.cesaro_mean_p2(tr, r), 1.0, tol))
                d = dtrajs[lam.real]
                i = d.index_of(r)
                f = d.phi[i] + 1j * d.psi[i]
                out.rows.append(ResultRow.check(name, {**key, "quantity": "dirac_f"}, f, np.exp(1j * lam.real * r), tol))
                out.rows.append(ResultRow.check(name, {**key, "quantity": "dirac_cesaro"}, d.acc_f2[i] / r, 1.0, tol))
            else:
                avg = krein.teplyaev_average(tr, r)
                out.rows.append(ResultRow.check(name, {**key, "quantity": "teplyaev_avg"}, avg, 1.0, tol))
        if lam.imag > 0:
            out.rows.append(ResultRow.check(name, {"lambda": lam, "quantity": "outer"}, numerics.outer_function(free, lam), 1.0, tol))


def _validate_cd(p):
    _build_coefficient(p["coefficient"], "coefficient")
    _count(p["pairs"], "pairs")
    for k in ("re_range", "im_range"):
        if not (isinstance(p[k], list) and len(p[k]) == 2 and _real(p[k][0], k) < _real(p[k][1], k)):
            raise ConfigError(f"{k}: expected [lo, hi] with lo < hi")
    _positive(p["r"], "r")
    _count(p["nodes"], "nodes", 3)
    _positive(p["tolerance"], "tolerance")
    _positive(p["ratio_tolerance"], "ratio_tolerance")


def _run_cd(cfg, out):
    p = cfg.params
    coef = _build_coefficient(p["coefficient"], "coefficient")
    rng = np.random.default_rng(cfg.seed)
    n = p["pairs"]
    re = rng.uniform(*p["re_range"], size=(n, 2))
    im = rng.uniform(*p["im_range"], size=(n, 2))
    lam = re[:, 0] + 1j * im[:, 0]
    mu = re[:, 1] + 1j * im[:, 1]
    r = p["r"]
    coarse = np.linspace(0.0, r, p["nodes"])
    fine = np.linspace(0.0, r, 2 * p["nodes"] - 1)
    spectral = np.concatenate([lam, mu])
    res = {}
    for label, grid in (("coarse", coarse), ("fine", fine)):
        trs = krein.propagate_many(coef, spectral, grid)
        res[label] = [krein.cd_residual(trs[k], trs[n + k], r) for k in range(n)]
    name = cfg.scenario
    for k in range(n):
        key = {"lambda": complex(lam[k]), "mu": complex(mu[k])}
        rc, rf = res["coarse"][k], res["fine"][k]
        out.rows.append(ResultRow.check(name, {**key, "nodes": len(coarse)}, rc, 0.0, p["tolerance"]))
        out.rows.append(ResultRow.check(name, {**key, "nodes": len(fine)}, rf, 0.0, p["tolerance"]))
        out.rows.append(ResultRow.check(name, {**key, "quantity": "refinement_ratio"}, rc / rf, 4.0, p["ratio_tolerance"]))
    out.extras["max_residual"] = max(res["coarse"])
    out.extras["coefficient"] = coef.describe()


def _validate_mnt_line(p):
    _build_coefficient(p["reference_coefficient"], "reference_coefficient")
    _real_points(p["points"], "points")
    _schedule(p["r_schedule"], "r_schedule")
    _positive(p["tolerance"], "tolerance")
    _build_coefficient(p["trend_coefficient"], "trend_coefficient")
    _real_points(p["trend_points"], "trend_points")
    _schedule(p["trend_r_schedule"], "trend_r_schedule")
    _positive(p["oracle_r"], "oracle_r")
    _points(p["oracle_points"], "oracle_points")
    _schedule(p["oracle_n_basis"], "oracle_n_basis", integer=True)
    if p["oracle_n_basis"][0] < 8:
        raise ConfigError("oracle_n_basis: entries must be >= 8")
    _positive(p["oracle_tolerance"], "oracle_tolerance")


def _mnt_rows(name, coef, xs, schedule, asserted_at, tol, label):
    grid = krein.default_r_grid(schedule[-1], extra=schedule)
    trs = krein.propagate_many(coef, xs, grid)
    target = 1.0 / np.abs(krein.transfer_to(coef, xs, coef.support_end)[1]) ** 2  # 2 pi sigma'
    rows, conv = [], []
    for x, tr, tgt in zip(xs, trs, target.tolist()):
        for r in schedule:
            rm = kernels.christoffel_m(tr, r).r_times_m
            key = {"coefficient": label, "x": x, "r": r}
            if r == asserted_at:
                rows.append(ResultRow.check(name, key, rm, tgt, tol))
            else:
                rows.append(ResultRow.explore(name, key, rm, tgt))
            conv.append((x, r, rm, tgt))
    return rows, conv


def _run_mnt_line(cfg, out):
    p = cfg.params
    name = cfg.scenario
    ref = _build_coefficient(p["reference_coefficient"], "reference_coefficient")
    sched = p["r_schedule"]
    rows, conv = _mnt_rows(name, ref, _real_points(p["points"], "points"), sched, sched[-1], p["tolerance"], "reference")
    out.rows += rows
    trend = _build_coefficient(p["trend_coefficient"], "trend_coefficient")
    trows, tconv = _mnt_rows(
        name, trend, _real_points(p["trend_points"], "trend_points"), p["trend_r_schedule"], None, None, "trend"
    )
    out.rows += trows
    out.files["mnt_reference.csv"] = lambda path: kernels.write_convergence_csv(path, [c[1:] for c in conv])
    out.files["mnt_trend.csv"] = lambda path: kernels.write_convergence_csv(path, [c[1:] for c in tconv])

    # restricted Paley-Wiener minimization against 1 / K_r(z0, z0)
    r = p["oracle_r"]
    grid = np.linspace(0.0, r, 1001)
    cases = [("free", krein.Coefficient.zero(), measures.LineDensity.constant(measures.FREE_DENSITY)),
             ("reference", ref, measures.density_from_truncated_coefficient(ref))]
    for label, coef, dens in cases:
        for z0 in _points(p["oracle_points"], "oracle_points"):
            m = kernels.christoffel_m(krein.propagate(coef, z0, grid), r).m
            prev = math.inf
            for nb in p["oracle_n_basis"]:
                val = kernels.pw_minimize_oracle(dens, z0, r, nb)
                key = {"density": label, "z0": z0, "r": r, "n_basis": nb}
                if nb == p["oracle_n_basis"][-1]:
                    out.rows.append(ResultRow.check(name, key, val, m, p["oracle_tolerance"]))
                else:
                    out.rows.append(ResultRow.explore(name, key, val, m))
                out.rows.append(ResultRow.bound(name, {**key, "quantity": "monotone"}, val, prev))
                prev = val
    out.extras["reference_coefficient"] = ref.describe()
    out.extras["trend_coefficient"] = trend.describe()
    out.extras["trend_truncation_radius"] = trend.support_end


def _validate_teplyaev(p):
    if not isinstance(p["coefficients"], list) or not p["coefficients"]:
        raise ConfigError("coefficients: expected a nonempty list")
    for i, c in enumerate(p["coefficients"]):
        coef = _build_coefficient(c, f"coefficients[{i}]")
        if not coef.real_valued:
            raise ConfigError(f"coefficients[{i}]: the averages converge to Pstar(R0, .) for real coefficients only")
    for key in ("lambdas", "outer_lambdas"):
        if any(lam.imag <= 0 for lam in _points(p[key], key)):
            raise ConfigError(f"{key}: points must lie in the upper half-plane")
    _schedule(p["r_schedule"], "r_schedule")
    _positive(p["window_half_width"], "window_half_width")
    _count(p["window_nodes"], "window_nodes", 2)
    for key in ("stability_tolerance", "outer_tolerance", "closed_form_tolerance"):
        _positive(p[key], key)


def _run_teplyaev(cfg, out):
    p = cfg.params
    name = cfg.scenario
    sched = p["r_schedule"]
    lams = _points(p["lambdas"], "lambdas")
    outer_lams = _points(p["outer_lambdas"], "outer_lambdas")
    for ci, desc in enumerate(p["coefficients"]):
        coef = _build_coefficient(desc, f"coefficients[{ci}]")
        r0 = coef.support_end
        limit = krein.transfer_to(coef, lams, r0)[1]
        trs = krein.propagate_many(coef, lams, krein.default_r_grid(sched[-1], extra=sched + [r0]))
        for lam, tr, pi in zip(lams, trs, limit.tolist()):
            # beyond R0, Pstar is frozen, so r * |average - Pstar(R0)| / R0 is the same for every r
            consts = [r * abs(krein.teplyaev_average(tr, r) - pi) / r0 for r in sched]
            for r, c in zip(sched, consts):
                key = {"coefficient": ci, "lambda": lam, "r": r}
                out.rows.append(ResultRow.explore(name, {**key, "quantity": "average"}, krein.teplyaev_average(tr, r), pi))
                out.rows.append(ResultRow.check(name, {**key, "quantity": "rate_constant"}, c, consts[-1], p["stability_tolerance"]))
                out.rows.append(
                    ResultRow.bound(
                        name,
                        {**key, "quantity": "abs_average_bound"},
                        krein.abs_pstar_average(tr, r),
                        krein.teplyaev_bound(lam, r, pi),
                    )
                )
        dens = measures.density_from_truncated_coefficient(coef, p["window_half_width"], p["window_nodes"])
        ptr = krein.propagate_many(coef, outer_lams, np.linspace(0.0, r0, 2001))
        P, S = krein.transfer_to(coef, outer_lams, r0)
        for lam, tr, pr, sr in zip(outer_lams, ptr, P.tolist(), S.tolist()):
            key = {"coefficient": ci, "lambda": lam}
            val = numerics.outer_function(dens, lam)
            out.rows.append(ResultRow.check(name, {**key, "quantity": "outer_vs_Pstar"}, val, sr, p["outer_tolerance"]))
            # beyond R0, P(s) = P(R0) exp(i lam (s - R0)), so the tail integral is explicit
            total = tr.acc_P2[-1] + abs(pr) ** 2 / (2 * lam.imag)
            out.rows.append(
                ResultRow.check(name, {**key, "quantity": "outer_modulus"}, abs(val) ** 2, 2 * lam.imag * total, p["outer_tolerance"])
            )
        out.rows.append(
            ResultRow.check(
                name,
                {"coefficient": ci, "lambda": 1j, "quantity": "closed_form_at_i"},
                numerics.outer_at_i(dens),
                numerics.outer_function(dens, 1j),
                p["closed_form_tolerance"],
            )
        )
        out.extras.setdefault("coefficients", []).append(coef.describe())


def _validate_dirac(p):
    rnd = p["random"]
    if not isinstance(rnd, dict):
        raise ConfigError("random: expected an object")
    _count(rnd["count"], "random.count", 0)
    _count(rnd["max_pieces"], "random.max_pieces")
    _positive(rnd["amplitude"], "random.amplitude")
    _count(rnd["lambdas_per_potential"], "random.lambdas_per_potential")
    _count(rnd["grid_nodes"], "random.grid_nodes", 2)
    lo, hi = (_real(x, "random.lambda_range") for x in rnd["lambda_range"])
    if not lo < hi:
        raise ConfigError("random.lambda_range: expected lo < hi")
    _positive(p["tolerance"], "tolerance")
    _build_potential(p["plateau_potential"], "plateau_potential")
    _real_points(p["plateau_lambdas"], "plateau_lambdas")
    _positive(p["plateau_tolerance"], "plateau_tolerance")
    _build_potential(p["sweep_potential"], "sweep_potential")
    _real_points(p["sweep_lambdas"], "sweep_lambdas")
    _positive(p["sweep_t_max"], "sweep_t_max")
    _positive(p["r_min"], "r_min")


def _random_potential(rng, max_pieces, amplitude):
    n = int(rng.integers(1, max_pieces + 1))
    bp = np.concatenate([[0.0], np.cumsum(rng.uniform(0.2, 1.0, n))])
    return dirac.DiracPotential(bp, rng.uniform(-amplitude, amplitude, n), rng.uniform(-amplitude, amplitude, n))


def _run_dirac(cfg, out):
    p = cfg.params
    name = cfg.scenario
    rnd = p["random"]
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for k in range(rnd["count"]):
        pot = _random_potential(rng, rnd["max_pieces"], rnd["amplitude"])
        lams = rng.uniform(*rnd["lambda_range"], size=rnd["lambdas_per_potential"])
        t = np.linspace(0.0, 2.0 * pot.support_end, rnd["grid_nodes"])
        direct = dirac.propagate_dirac_many(pot, lams, t)
        coef = dirac.potential_to_coefficient(pot)
        ktrs = krein.propagate_many(coef, lams, 2.0 * t)
        for lam, d, ktr in zip(lams.tolist(), direct, ktrs):
            via = dirac.dirac_from_krein(ktr)
            dist = float(max(np.max(np.abs(d.phi - via.phi)), np.max(np.abs(d.psi - via.psi))))
            worst = max(worst, dist)
            key = {"potential": k, "T": pot.support_end, "lambda": lam, "quantity": "transform_sup_distance"}
            out.rows.append(ResultRow.check(name, key, dist, 0.0, p["tolerance"]))
    out.extras["max_transform_distance"] = worst

    traces = []
    pot = _build_potential(p["plateau_potential"], "plateau_potential")
    big_t = pot.support_end
    t = np.linspace(0.0, 20.0 * big_t, 2001)
    for d in dirac.propagate_dirac_many(pot, _real_points(p["plateau_lambdas"], "plateau_lambdas"), t):
        traces.append(d)
        radii, means = dirac.cesaro_means(d, p["r_min"])
        sel = radii >= 10.0 * big_t * (1 - 1e-12)
        variation = float(means[sel].max() / means[sel].min() - 1.0)
        key = {"potential": "plateau", "T": big_t, "lambda": d.lam}
        out.rows.append(ResultRow.check(name, {**key, "quantity": "plateau_variation"}, variation, 0.0, p["plateau_tolerance"]))
        out.rows.append(ResultRow.explore(name, {**key, "quantity": "cesaro_sup"}, dirac.cesaro_sup(d, p["r_min"])))

    pot = _build_potential(p["sweep_potential"], "sweep_potential")
    t = krein.default_r_grid(p["sweep_t_max"], extra=[pot.support_end])
    sups = []
    for d in dirac.propagate_dirac_many(pot, _real_points(p["sweep_lambdas"], "sweep_lambdas"), t):
        traces.append(d)
        s = dirac.cesaro_sup(d, p["r_min"])
        sups.append(s)
        key = {"potential": "sweep", "T": pot.support_end, "lambda": d.lam, "quantity": "cesaro_sup"}
        out.rows.append(ResultRow.explore(name, key, s))
    out.extras["sweep_potential"] = pot.describe()
    out.extras["sweep_T"] = pot.support_end
    out.extras["sweep_l2_norm"] = pot.l2_norm
    out.extras["sweep_max_cesaro_sup"] = max(sups)
    out.extras["sweep_all_finite"] = bool(all(math.isfinite(s) for s in sups))
    out.files["dirac_cesaro.csv"] = lambda path: dirac.write_cesaro_csv(path, traces, p["r_min"])


def _angles(p, where):
    v = p[where]
    if isinstance(v, int) and not isinstance(v, bool):
        n = _count(v, where)
        return (-np.pi + (np.arange(n) + 0.5) * 2 * np.pi / n).tolist()
    return _real_points(v, where)


def _validate_opuc(p):
    _build_verblunsky(p["verblunsky"], "verblunsky")
    _schedule(p["n_schedule"], "n_schedule", integer=True)
    _angles(p, "angles")
    _count(p["gram_degree"], "gram_degree", 0)
    _points(p["christoffel_points"], "christoffel_points")
    _count(p["christoffel_n"], "christoffel_n")
    for key in ("tolerance", "gram_tolerance", "christoffel_tolerance"):
        _positive(p[key], key)


def _opuc_table(seq, mu, ns, angles):
    table = []
    for t in angles:
        dens = float(mu.density(np.array([t]))[0])
        for n in ns:
            avg = opuc.mnt_discrete_average(seq, n, t)
            w = opuc.christoffel_w(seq, None, n, np.exp(1j * t))
            table.append((n, t, n * w, avg, opuc.conjecture_average(seq, n, t), 2 * np.pi * dens))
    return table


def _run_opuc(cfg, out):
    p = cfg.params
    name = cfg.scenario
    seq = _build_verblunsky(p["verblunsky"], "verblunsky")
    mu = measures.CircleMeasure.bernstein_szego(seq.alphas)
    ns = p["n_schedule"]
    table = _opuc_table(seq, mu, ns, _angles(p, "angles"))
    for n, t, _, avg, _, two_pi_mu in table:
        key = {"n": n, "t": t}
        if n == ns[-1]:
            out.rows.append(ResultRow.check(name, key, avg, 1.0 / two_pi_mu, p["tolerance"]))
        else:
            out.rows.append(ResultRow.explore(name, key, avg, 1.0 / two_pi_mu))
    out.rows.append(
        ResultRow.check(
            name,
            {"quantity": "gram_residual", "degree": p["gram_degree"]},
            opuc.gram_residual(seq, mu, p["gram_degree"]),
            0.0,
            p["gram_tolerance"],
        )
    )
    nw = p["christoffel_n"]
    for z in _points(p["christoffel_points"], "christoffel_points"):
        out.rows.append(
            ResultRow.check(
                name,
                {"quantity": "christoffel_w", "n": nw, "z": z},
                opuc.christoffel_w(seq, None, nw, z),
                opuc.christoffel_w(None, mu, nw, z, mode="oracle"),
                p["christoffel_tolerance"],
            )
        )
    out.files["opuc_mnt.csv"] = lambda path: opuc.write_opuc_csv(path, table)
    out.extras["verblunsky"] = [[a.real, a.imag] for a in seq.alphas.tolist()]


def _validate_conjecture(p):
    if not isinstance(p["measures"], list) or not p["measures"]:
        raise ConfigError("measures: expected a nonempty list of Verblunsky sequences")
    for i, v in enumerate(p["measures"]):
        _build_verblunsky(v, f"measures[{i}]")
    _schedule(p["n_schedule"], "n_schedule", integer=True)
    _angles(p, "angles")


def _run_conjecture(cfg, out):
    p = cfg.params
    name = cfg.scenario
    for i, v in enumerate(p["measures"]):
        seq = _build_verblunsky(v, f"measures[{i}]")
        mu = measures.CircleMeasure.bernstein_szego(seq.alphas) if len(seq) else measures.CircleMeasure.lebesgue()
        table = _opuc_table(seq, mu, p["n_schedule"], _angles(p, "angles"))
        for n, t, _, _, conj, two_pi_mu in table:
            out.rows.append(ResultRow.explore(name, {"measure": i, "n": n, "t": t}, conj, 1.0 / math.sqrt(two_pi_mu)))
        out.files[f"conjecture_measure{i}.csv"] = lambda path, table=table: opuc.write_opuc_csv(path, table)


_STEP = {"kind": "step", "value": 0.5, "length": 2.0}

SCENARIOS: dict[str, Scenario] = {
    s.name: s
    for s in [
        Scenario(
            "free-sanity",
            "free system a = 0: closed forms for P, Pstar, r m_r, averages, outer function and the Dirac pair",
            {"lambdas": [0.0, 1.0, -2.5, [0.0, 1.0], [1.0, 1.0], [-0.5, 2.0]], "radii": [1.0, 5.0, 20.0], "tolerance": 1e-10},
            _validate_free,
            _run_free,
        ),
        Scenario(
            "cd-check",
            "Christoffel-Darboux identity for the Krein system, second-order in the grid step",
            {
                "coefficient": _STEP,
                "pairs": 16,
                "re_range": [-1.5, 1.5],
                "im_range": [0.0, 0.5],
                "r": 10.0,
                "nodes": 10001,
                "tolerance": 1e-6,
                "ratio_tolerance": 0.01,
            },
            _validate_cd,
            _run_cd,
        ),
        Scenario(
            "mnt-line",
            "Mate-Nevai-Totik asymptotics on the line, r m_r -> 2 pi sigma'; Paley-Wiener extremal problem",
            {
                "reference_coefficient": _STEP,
                "points": {"linspace": [-3.0, 3.0, 16]},
                "r_schedule": [20.0, 200.0, 2000.0],
                "tolerance": 0.01,
                "trend_coefficient": {"kind": "power", "c": 0.4, "p": 0.7, "truncate_at": 500.0},
                "trend_points": [0.5, 1.5],
                "trend_r_schedule": [50.0, 100.0, 200.0, 500.0, 1000.0],
                "oracle_r": 5.0,
                "oracle_points": [0.5, [1.0, 0.5]],
                "oracle_n_basis": [16, 32, 64, 128],
                "oracle_tolerance": 0.005,
            },
            _validate_mnt_line,
            _run_mnt_line,
        ),
        Scenario(
            "teplyaev",
            "Cesaro averages of Pstar converge to the outer function; outer function by Cauchy quadrature",
            {
                "coefficients": [_STEP, {"kind": "pieces", "breakpoints": [0.0, 0.5, 1.5], "values": [0.8, -0.3]}],
                "lambdas": [[0.0, 1.0], [1.0, 1.0], [0.0, 2.0]],
                "r_schedule": [50.0, 100.0, 200.0],
                "outer_lambdas": [[0.0, 1.0], [1.0, 2.0]],
                "window_half_width": 40.0,
                "window_nodes": 16384,
                "stability_tolerance": 1e-6,
                "outer_tolerance": 1e-4,
                "closed_form_tolerance": 1e-8,
            },
            _validate_teplyaev,
            _run_teplyaev,
        ),
        Scenario(
            "dirac-cesaro",
            "Dirac system through the Krein transformation; Cesaro boundedness of |f|^2",
            {
                "random": {
                    "count": 20,
                    "max_pieces": 5,
                    "amplitude": 1.0,
                    "lambdas_per_potential": 10,
                    "lambda_range": [-4.0, 4.0],
                    "grid_nodes": 401,
                },
                "tolerance": 1e-8,
                "plateau_potential": {"kind": "pieces", "breakpoints": [0.0, 1.0], "p": [1.0], "q": [0.0]},
                "plateau_lambdas": [2.0],
                "plateau_tolerance": 0.01,
                "sweep_potential": {"kind": "power", "c": 0.8, "p": 0.7, "truncate_at": 250.0},
                "sweep_lambdas": {"linspace": [0.5, 4.0, 64]},
                "sweep_t_max": 500.0,
                "r_min": 0.1,
            },
            _validate_dirac,
            _run_dirac,
        ),
        Scenario(
            "opuc-mnt",
            "discrete Mate-Nevai-Totik for a Bernstein-Szego measure; orthonormality; Christoffel function",
            {
                "verblunsky": [0.5],
                "n_schedule": [50, 100, 200, 500],
                "angles": 8,
                "tolerance": 0.01,
                "gram_degree": 20,
                "gram_tolerance": 1e-8,
                "christoffel_points": [0.5, [0.3, 0.4], [0.7648421872844885, 0.644217687237691]],
                "christoffel_n": 6,
                "christoffel_tolerance": 1e-10,
            },
            _validate_opuc,
            _run_opuc,
        ),
        Scenario(
            "conjecture-explore",
            "exploratory: (1/n) sum phi_k^*(e^{it}) against 1/sqrt(2 pi mu'(t)), no verdict",
            {
                "measures": [[], [0.5], [[0.3, 0.2], -0.4, [0.0, 0.1]]],
                "n_schedule": [10, 20, 50, 100, 200, 500],
                "angles": [1.0, 2.0],
            },
            _validate_conjecture,
            _run_conjecture,
        ),
    ]
}


# ---------------------------------------------------------------- config + run


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seed: int
    output: str
    params: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        name = raw.get("scenario")
        if name not in SCENARIOS:
            raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
        sc = SCENARIOS[name]
        seed = raw.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        output = raw.get("output", f"krein-lab-out/{name}")
        if not isinstance(output, str) or not output:
            raise ConfigError("output must be a nonempty path string")
        params = copy.deepcopy(sc.defaults)
        for key, val in raw.items():
            if key in ("scenario", "seed", "output"):
                continue
            if key not in params:
                raise ConfigError(f"unknown field {key!r} for scenario {name}")
            if isinstance(params[key], dict) and isinstance(val, dict) and "kind" not in val and "linspace" not in val:
                unknown = set(val) - set(params[key])
                if unknown:
                    raise ConfigError(f"unknown field(s) {sorted(unknown)} in {key!r}")
                params[key].update(val)
            else:
                params[key] = val
        try:
            sc.validate(params)
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        return cls(name, seed, output, params)

    def echo(self) -> dict:
        """Complete config: feeding it back reproduces the run."""
        return {"scenario": self.scenario, "seed": self.seed, "output": self.output, **copy.deepcopy(self.params)}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    files: dict
    extras: dict
    wall_time: float

    @property
    def counts(self) -> dict:
        asserted = [r for r in self.rows if r.asserted]
        passed = sum(1 for r in asserted if r.passed)
        return {
            "asserted": len(asserted),
            "passed": passed,
            "failed": len(asserted) - passed,
            "exploratory": len(self.rows) - len(asserted),
        }

    @property
    def exit_status(self) -> int:
        return 0 if self.counts["failed"] == 0 else 1

    def summary(self) -> dict:
        return {
            "scenario": self.config.scenario,
            "config": self.config.echo(),
            "counts": self.counts,
            "wall_time_s": self.wall_time,
            "extras": self.extras,
        }


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the scenario and return its rows; nothing is written to disk."""
    start = time.perf_counter()
    out = ScenarioOutput()
    SCENARIOS[config.scenario].run(config, out)
    return ExperimentResult(config, out.rows, out.files, out.extras, time.perf_counter() - start)


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_results(result: ExperimentResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(RESULT_COLUMNS)
        for row in result.rows:
            wr.writerow(row.cells())
    for fname, writer in sorted(result.files.items()):
        writer(out / fname)
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary(), fh, indent=2, default=_jsonable)
        fh.write("\n")
    return out


# ---------------------------------------------------------------- CLI


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="krein-lab", description="Krein-system experiment runner.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config", help="path to the JSON config")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--seed", type=int, help="random seed (overrides the config)")
    run.add_argument("--quiet", action="store_true", help="print nothing but errors")
    sub.add_parser("scenarios", help="list the available scenarios")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "scenarios":
        width = max(map(len, SCENARIOS))
        for sc in SCENARIOS.values():
            print(f"{sc.name:<{width}}  {sc.citation}")
        return 0

    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s")
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["output"] = args.out
        config = ExperimentConfig.from_dict(raw)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"krein-lab: config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        kind = "usage" if isinstance(exc, UsageError) else "config"
        print(f"krein-lab: {kind} error: {exc}", file=sys.stderr)
        return 2

    try:
        result = run_experiment(config)
    except KreinLabError as exc:
        print(f"krein-lab: {config.scenario} failed: {exc}", file=sys.stderr)
        return 1
    out = write_results(result, config.output)
    c = result.counts
    log.info(
        "%s: %d/%d asserted rows passed, %d exploratory, %.2f s -> %s",
        config.scenario, c["passed"], c["asserted"], c["exploratory"], result.wall_time, out,
    )
    for row in result.rows:
        if row.passed is False:
            log.info("FAIL %s rel_error=%.3e tol=%.3e", row.parameters, row.rel_error, row.tolerance)
    return result.exit_status


if __name__ == "__main__":
    sys.exit(main())
