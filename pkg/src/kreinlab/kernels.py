"""Reproducing kernels, Christoffel functions and the Paley-Wiener minimization oracle."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegeneratePairError, IllConditionedError, IntegrityError, InvalidInputError
from .krein import KreinState, Trajectory, check_shared
from .measures import LineDensity
from .numerics import r_kernel, trapezoid

__all__ = [
    "KernelEstimate",
    "kernel_at",
    "kernel_via_cd",
    "christoffel_m",
    "extremal_eval",
    "pw_minimize_oracle",
    "pw_quadratic_form",
    "write_convergence_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelEstimate:
    z0: complex
    r: float
    K_diag: float
    m: float
    source: str = "quadrature"

    @property
    def r_times_m(self) -> float:
        return self.r * self.m


def kernel_at(traj_zprime: Trajectory, traj_z: Trajectory, r: float) -> complex:
    """K_r(z', z) = integral_0^r conj(P(s, z')) P(s, z) ds.

    Off the diagonal this is the trapezoid rule on the shared grid.  On the
    diagonal (same spectral parameter) the running integral of |P|^2 carried
    by the trajectory is returned, so that K_r(z, z) and m_r share one value.
    """
    check_shared(traj_zprime, traj_z)
    i = traj_z.index_of(r)
    if traj_zprime.lam == traj_z.lam:
        return complex(traj_z.acc_P2[i])
    y = np.conj(traj_zprime.P[: i + 1]) * traj_z.P[: i + 1]
    return complex(trapezoid(y, traj_z.r[: i + 1]))


def kernel_via_cd(state_lambda: KreinState, state_mu: KreinState) -> complex:
    """integral_0^r P(s, lam) conj(P(s, mu)) ds = K_r(mu, lam) from the endpoint values alone."""
    if abs(state_lambda.r - state_mu.r) > 1e-12 * max(1.0, state_lambda.r):
        raise InvalidInputError("states must sit at the same radius")
    lam, mu = state_lambda.lam, state_mu.lam
    denom = 1j * (lam - np.conj(mu))
    if abs(denom) <= 1e-14 * max(1.0, abs(lam), abs(mu)):
        raise DegeneratePairError("lam == conj(mu); use kernel_at instead")
    num = state_lambda.P * np.conj(state_mu.P) - state_lambda.P_star * np.conj(state_mu.P_star)
    return complex(num / denom)


def christoffel_m(trajectory: Trajectory, r: float) -> KernelEstimate:
    """m_r(sigma, z) = 1 / K_r(z, z) at the trajectory's own spectral parameter."""
    i = trajectory.index_of(r)
    k = float(trajectory.acc_P2[i])
    if not k > 0:
        raise IntegrityError("K_r(z, z) vanished; the integrand |P|^2 starts at 1")
    return KernelEstimate(trajectory.lam, float(trajectory.r[i]), k, 1.0 / k, "quadrature")


def extremal_eval(traj_z0: Trajectory, traj_z: Trajectory, r: float) -> complex:
    """f_r(z) = K_r(z0, z) / K_r(z0, z0); equals 1 at z = z0."""
    num = kernel_at(traj_z0, traj_z, r)
    den = kernel_at(traj_z0, traj_z0, r)
    return num / den


def _basis(x, r, n_basis):
    """Values e_k(x) = integral over cell k of [0, r] of exp(i x s) ds, shape (len(x), n)."""
    h = r / n_basis
    starts = h * np.arange(n_basis)
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    # h * exp(i x s_k) * R(h x); R continued analytically for complex x
    hx = h * x
    with np.errstate(invalid="ignore", divide="ignore"):
        rk = np.where(np.abs(hx) < 1e-8, 1.0 + 0.5j * hx, (np.exp(1j * hx) - 1.0) / (1j * hx))
    if np.all(x.imag == 0):
        rk = r_kernel(hx.real)
    return h * np.exp(1j * np.outer(x, starts)) * rk[:, None]


def pw_quadratic_form(density: LineDensity, r: float, n_basis: int) -> np.ndarray:
    """Gram matrix Q[j, k] = integral conj(e_j) e_k d sigma for the cell basis.

    The constant exterior density is applied to the whole line through
    Plancherel (integral |f|^2 dx = 2 pi ||phi||^2), then the window samples
    contribute their excess over it by the trapezoid rule.
    """
    h = r / n_basis
    x = density.x
    e = _basis(x, r, n_basis)
    wts = np.empty_like(x)
    dx = np.diff(x)
    wts[0] = dx[0] / 2
    wts[-1] = dx[-1] / 2
    wts[1:-1] = (dx[1:] + dx[:-1]) / 2
    excess = wts * (density.values - density.exterior_value)
    q = (np.conj(e) * excess[:, None]).T @ e
    q += 2 * np.pi * density.exterior_value * h * np.eye(n_basis)
    for loc, w in density.point_masses:
        ev = _basis([loc], r, n_basis)[0]
        q += w * np.outer(np.conj(ev), ev)
    return 0.5 * (q + q.conj().T)


def pw_minimize_oracle(density: LineDensity, z0: complex, r: float, n_basis: int) -> float:
    """Minimum of integral |f|^2 d sigma over f(x) = int_0^r phi(s) e^{ixs} ds with f(z0) = 1,
    phi piecewise constant on ``n_basis`` equal cells.

    A restricted version of the extremal problem defining m_r, hence an upper
    bound that decreases as the cells are refined.
    """
    if n_basis < 8:
        raise InvalidInputError("n_basis must be at least 8")
    if not r > 0:
        raise InvalidInputError("r must be positive")
    q = pw_quadratic_form(density, r, n_basis)
    u = np.conj(_basis([z0], r, n_basis)[0])
    try:
        y = linalg.cho_solve(linalg.cho_factor(q), u)
    except linalg.LinAlgError:
        ridge = 1e-12 * np.trace(q).real / n_basis
        log.warning("normal matrix not positive definite; retrying with ridge %.3e", ridge)
        try:
            y = linalg.cho_solve(linalg.cho_factor(q + ridge * np.eye(n_basis)), u)
        except linalg.LinAlgError as exc:
            raise IllConditionedError("PW normal equations are singular", np.linalg.cond(q)) from exc
    val = float(np.real(np.vdot(u, y)))
    if not val > 0:
        raise IllConditionedError("PW normal equations gave a nonpositive kernel", np.linalg.cond(q))
    return 1.0 / val


def write_convergence_csv(path, rows) -> None:
    """Rows of (r, r_times_m, target_2pi_sigma)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["r", "r_times_m", "target_2pi_sigma"])
        for r, rm, tgt in rows:
            wr.writerow([format(float(r), ".17g"), format(float(rm), ".17g"), format(float(tgt), ".17g")])
