"""Krein systems with piecewise-constant coefficients.

The system is

    dP/dr  = i*lam*P - conj(a(r)) * Pstar,   P(0) = 1,
    dPstar/dr = -a(r) * P,                   Pstar(0) = 1,

and on every piece where ``a`` is constant it is integrated exactly with a
2x2 matrix exponential.  Running integrals of |P|^2, Pstar and |Pstar| are
carried along so that Cesaro means and Christoffel functions come out of a
single sequential pass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _propagator
from .errors import InvalidInputError
from .numerics import trapezoid

__all__ = [
    "Coefficient",
    "KreinState",
    "Trajectory",
    "transfer_matrix",
    "step_exact",
    "transfer_to",
    "default_r_grid",
    "propagate",
    "propagate_many",
    "cd_residual",
    "cesaro_mean_p2",
    "teplyaev_average",
    "abs_pstar_average",
    "teplyaev_bound",
]


@dataclass(frozen=True, eq=False)
class Coefficient:
    """Piecewise-constant complex coefficient ``a(r)``, zero beyond the last breakpoint.

    ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``.  Coefficients
    produced from a generator rule (``extended=True``) are truncations of a
    non-compactly supported function; ``generator`` records the rule.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    extended: bool = False
    generator: dict | None = field(default=None)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=complex)
        if bp.ndim != 1 or vals.ndim != 1 or len(bp) != len(vals) + 1:
            raise InvalidInputError("need len(breakpoints) == len(values) + 1")
        if bp[0] != 0.0:
            raise InvalidInputError("first breakpoint must be 0")
        if np.any(np.diff(bp) <= 0) or not np.all(np.isfinite(bp)):
            raise InvalidInputError("breakpoints must be finite and strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("coefficient values must be finite")
        bp.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls) -> "Coefficient":
        return cls(np.array([0.0]), np.array([], dtype=complex))

    @classmethod
    def step(cls, value: complex, length: float) -> "Coefficient":
        """``a = value`` on ``[0, length)``."""
        if length <= 0:
            raise InvalidInputError("length must be positive")
        return cls(np.array([0.0, float(length)]), np.array([value], dtype=complex))

    @classmethod
    def pieces(cls, breakpoints: Sequence[float], values: Sequence[complex]) -> "Coefficient":
        return cls(np.asarray(breakpoints, dtype=float), np.asarray(values, dtype=complex))

    @classmethod
    def power_law(
        cls,
        c: float,
        p: float,
        truncate_at: float,
        max_piece_width: float = 0.05,
    ) -> "Coefficient":
        """Midpoint sampling of ``c * (1 + r)**(-p)`` on ``[0, truncate_at]``.

        Square integrable on the half-line for ``p > 1/2``.
        """
        if truncate_at <= 0 or max_piece_width <= 0:
            raise InvalidInputError("truncate_at and max_piece_width must be positive")
        n = max(1, math.ceil(truncate_at / max_piece_width))
        bp = np.linspace(0.0, truncate_at, n + 1)
        mid = 0.5 * (bp[1:] + bp[:-1])
        gen = {
            "kind": "power",
            "c": c,
            "p": p,
            "truncate_at": truncate_at,
            "max_piece_width": max_piece_width,
        }
        return cls(bp, c * (1.0 + mid) ** (-p), extended=True, generator=gen)

    @property
    def support_end(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def real_valued(self) -> bool:
        return bool(np.all(self.values.imag == 0.0))

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0))

    def value_at(self, r):
        """Coefficient value at radius ``r`` (vectorized); zero outside the support."""
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.breakpoints, r, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.values))
        out = np.zeros(r.shape, dtype=complex)
        out[inside] = self.values[idx[inside]]
        return out

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2 * np.diff(self.breakpoints))))

    def same_as(self, other: "Coefficient") -> bool:
        return self is other or (
            np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
        )

    def describe(self) -> dict:
        if self.generator is not None:
            return dict(self.generator)
        return {
            "kind": "pieces",
            "breakpoints": self.breakpoints.tolist(),
            "values": [[v.real, v.imag] for v in self.values.tolist()],
        }


@dataclass(frozen=True)
class KreinState:
    r: float
    lam: complex
    P: complex
    P_star: complex

    @classmethod
    def initial(cls, lam: complex) -> "KreinState":
        return cls(0.0, complex(lam), 1.0 + 0j, 1.0 + 0j)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of (P, Pstar) along ``r`` for one spectral parameter.

    ``acc_P2``, ``acc_Pstar`` and ``acc_absPstar`` hold the integrals from 0 to
    ``r[i]`` of |P|^2, Pstar and |Pstar|.  ``r[0]`` is always 0.
    """

    lam: complex
    r: np.ndarray
    P: np.ndarray
    Pstar: np.ndarray
    acc_P2: np.ndarray
    acc_Pstar: np.ndarray
    acc_absPstar: np.ndarray
    coefficient: Coefficient

    def index_of(self, r: float) -> int:
        i = int(np.searchsorted(self.r, r))
        tol = 1e-12 * max(1.0, abs(r))
        for j in (i - 1, i):
            if 0 <= j < len(self.r) and abs(self.r[j] - r) <= tol:
                return j
        raise InvalidInputError(f"radius {r!r} is not on the trajectory grid")

    def state(self, r: float) -> KreinState:
        i = self.index_of(r)
        return KreinState(float(self.r[i]), self.lam, complex(self.P[i]), complex(self.Pstar[i]))

    def states(self) -> list[KreinState]:
        return [
            KreinState(float(r), self.lam, complex(p), complex(s))
            for r, p, s in zip(self.r, self.P, self.Pstar)
        ]

    def to_csv(self, path) -> None:
        """Write ``r,re_P,im_P,re_Pstar,im_Pstar,acc_P2`` rows."""
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["r", "re_P", "im_P", "re_Pstar", "im_Pstar", "acc_P2"])
            for r, p, s, a in zip(self.r, self.P, self.Pstar, self.acc_P2):
                wr.writerow([_g(r), _g(p.real), _g(p.imag), _g(s.real), _g(s.imag), _g(a)])


def _g(x) -> str:
    return format(float(x), ".17g")


def _generator(a, lam):
    a = np.asarray(a, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    return 1j * lam, -np.conj(a), -a, np.zeros(np.broadcast_shapes(a.shape, lam.shape))


def _transfers(a, lam, dt):
    """Transfer entries over a step of length ``dt``; exact diagonal when ``a == 0``."""
    t00, t01, t10, t11 = _propagator.expm2(*_generator(a, lam), dt)
    free = np.broadcast_to(np.asarray(a) == 0, t00.shape)
    if np.any(free):
        e = np.broadcast_to(np.exp(1j * np.asarray(lam) * np.asarray(dt)), t00.shape)
        t00 = np.where(free, e, t00)
        t01 = np.where(free, 0.0, t01)
        t10 = np.where(free, 0.0, t10)
        t11 = np.where(free, 1.0, t11)
    return t00, t01, t10, t11


def transfer_matrix(a: complex, lam: complex, dr: float) -> np.ndarray:
    """exp(M dr) with M = [[i lam, -conj(a)], [-a, 0]]; determinant exp(i lam dr)."""
    t = _transfers(a, lam, dr)
    return np.array([[t[0], t[1]], [t[2], t[3]]], dtype=complex)


def step_exact(state: KreinState, a: complex, dr: float) -> KreinState:
    """Advance ``state`` by ``dr`` under a constant coefficient ``a``."""
    if not dr > 0:
        raise InvalidInputError("dr must be positive")
    t = transfer_matrix(a, state.lam, dr)
    p = t[0, 0] * state.P + t[0, 1] * state.P_star
    s = t[1, 0] * state.P + t[1, 1] * state.P_star
    return KreinState(state.r + dr, state.lam, complex(p), complex(s))


def transfer_to(coefficient: Coefficient, lambdas, r: float):
    """(P(r, lam), Pstar(r, lam)) for an array of ``lambdas``, piece by piece."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    u = np.ones_like(lam)
    w = np.ones_like(lam)
    bp = coefficient.breakpoints
    for k, a in enumerate(coefficient.values):
        lo, hi = bp[k], min(bp[k + 1], r)
        if hi <= lo:
            break
        t00, t01, t10, t11 = _transfers(a, lam, hi - lo)
        u, w = t00 * u + t01 * w, t10 * u + t11 * w
    if r > coefficient.support_end:
        u = u * np.exp(1j * lam * (r - coefficient.support_end))
    return u, w


def default_r_grid(
    r_max: float,
    fine_step: float = 0.01,
    fine_until: float = 10.0,
    growth: float = 1.05,
    extra: Sequence[float] = (),
) -> np.ndarray:
    """Uniform spacing up to ``fine_until``, geometric growth afterwards, ending at ``r_max``."""
    if r_max <= 0:
        raise InvalidInputError("r_max must be positive")
    top = min(fine_until, r_max)
    n = max(1, int(round(top / fine_step)))
    pts = [np.linspace(0.0, top, n + 1)]
    r = top
    geo = []
    while r * growth < r_max:
        r *= growth
        geo.append(r)
    pts.append(np.asarray(geo))
    pts.append(np.asarray([r_max], dtype=float))
    pts.append(np.asarray([x for x in extra if 0 <= x <= r_max], dtype=float))
    return np.unique(np.concatenate(pts))


def _validate_grid(r_grid) -> np.ndarray:
    r = np.asarray(r_grid, dtype=float)
    if r.ndim != 1 or len(r) < 1 or not np.all(np.isfinite(r)):
        raise InvalidInputError("r_grid must be a finite 1-D sequence")
    if r[0] < 0:
        raise InvalidInputError("r_grid must be nonnegative")
    if np.any(np.diff(r) <= 0):
        raise InvalidInputError("r_grid must be strictly increasing")
    if r[0] > 0:
        r = np.concatenate([[0.0], r])
    return r


def propagate_many(
    coefficient: Coefficient,
    lambdas,
    r_grid,
    max_substep: float = 0.05,
) -> list[Trajectory]:
    """Propagate the Krein system for every entry of ``lambdas`` on a shared grid.

    Steps are split at coefficient breakpoints.  Where ``a != 0`` they are
    further split into substeps no longer than ``min(max_substep, 0.5/|lam|)``
    and the running integrals use 4-point Gauss-Legendre with the exact in-step
    solution; where ``a == 0`` the integrals are analytic.
    """
    lam = np.atleast_1d(np.asarray(lambdas, dtype=complex))
    r = _validate_grid(r_grid)
    if len(r) < 2:
        raise InvalidInputError("r_grid must reach beyond 0")
    bp = coefficient.breakpoints
    events = np.union1d(r, bp[(bp > 0) & (bp < r[-1])])
    lengths = np.diff(events)
    a_iv = coefficient.value_at(0.5 * (events[1:] + events[:-1]))
    h = min(max_substep, 0.5 / max(1.0, float(np.max(np.abs(lam)))))
    nsub = np.where(a_iv != 0, np.maximum(1, np.ceil(lengths / h)), 1).astype(int)
    dt = np.repeat(lengths / nsub, nsub)
    a = np.repeat(a_iv, nsub)
    # index (into the substep boundary array) of every grid point
    ends = np.concatenate([[0], np.cumsum(nsub)])
    rec = ends[np.searchsorted(events, r)]

    t00, t01, t10, t11 = _transfers(a[:, None], lam[None, :], dt[:, None])
    U, W = _propagator.chain(t00, t01, t10, t11, np.ones_like(lam), np.ones_like(lam))
    u, w = U[:-1], W[:-1]

    y = lam.imag[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        decay = np.where(y == 0, dt[:, None], -np.expm1(-2 * y * dt[:, None]) / (2 * y))
    dA = np.abs(u) ** 2 * decay
    dB = w * dt[:, None]
    dC = np.abs(w) * dt[:, None]

    nz = np.flatnonzero(a != 0)
    if len(nz):
        tau = 0.5 * dt[nz, None] * (1.0 + _propagator.GAUSS_NODES[None, :])
        om = 0.5 * dt[nz, None] * _propagator.GAUSS_WEIGHTS[None, :]
        n00, n01, n10, n11 = _transfers(a[nz, None, None], lam[None, None, :], tau[:, :, None])
        un, wn = u[nz][:, None, :], w[nz][:, None, :]
        p_nodes = n00 * un + n01 * wn
        s_nodes = n10 * un + n11 * wn
        om = om[:, :, None]
        dA[nz] = np.sum(om * np.abs(p_nodes) ** 2, axis=1)
        dB[nz] = np.sum(om * s_nodes, axis=1)
        dC[nz] = np.sum(om * np.abs(s_nodes), axis=1)

    zero = np.zeros((1, len(lam)))
    A = np.concatenate([zero, np.cumsum(dA, axis=0)])[rec]
    B = np.concatenate([zero.astype(complex), np.cumsum(dB, axis=0)])[rec]
    C = np.concatenate([zero, np.cumsum(dC, axis=0)])[rec]
    P = U[rec]
    S = W[rec]
    out = []
    for j, lj in enumerate(lam.tolist()):
        out.append(
            Trajectory(
                lam=complex(lj),
                r=r.copy(),
                P=P[:, j].copy(),
                Pstar=S[:, j].copy(),
                acc_P2=A[:, j].copy(),
                acc_Pstar=B[:, j].copy(),
                acc_absPstar=C[:, j].copy(),
                coefficient=coefficient,
            )
        )
    return out


def propagate(coefficient: Coefficient, lam: complex, r_grid, max_substep: float = 0.05) -> Trajectory:
    """Single-``lam`` version of :func:`propagate_many`."""
    return propagate_many(coefficient, [lam], r_grid, max_substep=max_substep)[0]


def check_shared(a: Trajectory, b: Trajectory) -> None:
    if not np.array_equal(a.r, b.r):
        raise InvalidInputError("trajectories must share the same r grid")
    if not a.coefficient.same_as(b.coefficient):
        raise InvalidInputError("trajectories come from different coefficients")


def cd_residual(traj_lambda: Trajectory, traj_mu: Trajectory, r: float) -> float:
    """Normalized defect of the Christoffel-Darboux identity at radius ``r``.

    The cross integral of P(., lam) conj(P(., mu)) is taken by the trapezoid
    rule on the shared grid, so the residual decays like the grid step squared.
    """
    check_shared(traj_lambda, traj_mu)
    i = traj_lambda.index_of(r)
    lam, mu = traj_lambda.lam, traj_mu.lam
    pl, pm = traj_lambda.P, traj_mu.P
    cross = trapezoid(pl[: i + 1] * np.conj(pm[: i + 1]), traj_lambda.r[: i + 1])
    sl, sm = traj_lambda.Pstar[i], traj_mu.Pstar[i]
    lhs = pl[i] * np.conj(pm[i]) - sl * np.conj(sm)
    rhs = 1j * (lam - np.conj(mu)) * cross
    return float(abs(lhs - rhs) / max(1.0, abs(sl * sm)))


def _positive_radius(traj: Trajectory, r: float) -> int:
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    return traj.index_of(r)


def cesaro_mean_p2(trajectory: Trajectory, r: float) -> float:
    """(1/r) * integral_0^r |P(s, lam)|^2 ds."""
    i = _positive_radius(trajectory, r)
    return float(trajectory.acc_P2[i] / trajectory.r[i])


def teplyaev_average(trajectory: Trajectory, r: float) -> complex:
    """(1/r) * integral_0^r Pstar(rho, lam) drho."""
    i = _positive_radius(trajectory, r)
    return complex(trajectory.acc_Pstar[i] / trajectory.r[i])


def abs_pstar_average(trajectory: Trajectory, r: float) -> float:
    """(1/r) * integral_0^r |Pstar(rho, lam)| drho."""
    i = _positive_radius(trajectory, r)
    return float(trajectory.acc_absPstar[i] / trajectory.r[i])


def teplyaev_bound(lam: complex, r: float, pi_value: complex) -> float:
    """Upper bound sqrt(1 + 1/(2 r Im lam)) |Pi(lam)| on the averages of |Pstar|."""
    if not lam.imag > 0:
        raise InvalidInputError("bound requires Im(lam) > 0")
    return math.sqrt(1.0 + 1.0 / (2.0 * r * lam.imag)) * abs(pi_value)
