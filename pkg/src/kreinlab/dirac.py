"""Half-line Dirac system J f' + Q f = lam f, f(0) = (1, 0), and its Krein picture.

With J = [[0, 1], [-1, 0]] and Q = [[-q, p], [p, q]] the system reads
f' = G f, G = [[p, q - lam], [lam + q, -p]], which is trace free, so every
transfer matrix has determinant 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _propagator
from .errors import InvalidInputError
from .krein import Coefficient, Trajectory

__all__ = [
    "DiracPotential",
    "DiracTrajectory",
    "potential_to_coefficient",
    "dirac_transfer",
    "propagate_dirac",
    "propagate_dirac_many",
    "dirac_from_krein",
    "cesaro_means",
    "cesaro_sup",
    "write_cesaro_csv",
]


@dataclass(frozen=True, eq=False)
class DiracPotential:
    """Real piecewise-constant p, q on [0, T]; zero beyond T."""

    breakpoints: np.ndarray
    p: np.ndarray
    q: np.ndarray
    generator: dict | None = None

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if bp.ndim != 1 or p.shape != q.shape or len(bp) != len(p) + 1:
            raise InvalidInputError("need len(breakpoints) == len(p) + 1 == len(q) + 1")
        if bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise InvalidInputError("breakpoints must start at 0 and increase strictly")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise InvalidInputError("potential values must be finite")
        for arr in (bp, p, q):
            arr.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def zero(cls) -> "DiracPotential":
        return cls(np.array([0.0]), np.array([]), np.array([]))

    @classmethod
    def power_law(cls, c: float, exponent: float, truncate_at: float, max_piece_width: float = 0.025):
        """p(t) = c (1 + t)^(-exponent) sampled at midpoints, q = 0."""
        n = max(1, math.ceil(truncate_at / max_piece_width))
        bp = np.linspace(0.0, truncate_at, n + 1)
        mid = 0.5 * (bp[1:] + bp[:-1])
        gen = {
            "kind": "power",
            "c": c,
            "p": exponent,
            "truncate_at": truncate_at,
            "max_piece_width": max_piece_width,
        }
        return cls(bp, c * (1.0 + mid) ** (-exponent), np.zeros(n), generator=gen)

    @property
    def support_end(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum((self.p**2 + self.q**2) * np.diff(self.breakpoints))))

    def values_at(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.p))
        p = np.zeros(t.shape)
        q = np.zeros(t.shape)
        p[inside] = self.p[idx[inside]]
        q[inside] = self.q[idx[inside]]
        return p, q

    def describe(self) -> dict:
        if self.generator is not None:
            return dict(self.generator)
        return {"kind": "pieces", "breakpoints": self.breakpoints.tolist(), "p": self.p.tolist(), "q": self.q.tolist()}


@dataclass(frozen=True, eq=False)
class DiracTrajectory:
    lam: float
    t: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    acc_f2: np.ndarray  # integral_0^t |phi|^2 + |psi|^2

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.t, t))
        for j in (i - 1, i):
            if 0 <= j < len(self.t) and abs(self.t[j] - t) <= 1e-12 * max(1.0, abs(t)):
                return j
        raise InvalidInputError(f"time {t!r} is not on the trajectory grid")


def potential_to_coefficient(potential: DiracPotential) -> Coefficient:
    """a(r) = -p(r/2)/2 + i q(r/2)/2 on [0, 2T]."""
    return Coefficient(2.0 * potential.breakpoints, -0.5 * potential.p + 0.5j * potential.q)


def _generator(p, q, lam):
    return p, q - lam, lam + q, -p


def dirac_transfer(p: float, q: float, lam: float, dt: float) -> np.ndarray:
    t = _propagator.expm2(*_generator(p, q, lam), dt)
    return np.array([[t[0], t[1]], [t[2], t[3]]]).real


def _validate_times(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1 or t[0] < 0 or np.any(np.diff(t) <= 0):
        raise InvalidInputError("t_grid must be nonnegative and strictly increasing")
    if t[0] > 0:
        t = np.concatenate([[0.0], t])
    if len(t) < 2:
        raise InvalidInputError("t_grid must reach beyond 0")
    return t


def propagate_dirac_many(
    potential: DiracPotential,
    lambdas: Sequence[float],
    t_grid,
    max_substep: float = 0.05,
) -> list[DiracTrajectory]:
    """Exact piecewise propagation of f' = G f for several real ``lambdas`` at once."""
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    t = _validate_times(t_grid)
    bp = potential.breakpoints
    events = np.union1d(t, bp[(bp > 0) & (bp < t[-1])])
    lengths = np.diff(events)
    h = min(max_substep, 0.5 / max(1.0, float(np.max(np.abs(lam)))))
    nsub = np.maximum(1, np.ceil(lengths / h)).astype(int)
    dt = np.repeat(lengths / nsub, nsub)
    mids = np.repeat(0.5 * (events[1:] + events[:-1]), nsub)
    p, q = potential.values_at(mids)
    ends = np.concatenate([[0], np.cumsum(nsub)])
    rec = ends[np.searchsorted(events, t)]

    gen = _generator(p[:, None], q[:, None], lam[None, :])
    t00, t01, t10, t11 = (x.real for x in _propagator.expm2(*gen, dt[:, None]))
    one = np.ones_like(lam)
    U, V = _propagator.chain(t00, t01, t10, t11, one, 0 * one)
    U, V = U.real, V.real

    tau = 0.5 * dt[:, None] * (1.0 + _propagator.GAUSS_NODES[None, :])
    om = 0.5 * dt[:, None, None] * _propagator.GAUSS_WEIGHTS[None, :, None]
    n00, n01, n10, n11 = (
        x.real for x in _propagator.expm2(*(g[:, None, :] for g in gen), tau[:, :, None])
    )
    u, v = U[:-1, None, :], V[:-1, None, :]
    f2 = (n00 * u + n01 * v) ** 2 + (n10 * u + n11 * v) ** 2
    inc = np.sum(om * f2, axis=1)
    acc = np.concatenate([np.zeros((1, len(lam))), np.cumsum(inc, axis=0)])[rec]
    out = []
    for j, lj in enumerate(lam.tolist()):
        out.append(DiracTrajectory(float(lj), t.copy(), U[rec, j].copy(), V[rec, j].copy(), acc[:, j].copy()))
    return out


def propagate_dirac(potential: DiracPotential, lam: float, t_grid, max_substep: float = 0.05) -> DiracTrajectory:
    return propagate_dirac_many(potential, [lam], t_grid, max_substep)[0]


def dirac_from_krein(krein_traj: Trajectory, t_grid=None) -> DiracTrajectory:
    """(phi, psi)(t) from (P, Pstar)(2t) of the Krein system with the mapped coefficient.

    phi = e^{-i lam t} (P + Pstar)/2, psi = e^{-i lam t} (P - Pstar)/(2i).  For real
    lam, |P| = |Pstar|, so integral_0^t |f|^2 = (1/2) integral_0^{2t} |P|^2.
    """
    lam = krein_traj.lam
    if lam.imag != 0:
        raise InvalidInputError("the Dirac picture is used for real lam only")
    if t_grid is None:
        idx = np.arange(len(krein_traj.r))
        t = krein_traj.r / 2.0
    else:
        t = np.asarray(t_grid, dtype=float)
        idx = np.array([krein_traj.index_of(2.0 * ti) for ti in t], dtype=int)
    P = krein_traj.P[idx]
    S = krein_traj.Pstar[idx]
    ph = np.exp(-1j * lam.real * t)
    phi = ph * (P + S) / 2.0
    psi = ph * (P - S) / 2j
    return DiracTrajectory(lam.real, np.asarray(t, dtype=float).copy(), phi, psi, krein_traj.acc_P2[idx] / 2.0)


def cesaro_means(trajectory: DiracTrajectory, r_min: float = 0.1):
    """Radii t >= r_min and the means (1/t) integral_0^t |f|^2."""
    keep = trajectory.t >= r_min
    t = trajectory.t[keep]
    return t, trajectory.acc_f2[keep] / t


def cesaro_sup(trajectory: DiracTrajectory, r_min: float = 0.1) -> float:
    """max over grid radii t >= r_min of (1/t) integral_0^t |f(s)|^2 ds."""
    _, means = cesaro_means(trajectory, r_min)
    if len(means) == 0:
        raise InvalidInputError("no grid radius at or beyond r_min")
    return float(np.max(means))


def write_cesaro_csv(path, trajectories: Sequence[DiracTrajectory], r_min: float = 0.1) -> None:
    """Rows ``lambda,r,cesaro_mean,cesaro_sup_so_far`` for every trajectory."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["lambda", "r", "cesaro_mean", "cesaro_sup_so_far"])
        for tr in trajectories:
            t, means = cesaro_means(tr, r_min)
            running = np.maximum.accumulate(means)
            for ti, mi, si in zip(t.tolist(), means.tolist(), running.tolist()):
                wr.writerow([format(tr.lam, ".17g"), format(ti, ".17g"), format(mi, ".17g"), format(si, ".17g")])
