"""Orthogonal polynomials on the unit circle: moments, Verblunsky coefficients,
Szego recursion, Christoffel functions and Cesaro-type averages."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import DegenerateMeasureError, InvalidInputError
from .measures import CircleMeasure

__all__ = [
    "VerblunskySeq",
    "OpucEval",
    "circle_moments",
    "verblunsky_from_moments",
    "eval_opuc",
    "christoffel_w",
    "mnt_discrete_average",
    "conjecture_average",
    "gram_residual",
    "write_opuc_csv",
]

MOMENT_NODES = 2**14


@dataclass(frozen=True, eq=False)
class VerblunskySeq:
    """alpha_0, ..., alpha_{N-1}; every later coefficient is taken to be zero."""

    alphas: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alphas, dtype=complex))
        if a.ndim != 1:
            raise InvalidInputError("alphas must be one-dimensional")
        if np.any(np.abs(a) >= 1):
            raise InvalidInputError("Verblunsky coefficients must satisfy |alpha| < 1")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    def __len__(self):
        return len(self.alphas)

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=complex)
        k = min(n, len(self.alphas))
        out[:k] = self.alphas[:k]
        return out


@dataclass(frozen=True, eq=False)
class OpucEval:
    """phis[n] = phi_n(z), phi_stars[n] = phi_n^*(z) for n = 0..degree (trailing axes follow z)."""

    z: np.ndarray
    phis: np.ndarray
    phi_stars: np.ndarray


def circle_moments(measure: CircleMeasure, count: int, nodes: int = MOMENT_NODES) -> np.ndarray:
    """c_k = integral exp(-i k theta) d mu(theta) for k = 0..count."""
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    if count >= nodes:
        raise InvalidInputError("quadrature too coarse for the requested moments")
    theta, mu = measure.samples(nodes)
    # exp(-ik theta_j) = (-1)^k exp(-2 pi i jk/n) for theta_j = -pi + 2 pi j/n
    c = np.fft.fft(mu)[: count + 1] * (2 * np.pi / nodes)
    c = c * (-1.0) ** np.arange(count + 1)
    for t, w in measure.point_masses:
        c = c + w * np.exp(-1j * np.arange(count + 1) * t)
    return c


def verblunsky_from_moments(moments: Sequence[complex]) -> VerblunskySeq:
    """Levinson-type recursion on the monic polynomials.

    conj(alpha_n) = <z Phi_n, 1> / ||Phi_n||^2, Phi_{n+1} = z Phi_n - conj(alpha_n) Phi_n^*,
    with <z^j, 1> = conj(c_j).
    """
    c = np.asarray(moments, dtype=complex)
    if len(c) < 2:
        raise InvalidInputError("need at least c_0 and c_1")
    if not c[0].real > 0:
        raise DegenerateMeasureError("c_0 must be positive")
    n_alpha = len(c) - 1
    alphas = np.empty(n_alpha, dtype=complex)
    phi = np.array([1.0 + 0j])  # monic Phi_n coefficients, ascending powers
    norm2 = c[0].real
    for n in range(n_alpha):
        inner = np.dot(phi, np.conj(c[1 : n + 2]))
        abar = inner / norm2
        alpha = np.conj(abar)
        if not abs(alpha) < 1:
            raise DegenerateMeasureError(f"|alpha_{n}| = {abs(alpha):.6g} >= 1; moment matrix not positive definite")
        alphas[n] = alpha
        star = np.conj(phi[::-1])
        phi = np.concatenate([[0.0], phi]) - abar * np.concatenate([star, [0.0]])
        norm2 *= 1.0 - abs(alpha) ** 2
        if not norm2 > 0:
            raise DegenerateMeasureError("norm of monic polynomial vanished")
    return VerblunskySeq(alphas)


def eval_opuc(verblunsky: VerblunskySeq, z, degree: int | None = None) -> OpucEval:
    """Szego recursion for orthonormal phi_n and phi_n^* up to ``degree``.

    phi_{n+1} = (z phi_n - conj(alpha_n) phi_n^*)/rho_n,
    phi_{n+1}^* = (phi_n^* - alpha_n z phi_n)/rho_n, rho_n = sqrt(1 - |alpha_n|^2).
    """
    n = len(verblunsky) if degree is None else int(degree)
    if n < 0:
        raise InvalidInputError("degree must be nonnegative")
    z = np.asarray(z, dtype=complex)
    alphas = verblunsky.padded(n)
    rho = np.sqrt(1.0 - np.abs(alphas) ** 2)
    phis = np.empty((n + 1,) + z.shape, dtype=complex)
    stars = np.empty_like(phis)
    phis[0] = 1.0
    stars[0] = 1.0
    for k in range(n):
        a = alphas[k]
        p, s = phis[k], stars[k]
        phis[k + 1] = (z * p - np.conj(a) * s) / rho[k]
        stars[k + 1] = (s - a * z * p) / rho[k]
    return OpucEval(z, phis, stars)


def _kernel_sum(verblunsky, n, z):
    ev = eval_opuc(verblunsky, z, n - 1)
    return np.sum(np.abs(ev.phis) ** 2, axis=0)


def christoffel_w(
    verblunsky: VerblunskySeq | None,
    measure: CircleMeasure | None,
    n: int,
    z: complex,
    mode: str = "sum",
) -> float:
    """w_n(mu, z).

    ``mode="sum"`` uses 2 pi w_n = (sum_{k<n} |phi_k(z)|^2)^(-1) from the
    Verblunsky coefficients.  ``mode="oracle"`` minimizes
    (1/(2 pi |P(z)|^2)) integral |P|^2 d mu over polynomials of degree < n
    directly, through the Toeplitz moment matrix of ``measure``.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if mode == "sum":
        if verblunsky is None:
            raise InvalidInputError("sum mode needs Verblunsky coefficients")
        return float(1.0 / (2 * np.pi * _kernel_sum(verblunsky, n, z)))
    if mode == "oracle":
        if measure is None:
            raise InvalidInputError("oracle mode needs the measure")
        c = circle_moments(measure, max(n - 1, 1))[:n]
        # A[k, j] = <z^j, z^k> = c_{k-j}, with c_{-m} = conj(c_m)
        col = c
        row = np.conj(c)
        a = linalg.toeplitz(col, row)
        u = np.conj(complex(z) ** np.arange(n))
        y = linalg.cho_solve(linalg.cho_factor(a), u)
        return float(1.0 / (2 * np.pi * np.real(np.vdot(u, y))))
    raise InvalidInputError(f"unknown mode {mode!r}")


def mnt_discrete_average(verblunsky: VerblunskySeq, n: int, t: float) -> float:
    """(1/n) sum_{k<n} |phi_k(e^{it})|^2."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    return float(_kernel_sum(verblunsky, n, np.exp(1j * t)) / n)


def conjecture_average(verblunsky: VerblunskySeq, n: int, t: float) -> complex:
    """(1/n) sum_{k<n} phi_k^*(e^{it}); exploratory."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    ev = eval_opuc(verblunsky, np.exp(1j * t), n - 1)
    return complex(np.mean(ev.phi_stars))


def gram_residual(
    verblunsky: VerblunskySeq,
    measure: CircleMeasure,
    degree: int,
    nodes: int = MOMENT_NODES,
) -> float:
    """max_{n,m <= degree} |<phi_n, phi_m>_mu - delta_nm| by periodic trapezoid."""
    theta, mu = measure.samples(nodes)
    ev = eval_opuc(verblunsky, np.exp(1j * theta), degree)
    w = mu * (2 * np.pi / nodes)
    gram = (ev.phis * w) @ ev.phis.conj().T
    for t, wt in measure.point_masses:
        p = eval_opuc(verblunsky, np.exp(1j * t), degree).phis
        gram = gram + wt * np.outer(p, np.conj(p))
    return float(np.max(np.abs(gram - np.eye(degree + 1))))


def write_opuc_csv(path, rows) -> None:
    """Rows of (n, t, n_w_n, mnt_avg, conj_avg (complex), mu_prime)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["n", "t", "n_w_n", "mnt_avg", "conj_avg_re", "conj_avg_im", "mu_prime"])
        for n, t, nw, avg, conj, mu in rows:
            wr.writerow(
                [
                    str(int(n)),
                    format(float(t), ".17g"),
                    format(float(nw), ".17g"),
                    format(float(avg), ".17g"),
                    format(complex(conj).real, ".17g"),
                    format(complex(conj).imag, ".17g"),
                    format(float(mu), ".17g"),
                ]
            )
