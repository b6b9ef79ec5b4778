"""Quadrature on sampled grids, continuous Fejer smoothing and the outer function.

Densities are treated as piecewise-linear interpolants of their samples, and
the two singular integrals here (Fejer convolution, Cauchy integral) are
evaluated exactly for that interpolant, cell by cell, from closed-form
antiderivatives.  The exterior of the sampling window carries a constant
density whose contribution is added analytically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import special

from .errors import DomainError, InvalidInputError, SzegoViolationError

if TYPE_CHECKING:
    from .measures import LineDensity

__all__ = [
    "SampledGrid",
    "trapezoid",
    "integrate_trapezoid",
    "r_kernel",
    "fejer_kernel",
    "fejer_smooth",
    "outer_function",
    "outer_at_i",
]

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True, eq=False)
class SampledGrid:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        y = np.asarray(self.values, dtype=complex)
        if x.ndim != 1 or y.shape != x.shape:
            raise InvalidInputError("points and values must be 1-D of equal length")
        if len(x) < 2:
            raise InvalidInputError("a sampled grid needs at least 2 points")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("points must be strictly increasing")
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "values", y)


def trapezoid(y, x):
    """Composite trapezoid rule; ``y`` may be complex."""
    y = np.asarray(y)
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return y.dtype.type(0) if len(x) else 0.0
    return np.sum(np.diff(x) * (y[1:] + y[:-1])) * 0.5


def integrate_trapezoid(grid: SampledGrid) -> complex:
    return complex(trapezoid(grid.values, grid.points))


def r_kernel(x):
    """R(x) = (exp(ix) - 1)/(ix), with R(0) = 1."""
    x = np.asarray(x, dtype=float)
    return np.exp(0.5j * x) * np.sinc(x / (2 * np.pi))


def fejer_kernel(x):
    """Phi(x) = |R(x)|^2 = (sin(x/2)/(x/2))^2; integrates to 2*pi over the line."""
    x = np.asarray(x, dtype=float)
    return np.sinc(x / (2 * np.pi)) ** 2


def _fejer_f0(u):
    """Antiderivative of Phi vanishing at 0: 2 Si(u) - 4 sin^2(u/2)/u."""
    u = np.asarray(u, dtype=float)
    si, _ = special.sici(u)
    with np.errstate(invalid="ignore", divide="ignore"):
        tail = np.where(u == 0, 0.0, 4.0 * np.sin(0.5 * u) ** 2 / u)
    return 2.0 * si - tail


def _cin(u):
    """Cin(u) = integral_0^u (1 - cos t)/t dt (even in u)."""
    a = np.abs(np.asarray(u, dtype=float))
    small = a < 0.5
    x2 = a * a
    series = x2 * (
        1 / 4 - x2 * (1 / 96 - x2 * (1 / 4320 - x2 * (1 / 322560 - x2 * (1 / 36288000))))
    )
    safe = np.where(small, 1.0, a)
    _, ci = special.sici(safe)
    big = EULER_GAMMA + np.log(safe) - ci
    return np.where(small, series, big)


def fejer_smooth(measure: "LineDensity", z: float, r: float) -> float:
    """(Phi_r * sigma)(z) with Phi_r(x) = r Phi(r x).

    Exact for the piecewise-linear interpolant of the window samples; the
    exterior constant and the point masses are added in closed form.
    """
    if not r > 0:
        raise InvalidInputError("r must be positive")
    x = measure.x
    y = measure.values
    u = r * (z - x)  # decreasing along the window
    f0 = _fejer_f0(u)
    f1 = 2.0 * _cin(u)
    d0 = f0[:-1] - f0[1:]  # integral of Phi over each cell (in u)
    d1 = f1[:-1] - f1[1:]  # integral of u Phi over each cell
    h = np.diff(x)
    ymid = 0.5 * (y[1:] + y[:-1])
    umid = 0.5 * (u[1:] + u[:-1])
    slope = (y[1:] - y[:-1]) / (h * r)  # d sigma'/d(-u)
    window = np.sum(ymid * d0 + slope * (umid * d0 - d1))
    covered = f0[0] - f0[-1]
    exterior = measure.exterior_value * (2 * np.pi - covered)
    masses = sum(w * r * float(fejer_kernel(r * (z - loc))) for loc, w in measure.point_masses)
    return float(window + exterior + masses)


def _cauchy_linear(s, g, w):
    """integral of g(s)/(s - w) ds for piecewise-linear g, w off the real axis."""
    L = np.log(s - w)
    h = np.diff(s)
    beta = np.diff(g) / h
    return np.sum(beta * h + (g[:-1] + beta * (w - s[:-1])) * np.diff(L))


def _log_relative_density(density: "LineDensity") -> np.ndarray:
    y = density.values
    if np.any(y <= 0):
        raise SzegoViolationError("density vanishes inside the window; log is not integrable")
    return np.log(y / density.exterior_value)


def outer_function(density: "LineDensity", lam: complex) -> complex:
    """Outer function Pi on the upper half-plane with |Pi(x)|^2 = 1/(2 pi sigma'(x)).

    Pi(lam) = (2 pi)^(-1/2) exp[-(1/(2 pi i)) int (1/(s - lam) - s/(s^2 + 1)) log sigma'(s) ds],
    the sign that gives Pi == 1 for sigma' == 1/(2 pi) and Pi = Pstar(R0, .)
    for real, compactly supported coefficients.  Point masses do not enter.
    """
    lam = complex(lam)
    if not lam.imag > 0:
        raise DomainError("outer function is defined for Im(lam) > 0 only")
    g = _log_relative_density(density)
    s = density.x
    # s/(1+s^2) = (1/(s-i) + 1/(s+i))/2
    kern = _cauchy_linear(s, g, lam) - 0.5 * (_cauchy_linear(s, g, 1j) + _cauchy_linear(s, g, -1j))
    return complex(np.exp(0.5j / np.pi * kern) / math.sqrt(2 * np.pi * density.exterior_value))


def outer_at_i(density: "LineDensity") -> float:
    """Pi(i) = (2 pi)^(-1/2) exp[-(1/(2 pi)) int log sigma'(s)/(1 + s^2) ds], real arithmetic."""
    g = _log_relative_density(density)
    s = density.x
    h = np.diff(s)
    beta = np.diff(g) / h
    # int (g_k + beta (s - s_k))/(1 + s^2) ds per cell
    dat = np.diff(np.arctan(s))
    dlog = np.diff(np.log1p(s * s))
    window = np.sum((g[:-1] - beta * s[:-1]) * dat + 0.5 * beta * dlog)
    return math.exp(-window / (2 * np.pi)) / math.sqrt(2 * np.pi * density.exterior_value)
