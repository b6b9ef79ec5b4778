"""Spectral densities on the line, probability measures on the circle, Szego checks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrityError, InvalidInputError
from .krein import Coefficient, transfer_to

__all__ = [
    "FREE_DENSITY",
    "LineDensity",
    "CircleMeasure",
    "szego_entropy_line",
    "szego_entropy_circle",
    "truncated_density_at",
    "density_from_truncated_coefficient",
]

FREE_DENSITY = 1.0 / (2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class LineDensity:
    """Density sigma' sampled on a window, constant outside it, plus point masses.

    Between nodes the density is the linear interpolant of the samples.
    """

    x: np.ndarray
    values: np.ndarray
    exterior_value: float = FREE_DENSITY
    point_masses: tuple = field(default=())

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or y.shape != x.shape or len(x) < 2:
            raise InvalidInputError("need matching 1-D node and value arrays with >= 2 nodes")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("nodes must be strictly increasing")
        if np.any(y < 0) or not np.all(np.isfinite(y)):
            raise InvalidInputError("density must be finite and nonnegative")
        if not self.exterior_value > 0:
            raise InvalidInputError("exterior density must be positive")
        masses = tuple((float(loc), float(w)) for loc, w in self.point_masses)
        if any(w < 0 for _, w in masses):
            raise InvalidInputError("point mass weights must be nonnegative")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", y)
        object.__setattr__(self, "point_masses", masses)

    @classmethod
    def constant(
        cls,
        value: float,
        half_width: float = 10.0,
        n_nodes: int = 4096,
        exterior_value: float | None = None,
        point_masses: Sequence = (),
    ) -> "LineDensity":
        x = np.linspace(-half_width, half_width, n_nodes)
        ext = value if exterior_value is None else exterior_value
        return cls(x, np.full(n_nodes, float(value)), ext, tuple(point_masses))

    @classmethod
    def from_function(
        cls,
        fn: Callable,
        half_width: float = 10.0,
        n_nodes: int = 4096,
        exterior_value: float = FREE_DENSITY,
        point_masses: Sequence = (),
    ) -> "LineDensity":
        x = np.linspace(-half_width, half_width, n_nodes)
        return cls(x, np.asarray(fn(x), dtype=float), exterior_value, tuple(point_masses))

    @property
    def window(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.x[0]) & (x <= self.x[-1])
        return np.where(inside, np.interp(x, self.x, self.values), self.exterior_value)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["x", "sigma_prime"])
            for xi, yi in zip(self.x.tolist(), self.values.tolist()):
                wr.writerow([format(xi, ".17g"), format(yi, ".17g")])


@dataclass(frozen=True, eq=False)
class CircleMeasure:
    """Probability measure on [-pi, pi]: density mu'(theta) d theta plus point masses."""

    density: Callable
    point_masses: tuple = field(default=())
    label: str = ""
    mass_nodes: int = 2**14

    def __post_init__(self):
        masses = tuple((float(t), float(w)) for t, w in self.point_masses)
        if any(w < 0 for _, w in masses):
            raise InvalidInputError("point mass weights must be nonnegative")
        object.__setattr__(self, "point_masses", masses)
        _, mu = self.samples(self.mass_nodes)
        if np.any(mu < 0):
            raise InvalidInputError("density must be nonnegative")
        total = self.total_mass()
        if abs(total - 1.0) > 1e-10:
            raise InvalidInputError(f"total mass is {total!r}, expected 1")

    @classmethod
    def lebesgue(cls) -> "CircleMeasure":
        return cls(lambda t: np.full(np.shape(t), FREE_DENSITY), label="lebesgue")

    @classmethod
    def from_density(
        cls,
        fn: Callable,
        point_masses: Sequence = (),
        normalize: bool = False,
        label: str = "",
        nodes: int = 2**14,
    ) -> "CircleMeasure":
        """Wrap ``fn``; with ``normalize`` the density is rescaled so the total mass is 1
        under the periodic trapezoid rule on ``nodes`` points."""
        if normalize:
            theta = -np.pi + 2 * np.pi * np.arange(nodes) / nodes
            atoms = sum(w for _, w in point_masses)
            scale = (1.0 - atoms) / (2 * np.pi * np.mean(fn(theta)))
            base = fn

            def fn(t):  # noqa: F811
                return scale * base(t)

        return cls(fn, tuple(point_masses), label)

    @classmethod
    def bernstein_szego(cls, alphas: Sequence[complex]) -> "CircleMeasure":
        """Measure whose Verblunsky coefficients are ``alphas`` followed by zeros.

        mu'(t) = 1 / (2 pi |phi_N^*(e^{it})|^2), N = len(alphas).
        """
        from .opuc import VerblunskySeq, eval_opuc

        seq = VerblunskySeq(alphas)

        def fn(t):
            z = np.exp(1j * np.asarray(t, dtype=float))
            ev = eval_opuc(seq, z)
            return 1.0 / (2 * np.pi * np.abs(ev.phi_stars[-1]) ** 2)

        return cls(fn, label=f"bernstein-szego{list(np.asarray(alphas, dtype=complex))}")

    def samples(self, n: int):
        theta = -np.pi + 2 * np.pi * np.arange(n) / n
        return theta, np.asarray(self.density(theta), dtype=float)

    def total_mass(self) -> float:
        _, mu = self.samples(self.mass_nodes)
        return float(2 * np.pi * np.mean(mu) + sum(w for _, w in self.point_masses))


def _log_linear_cells(y0, y1, h, absolute: bool):
    """Exact integral over each cell of log (or |log|) of the linear interpolant."""
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), y0.shape)

    def lam_(y):  # antiderivative of log: y log y - y, with 0 log 0 = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(y > 0, y * np.log(np.where(y > 0, y, 1.0)) - y, 0.0)

    def mean_log(a, b):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = b - a
            flat = np.abs(d) <= 1e-12 * np.maximum(np.abs(a), np.abs(b))
            safe_a = np.where(a > 0, a, 1.0)
            return np.where(flat, np.log(safe_a), (lam_(b) - lam_(a)) / np.where(flat, 1.0, d))

    if not absolute:
        return h * mean_log(y0, y1)
    cross = (y0 - 1.0) * (y1 - 1.0) < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(cross, (1.0 - y0) / (y1 - y0), 1.0)
    whole = np.abs(h * mean_log(y0, y1))
    ones = np.ones_like(y0)
    split = np.abs(h * frac * mean_log(y0, ones)) + np.abs(h * (1 - frac) * mean_log(ones, y1))
    return np.where(cross, split, whole)


def _has_zero_plateau(y) -> bool:
    z = np.asarray(y) == 0
    return bool(np.any(z[1:] & z[:-1]))


def szego_entropy_line(density: LineDensity) -> float:
    """integral |log sigma'(x)|/(1 + x^2) dx; ``math.inf`` if sigma' vanishes on an interval."""
    y = density.values
    if _has_zero_plateau(y):
        return math.inf
    x = density.x
    lo, hi = density.window
    exterior = abs(math.log(density.exterior_value)) * (math.pi - (math.atan(hi) - math.atan(lo)))
    h = np.diff(x)
    touches_zero = (y[:-1] == 0) | (y[1:] == 0)
    total = 0.0
    good = ~touches_zero
    if np.any(good):
        with np.errstate(divide="ignore"):
            g = np.abs(np.log(np.where(y > 0, y, 1.0)))
        beta = np.diff(g) / h
        dat = np.diff(np.arctan(x))
        dlog = np.diff(np.log1p(x * x))
        cells = (g[:-1] - beta * x[:-1]) * dat + 0.5 * beta * dlog
        total += float(np.sum(cells[good]))
    if np.any(touches_zero):
        idx = np.flatnonzero(touches_zero)
        xm = 0.5 * (x[idx] + x[idx + 1])
        cells = _log_linear_cells(y[idx], y[idx + 1], h[idx], absolute=True) / (1 + xm * xm)
        total += float(np.sum(cells))
    return total + exterior


def szego_entropy_circle(measure: CircleMeasure, n_nodes: int = 2**16) -> float:
    """integral_{-pi}^{pi} log mu'(theta) d theta; ``-math.inf`` on a vanishing arc."""
    theta, mu = measure.samples(n_nodes)
    mu = np.append(mu, mu[0])  # periodic closure at theta = pi
    if _has_zero_plateau(mu):
        return -math.inf
    h = 2 * np.pi / n_nodes
    return float(np.sum(_log_linear_cells(mu[:-1], mu[1:], h, absolute=False)))


def truncated_density_at(coefficient: Coefficient, x) -> np.ndarray:
    """sigma'(x) = 1 / (2 pi |Pstar(R0, x)|^2) for a compactly supported coefficient."""
    x = np.asarray(x, dtype=float)
    _, s = transfer_to(coefficient, x.ravel(), coefficient.support_end)
    mod2 = np.abs(s) ** 2
    if np.any(mod2 == 0):
        raise IntegrityError("Pstar vanished on the real axis")
    return (1.0 / (2 * np.pi * mod2)).reshape(x.shape)


def density_from_truncated_coefficient(
    coefficient: Coefficient,
    half_width: float = 10.0,
    n_nodes: int = 4096,
) -> LineDensity:
    """Sample sigma' of a compactly supported (or truncated) coefficient on [-X, X]."""
    if half_width <= 0 or n_nodes < 2:
        raise InvalidInputError("need half_width > 0 and n_nodes >= 2")
    x = np.linspace(-half_width, half_width, n_nodes)
    return LineDensity(x, truncated_density_at(coefficient, x), FREE_DENSITY, ())
