"""Numerical laboratory for Krein systems, their orthogonal functions and spectral measures."""

from .errors import (
    ConfigError,
    DegenerateMeasureError,
    DegeneratePairError,
    DomainError,
    IllConditionedError,
    IntegrityError,
    InvalidInputError,
    KreinLabError,
    SzegoViolationError,
)
from .krein import Coefficient, KreinState, Trajectory, propagate, propagate_many

__version__ = "0.1.0"

__all__ = [
    "Coefficient",
    "ConfigError",
    "DegenerateMeasureError",
    "DegeneratePairError",
    "DomainError",
    "IllConditionedError",
    "IntegrityError",
    "InvalidInputError",
    "KreinLabError",
    "KreinState",
    "SzegoViolationError",
    "Trajectory",
    "propagate",
    "propagate_many",
]
