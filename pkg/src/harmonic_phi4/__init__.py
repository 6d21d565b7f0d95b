"""Spectral numerics for the dynamic Phi^4 model with harmonic confinement, H = -Lap + |x|^2."""
from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceError,
    DomainError,
    HarmonicPhi4Error,
    UsageError,
)
from .fields import Field, FieldPath
from .hermite import EigenMode, QuadratureGrid, SpectralBasis, build_basis

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "HarmonicPhi4Error",
    "UsageError",
    "Field",
    "FieldPath",
    "EigenMode",
    "QuadratureGrid",
    "SpectralBasis",
    "build_basis",
]
