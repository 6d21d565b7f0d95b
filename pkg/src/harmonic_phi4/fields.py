"""Coefficient-space containers: a single field and a time-indexed path of fields."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Field:
    """A real function on R^d stored as its coefficient vector in ``basis``."""

    basis: "SpectralBasis"  # noqa: F821
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (self.basis.size,):
            raise UsageError(f"expected {self.basis.size} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise UsageError("field coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def _check(self, other):
        if other.basis != self.basis:
            raise UsageError("fields live on different bases")

    def __add__(self, other):
        self._check(other)
        return Field(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return Field(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return Field(self.basis, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.basis, -self.coeffs)

    def l2_norm(self):
        """L^2 norm, exact by orthonormality of the basis."""
        return float(np.linalg.norm(self.coeffs))

    @classmethod
    def zeros(cls, basis):
        return cls(basis, np.zeros(basis.size))

    @classmethod
    def unit(cls, basis, k):
        c = np.zeros(basis.size)
        c[k] = 1.0
        return cls(basis, c)


@dataclass(frozen=True, eq=False)
class FieldPath:
    """Fields sampled on a uniform time grid; ``coeffs[m]`` is the field at ``times[m]``."""

    basis: "SpectralBasis"  # noqa: F821
    times: np.ndarray
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = _frozen(self.times)
        c = _frozen(self.coeffs)
        if t.ndim != 1 or t.size < 1:
            raise UsageError("times must be a non-empty 1-d array")
        if c.shape != (t.size, self.basis.size):
            raise UsageError(f"coefficient array has shape {c.shape}, expected {(t.size, self.basis.size)}")
        if t.size > 1:
            dt = np.diff(t)
            if np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
                raise UsageError("time grid must be uniform and increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coeffs", c)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def __len__(self):
        return self.times.size

    def at(self, m):
        return Field(self.basis, self.coeffs[m])

    def _check(self, other):
        if other.basis != self.basis or other.times.shape != self.times.shape or not np.allclose(
            other.times, self.times
        ):
            raise UsageError("paths must share basis and time grid")

    def __add__(self, other):
        self._check(other)
        return FieldPath(self.basis, self.times, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return FieldPath(self.basis, self.times, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return FieldPath(self.basis, self.times, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return FieldPath(self.basis, self.times, -self.coeffs)

    @classmethod
    def zeros(cls, basis, times):
        times = np.asarray(times, dtype=float)
        return cls(basis, times, np.zeros((times.size, basis.size)))

    @classmethod
    def from_function(cls, basis, times, fn):
        """Build a path from ``fn(t) -> coefficient vector``."""
        times = np.asarray(times, dtype=float)
        return cls(basis, times, np.stack([np.asarray(fn(t), dtype=float) for t in times]))
