"""Exception hierarchy shared by all modules."""


class HarmonicPhi4Error(Exception):
    """Base class for every error raised by the package."""


class CapacityError(HarmonicPhi4Error):
    """A requested size exceeds a configured hard limit."""


class UsageError(HarmonicPhi4Error, ValueError):
    """Inputs are inconsistent (mismatched bases, grids, levels, ...)."""


class DomainError(HarmonicPhi4Error, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(HarmonicPhi4Error, RuntimeError):
    """An iterative procedure failed to contract."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(HarmonicPhi4Error, ValueError):
    """Malformed or incomplete run configuration."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.key = key
