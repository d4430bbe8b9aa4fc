"""
Error hierarchy shared by the numerical services and the CLI.

Every error carries the process exit code the CLI maps it to.
"""
from typing import Any, Dict, Optional


class ConeWeylError(Exception):
    """Base class for all coneweyl errors."""

    exit_code = 1

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context or {})

    def with_context(self, **context: Any) -> "ConeWeylError":
        """Attach (or extend) context such as the (lambda, side) of a study job."""
        self.context.update(context)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.message} [{details}]"


class ConfigError(ConeWeylError):
    """Invalid configuration or command-line input."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.field = field


class DomainError(ConeWeylError, ValueError):
    """Argument outside the domain of an operation."""

    exit_code = 2


class GeometryError(DomainError):
    """Degenerate or self-intersecting boundary curve."""


class FileError(ConeWeylError):
    """Reading or writing a data file failed."""

    exit_code = 2


class NumericalError(ConeWeylError):
    """A numerical procedure could not produce a trustworthy answer."""

    exit_code = 3


class NoBoundStateError(NumericalError):
    """The transversal Robin problem has no negative eigenvalue."""


class ConsistencyError(NumericalError):
    """Two inputs that must describe the same object disagree."""


class ThresholdCollisionError(NumericalError):
    """Shift lies (numerically) on a matrix eigenvalue."""

    def __init__(self, message: str, threshold: float, pivot: float, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.threshold = threshold
        self.pivot = pivot


class ConvergenceError(NumericalError):
    """Iterative eigensolver stopped early; partial results are attached."""

    def __init__(self, message: str, partial=None, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.partial = list(partial or [])


class CoefficientBoundError(NumericalError):
    """Coefficient lower bound is not positive on the region of interest."""


class HypothesisViolationError(NumericalError):
    """Bracketing parameters violate the cut-off hypothesis."""


class InvariantViolationError(NumericalError):
    """A result failed one of its own structural invariants."""


class ResourceError(ConeWeylError):
    """Requested computation exceeds a configured memory or work budget."""

    exit_code = 4
