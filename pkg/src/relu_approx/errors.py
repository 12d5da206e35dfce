"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ReluApproxError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(ReluApproxError, ValueError):
    """Shapes of networks, layers or inputs do not fit together."""


class QuantizationRangeError(ReluApproxError, ValueError):
    """A weight lies outside the representable range of a quantization grid."""


class BudgetError(ReluApproxError, ValueError):
    """A depth budget is too small for the requested construction."""


class MarginError(ReluApproxError, ValueError):
    """A shrink margin is too large for the cube it is applied to."""


class DomainError(ReluApproxError, ValueError):
    """A point lies outside the domain an operation is defined on."""


class MeasureError(ReluApproxError, ValueError):
    """A measure specification is malformed or degenerate."""


class EvaluationError(ReluApproxError, ArithmeticError):
    """A function produced a non-finite value at a sample point."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class OffsetRejectionError(ReluApproxError, RuntimeError):
    """No partition offset passed the shell-mass decay diagnostic."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class BoundError(ReluApproxError, ValueError):
    """A target function exceeds its declared bound."""
