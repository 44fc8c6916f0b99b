"""Exception hierarchy shared by every module."""

from __future__ import annotations

from typing import Any


class YukawaError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(YukawaError, ValueError):
    """An argument lies outside the domain of the function."""


class NumericalFailure(YukawaError, RuntimeError):
    """A numerical procedure could not deliver its contract."""


class SubdivisionLimit(NumericalFailure):
    def __init__(self, message: str, *, estimate: float, error: float) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class TailNotDecaying(NumericalFailure):
    pass


class StepCheckFailed(NumericalFailure):
    def __init__(self, message: str, *, discrepancy: float) -> None:
        super().__init__(message)
        self.discrepancy = discrepancy


class VerificationMismatch(NumericalFailure):
    pass


class BracketViolation(NumericalFailure):
    pass


class BoundViolation(NumericalFailure):
    def __init__(self, message: str, *, configuration: dict[str, Any], margin: float) -> None:
        super().__init__(message)
        self.configuration = configuration
        self.margin = margin


class OptimizerStall(NumericalFailure):
    pass


class SizeLimit(NumericalFailure):
    pass


class ThresholdExceeded(NumericalFailure):
    pass


class ConvergenceDomain(NumericalFailure):
    pass


class FitDegenerate(NumericalFailure):
    pass
