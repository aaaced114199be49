"""
Exception Hierarchy for renewlab

Every failure raised by the laboratory derives from LabError. Each class
carries a human-readable detail string and the process exit code the command
line maps it to (0 pass, 1 gate or numerical failure, 2 configuration error).
"""

from typing import Optional


class LabError(Exception):
    """Base class for all renewlab errors."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class DomainError(LabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConvergenceError(LabError):
    """An iteration reached its cap before meeting its tolerance."""

    def __init__(self, detail: str, last_residual: Optional[float] = None):
        super().__init__(detail)
        self.last_residual = last_residual


class TrapError(LabError):
    """A return-time iteration exceeded its step cap near the neutral fixed point."""

    def __init__(self, detail: str, point: Optional[float] = None, steps: int = 0):
        super().__init__(detail)
        self.point = point
        self.steps = steps


class BranchInversionError(LabError):
    """A monotone branch could not be inverted at a requested endpoint."""

    def __init__(self, detail: str, branch: int):
        super().__init__(detail)
        self.branch = branch


class NegativeMassError(LabError):
    """Cell-mass quadrature produced a mass below the clipping threshold."""


class DegenerateObservableError(LabError):
    """The pairing used as a relative scale vanishes."""


class IllConditionedFitError(LabError):
    """A least-squares basis is too collinear to give meaningful coefficients."""

    def __init__(self, detail: str, condition_number: float):
        super().__init__(detail)
        self.condition_number = condition_number


class SupportError(LabError):
    """An observable is nonzero off the inducing set Y."""


class ConfigError(LabError):
    """Experiment configuration failed to parse or validate."""

    exit_code = 2


class GateFailure(LabError):
    """A numerical acceptance gate failed."""

    def __init__(self, detail: str, gate: str):
        super().__init__(detail)
        self.gate = gate
