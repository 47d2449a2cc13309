from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from .parser import ParseDiagnostic


class ForesightError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigError(ForesightError):
    """Raised when settings or command-line flags are invalid."""


class ParseError(ForesightError):
    """Raised when a domain, problem, plan or script cannot be parsed.

    Carries every error diagnostic; no partial model is ever returned.
    """

    def __init__(self, diagnostics: Sequence["ParseDiagnostic"]):
        self.diagnostics = tuple(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(str(first) if first else "parse failed")


class GroundingError(ForesightError):
    def __init__(self, schema: str, message: str):
        self.schema = schema
        super().__init__(f"cannot ground {schema}: {message}")


class ContractViolation(ForesightError):
    """A documented precondition of an operation was broken by the caller."""


class ProjectionError(ContractViolation):
    def __init__(self, index: int, action: str, missing: str):
        self.index = index
        self.missing = missing
        super().__init__(f"step {index} {action} is not applicable: missing {missing}")


class LiftingError(ContractViolation):
    def __init__(self, index: int, action: str, missing: str):
        self.index = index
        self.missing = missing
        super().__init__(f"cannot lift plan: step {index} {action} lacks {missing}")


class ScheduleError(ForesightError):
    """Raised for malformed scenario scripts or out-of-range schedules."""


class ControlVerificationError(ContractViolation):
    """Raised when applied plan edits do not yield a low-risk plan achieving the goal."""
