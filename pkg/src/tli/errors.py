"""Error vocabulary shared across the workbench.

Every failure mode that callers are expected to handle gets its own class so
tests and services can catch them by name instead of string-matching.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    """Base class for all workbench errors."""


class UnknownSensorState(WorkbenchError):
    """A sensor valuation matched no declared mode."""


class DegenerateData(WorkbenchError):
    """Input data is too thin or collapsed to fit a model."""


class InfeasibleCut(WorkbenchError):
    """No separating plane satisfies the cut constraints."""


class RedundantFailure(WorkbenchError):
    """The reported failure state is already excluded by existing cuts."""


class DegenerateCut(WorkbenchError):
    """A cutting plane passes through the reference point."""


class DegenerateFailure(WorkbenchError):
    """Failure and last in-mode state coincide; no plane is defined."""


class UnknownAsset(WorkbenchError):
    """A named scene or spec does not exist."""


class UnknownSession(WorkbenchError):
    """A session id does not exist."""


class InvalidCommand(WorkbenchError):
    """A session command carried a malformed or inapplicable payload."""


class SpecSyntaxError(WorkbenchError):
    """Temporal-logic source text failed to parse.

    Carries 1-based line and column of the offending token.
    """

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class UndeclaredAtom(WorkbenchError):
    """A formula references an atomic proposition that was never declared."""


class UnsynthesizableSpec(WorkbenchError):
    """No strategy exists: some mode cannot reach a goal mode."""


class TemplateViolation(WorkbenchError):
    """A formula falls outside the transition-template fragment."""


class GenerationFailed(WorkbenchError):
    """Demonstration generation could not produce a valid trace."""
