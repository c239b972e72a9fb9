# core/exceptions.py
"""
Error types shared by every app.

Input problems (bad specs, bad configs, bad files) are Django
``ValidationError`` subclasses so callers can treat them the same way the
admin and serializers do. Problems that can only come from a bug inside the
simulator derive from ``InvariantBreach``.
"""
from django.core.exceptions import ValidationError


# -------------------------------------------------------------------
# INPUT ERRORS
# -------------------------------------------------------------------
class ConfigError(ValidationError):
    """A config file could not be parsed or violates an invariant."""

    def __init__(self, message, line=None, code="config"):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, code=code)


class TraceFormatError(ValidationError):
    """A trace file row is malformed."""

    def __init__(self, message, line=None, code="trace"):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message, code=code)


# -------------------------------------------------------------------
# SIMULATOR INVARIANT BREACHES
# -------------------------------------------------------------------
class InvariantBreach(RuntimeError):
    """An internal invariant of the simulator no longer holds."""


class CapacityError(InvariantBreach):
    """Device memory cannot hold the requested experts even after eviction."""


class DraftResidencyError(InvariantBreach):
    """The draft model touched an expert that is not pinned on the device."""


class CorruptDraftRecord(InvariantBreach):
    """A proposed draft token has zero draft probability."""


class LedgerInvariantError(InvariantBreach):
    """The migration ledger disagrees with what a phase is allowed to move."""


# -------------------------------------------------------------------
# SWEEP WRAPPER
# -------------------------------------------------------------------
class ExperimentCellError(Exception):
    """Raised when one cell of a sweep fails; keeps the cell and the cause."""

    def __init__(self, cell, cause):
        self.cell = cell
        self.cause = cause
        super().__init__(f"cell {cell} failed: {cause}")

    @property
    def is_invariant_breach(self) -> bool:
        return isinstance(self.cause, InvariantBreach)
