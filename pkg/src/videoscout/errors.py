"""Exception taxonomy shared across the engine."""
from __future__ import annotations


class RejectedInput(ValueError):
    """An argument violates a documented precondition."""


class BackendError(RuntimeError):
    """A model backend failed after exhausting its retry budget."""

    def __init__(self, message: str, retries: int = 0):
        super().__init__(message)
        self.retries = retries


class ContractViolation(RuntimeError):
    """A backend answered, but the payload is outside the agreed wire contract."""


class UnexpandableSegment(Exception):
    """Signal: the segment holds no interior grid point, so it cannot be split."""


class TraceFormatError(ValueError):
    """A trace stream does not follow the documented record schema."""
