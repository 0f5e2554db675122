"""Exception types shared across the package."""

from __future__ import annotations


class MixplanError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInstanceError(MixplanError):
    """The problem description itself is malformed or out of domain."""


class StructuralError(MixplanError):
    """A plan references things that do not resolve, or its graph is unusable
    (cycle on a stream path, disconnected participant, bad matrix shape)."""


class InfeasibleError(MixplanError):
    """No allocation satisfying the capacity and delay limits exists on the
    path the solver took.  Infeasibility is an expected outcome, not a bug;
    the phase name says where the search gave up."""

    def __init__(self, phase: str, detail: str = "", last_handling_ms: float | None = None):
        self.phase = phase
        self.detail = detail
        self.last_handling_ms = last_handling_ms
        msg = f"infeasible in phase {phase!r}"
        if detail:
            msg += f": {detail}"
        if last_handling_ms is not None:
            msg += f" (handling time {last_handling_ms:g} ms)"
        super().__init__(msg)


class BoundsExceededError(MixplanError):
    """The instance is larger than the exhaustive search is willing to touch."""


class BudgetExceededError(BoundsExceededError):
    """The exhaustive search ran into its node budget before finishing."""


class LpFormatError(MixplanError):
    """An LP text document could not be parsed back."""
