"""Exception types shared across the toolchain."""

from __future__ import annotations


class ViewforgeError(Exception):
    """Base class for all toolchain errors."""


class ParseError(ViewforgeError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.reason = message
        self.line = line
        self.col = col


class DocumentError(ViewforgeError):
    """Structural invariant violation inside a single document."""


class ProjectError(ViewforgeError):
    """Manifest or document-set level failure (missing file, duplicate name)."""


class SortError(ViewforgeError):
    """Sort-level failure: unknown sort, empty range, zero bound."""


class UnboundVariable(ViewforgeError):
    pass


class SortMismatch(ViewforgeError):
    pass


class ArithmeticOverflow(ViewforgeError):
    """Bounded-integer arithmetic left the sort's range."""


class AlreadyPrimed(ViewforgeError):
    pass


class PatternVariableClash(ViewforgeError):
    pass


class AttributeCollision(ViewforgeError):
    """An induced rolename attribute disagrees with a declared attribute."""


class BudgetExceeded(ViewforgeError):
    """Enumeration work exceeded the configured cap.

    Signals "shrink your universe or raise the budget", not falsity.
    """


class StepError(ViewforgeError):
    """A refinement step could not be applied; the document set is unchanged."""


class TargetMissing(StepError):
    pass


class NameClash(StepError):
    pass


class IllegalPayload(StepError):
    pass


class ScenarioError(ViewforgeError):
    pass


class SimulationError(ViewforgeError):
    pass


class IdPoolExhausted(SimulationError):
    pass


class CapExceeded(SimulationError):
    """Exhaustive exploration hit the configuration cap."""
