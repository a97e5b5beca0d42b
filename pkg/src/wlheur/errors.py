"""Exception hierarchy shared by every module."""

from __future__ import annotations


class WLHeurError(Exception):
    """Base class for all library errors."""


class InputError(WLHeurError, ValueError):
    """Bad user-supplied data (files, hyperparameters, shapes)."""


class PDDLError(InputError):
    """A problem with PDDL source text, optionally located in a file."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None,
                 filename: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.filename or "<string>"
        if self.line is not None:
            where += f":{self.line}"
            if self.col is not None:
                where += f":{self.col}"
        return f"{where}: {self.message}"


class PDDLSyntaxError(PDDLError):
    pass


class UnsupportedFeatureError(PDDLError):
    """The source uses a construct outside the :strips + :typing fragment."""


class UndeclaredError(PDDLError):
    """Reference to an undeclared predicate, object, type or variable."""


class ArityError(PDDLError):
    pass


class ForeignAtomError(InputError):
    """A state mentions predicates or objects unknown to the task."""


class InapplicableActionError(WLHeurError):
    pass


class UnknownActionError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class InvalidPlanError(WLHeurError):
    """A plan fails; ``step`` is the 0-based failing index, or None for an unmet goal."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        super().__init__(message)


class ResourceLimitError(WLHeurError):
    """A configured cap (ground actions, expansions, memory, time) was exceeded."""


class DimensionError(InputError):
    pass


class FactorizationError(WLHeurError):
    """The regularised Gram matrix is not numerically positive definite."""


class BundleError(WLHeurError):
    pass


class BundleVersionError(BundleError):
    pass


class ChecksumError(BundleError):
    pass


class ParameterMismatchError(BundleError):
    """A bundle was queried with settings that differ from its training settings."""
