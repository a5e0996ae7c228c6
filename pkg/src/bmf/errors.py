"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to, so the command-line layer
can translate failures without a lookup table.
"""


class BMFError(Exception):
    exit_code = 1


class UsageError(BMFError, ValueError):
    """Malformed input: unknown preset, unparsable profile JSON, bad flag."""

    exit_code = 2


class DomainError(BMFError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 3


class EmptyRangeError(DomainError):
    pass


class PreconditionError(DomainError):
    pass


class CoverageError(DomainError):
    """Input data (table, sign vector) does not reach the requested cutoff."""


class InsufficientDataError(DomainError):
    pass


class NumericalError(DomainError):
    """A non-finite value or an unresolved singular evaluation."""


class CapacityError(BMFError, MemoryError):
    exit_code = 4
