"""
Exception hierarchy shared by all modules.

Each error carries the process exit code the CLI reports for it:
2 validation, 3 numerical (pole/overflow), 4 I/O.
"""


class ScattererError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1
    kind = "error"


class DomainError(ScattererError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2
    kind = "domain"


class RangeError(ScattererError, ValueError):
    """A query falls outside the range covered by a precomputed table."""

    exit_code = 2
    kind = "range"


class PoleError(ScattererError, ArithmeticError):
    """Evaluation requested at (or within the guard of) a pole."""

    exit_code = 3
    kind = "pole"

    def __init__(self, message: str, index=None, nearest=None):
        super().__init__(message)
        self.index = index
        self.nearest = nearest


class CapacityError(ScattererError, OverflowError):
    """Exact integer keys or table sizes would exceed the supported range."""

    exit_code = 3
    kind = "capacity"


class OutputError(ScattererError, OSError):
    """Writing an output file failed."""

    exit_code = 4
    kind = "io"
