"""Exception hierarchy.

Two families matter to callers: :class:`ConfigError` (bad configuration,
CLI exit code 2) and :class:`DataError` (bad or insufficient data, CLI exit
code 3).
"""

from __future__ import annotations


class LamiError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LamiError):
    pass


class DataError(LamiError):
    pass


class RowError(DataError):
    """A trace CSV row could not be parsed or violates a Sample invariant."""

    def __init__(self, line: int, column: str, message: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column!r}: {message}")


class EmptyTraceError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class ColdStartError(DataError):
    """Target region and all of its neighbours hold no samples."""


class NoProgressError(DataError):
    """Patching found candidates but every alpha resolved to a zero portion."""


class DegenerateDataError(DataError):
    pass


class TrainingError(DataError):
    def __init__(self, epoch: int, message: str = "non-finite loss"):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch}: {message}")
