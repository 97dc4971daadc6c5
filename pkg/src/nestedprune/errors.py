"""Exception types shared across the package."""

from __future__ import annotations


class FormatError(ValueError):
    """Malformed or inconsistent input data (trace files, cohorts, reports)."""


class TraceFormatError(FormatError):
    """Format error tied to a location in a trace file."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        location = ""
        if path is not None:
            location = f"{path}: "
        if line is not None:
            location += f"line {line}: "
        super().__init__(location + message)
        self.path = path
        self.line = line


class InvalidTrialStateError(RuntimeError):
    """A step was reported for a trial that cannot accept one."""
