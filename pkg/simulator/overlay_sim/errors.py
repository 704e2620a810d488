"""Exception hierarchy shared by every simulator module."""

from pathlib import Path
from typing import Any, Mapping, Optional


class SimulationError(Exception):
    pass


class SchedulingError(SimulationError):
    """An event was scheduled before the current clock, or the clock was asked to go backwards."""


class EmptyRangeError(SimulationError, ValueError):
    pass


class OverlayError(SimulationError):
    """An overlay operation was invoked with a violated precondition."""


class TrackerError(SimulationError):
    pass


class StrategyError(SimulationError):
    pass


class ConfigError(SimulationError, ValueError):
    pass


class InvariantViolation(SimulationError):
    def __init__(self, message: str, details: Optional[Mapping[str, Any]] = None):
        self.details = dict(details or {})
        if self.details:
            rendered = ", ".join(f"{key}={value!r}" for key, value in self.details.items())
            message = f"{message} ({rendered})"
        super().__init__(message)


class OutputError(SimulationError):
    def __init__(self, path: Path, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


class HarnessError(SimulationError):
    """A sweep was aborted; artifacts of the runs completed before the failure stay on disk."""

    def __init__(self, cell: str, cause: BaseException):
        self.cell = cell
        self.cause = cause
        super().__init__(f"run {cell} failed: {cause}")
