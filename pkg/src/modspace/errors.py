"""Exception hierarchy shared by every modspace module."""

from typing import Optional, Sequence


class ModspaceError(Exception):
    """Base class for all toolkit errors."""


class GridError(ModspaceError):
    """Invalid grid parameters."""


class GridMismatchError(ModspaceError):
    """Two fields that must share a grid do not."""


class FieldError(ModspaceError):
    """Non-finite values, wrong shapes or a malformed field file."""


class DegenerateWindowError(ModspaceError):
    """Zero window, or a window pair with <psi, phi> too close to zero."""


class ConfigError(ModspaceError):
    """Unknown or invalid configuration."""


class FlowDivergenceError(ModspaceError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (at s={time:.6g})")
        self.time = time


class NonContractionError(ModspaceError):
    def __init__(self, message: str, increments: Sequence[float]):
        super().__init__(message)
        self.increments = list(increments)


class ConvergenceError(ModspaceError):
    def __init__(self, message: str, increments: Sequence[float]):
        super().__init__(message)
        self.increments = list(increments)


class ExperimentError(ModspaceError):
    def __init__(self, experiment: str, cause: Optional[BaseException] = None):
        detail = f": {cause}" if cause is not None else ""
        super().__init__(f"experiment '{experiment}' failed{detail}")
        self.experiment = experiment
        self.cause = cause
