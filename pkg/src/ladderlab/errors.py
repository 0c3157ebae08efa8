"""Exception hierarchy shared across the toolkit."""


class LadderError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(LadderError):
    """Bad input data or configuration (CLI exit code 1)."""


class ContractError(LadderError):
    """A documented precondition of an operation was violated."""


class TruncatedFileError(ValidationError):
    """Raw video file ended mid-frame."""

    def __init__(self, path, frame_index):
        self.path = path
        self.frame_index = frame_index
        super().__init__(f"{path}: truncated read at frame index {frame_index}")


class DegenerateCurveError(ValidationError):
    """Fewer than two usable rate-quality points survived cleaning."""


class MetricUndefinedError(ValidationError):
    """Correlation metric requested on degenerate (constant) data."""


class DriverError(LadderError):
    """External encoder/metric tool failed (CLI exit code 2)."""

    def __init__(self, message, command=None):
        self.command = command
        if command:
            message = f"{message}\n  command: {command}"
        super().__init__(message)
