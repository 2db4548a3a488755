"""Exception hierarchy shared by every module.

The CLI maps each class to a distinct exit code, so library code should raise
the most specific one that applies.
"""


class WatermarkError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class UsageError(WatermarkError, ValueError):
    """Invalid argument or unsupported combination of arguments."""

    exit_code = 2


class CapacityError(WatermarkError):
    """Payload or position request does not fit the cover."""

    exit_code = 3


class FormatError(WatermarkError):
    """Container bytes could not be parsed."""

    exit_code = 4

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DimensionError(WatermarkError, ValueError):
    """Shapes of frames, clips or sample vectors disagree."""

    exit_code = 4


class NumericError(WatermarkError, ArithmeticError):
    """Non-finite input or a solver that failed to converge."""

    exit_code = 1
