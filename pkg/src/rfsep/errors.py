"""Exception types raised across the package.

Every precondition or contract violation raises a subclass of
:class:`RfsepError` so callers (and the CLI) can distinguish structured
failures from programming errors.
"""


class RfsepError(Exception):
    """Base class for all structured errors raised by rfsep."""


class ShapeMismatchError(RfsepError):
    """Operand shapes are incompatible for the requested operation."""


class NonFiniteError(RfsepError):
    """A NaN or infinity showed up where finite values are required."""


class InvalidConfigError(RfsepError):
    """A configuration object violates its invariants."""


class SignalError(RfsepError):
    """A signal-domain precondition failed (length, power, bit count)."""


class FormatError(RfsepError):
    """A binary file is malformed. Carries the offending byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainAbortError(RfsepError):
    """Training hit a non-finite loss. Carries the last good checkpoint."""

    def __init__(self, message: str, last_good_checkpoint: str | None = None):
        super().__init__(message)
        self.last_good_checkpoint = last_good_checkpoint
