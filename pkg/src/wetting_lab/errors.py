"""Shared exception types. Exit-code mapping lives in the CLI."""


class ParameterError(ValueError):
    """A caller-supplied parameter is outside the supported range."""


class RefusalError(RuntimeError):
    """A computation was refused because it exceeds a hard cost or honesty cap.

    Oracles and enumerations never approximate; past their caps they refuse.
    """


class TruncationError(RuntimeError):
    """Height/window truncation could not be certified even after doubling."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
