"""Exception types raised by the training stack."""


class ConfigurationError(ValueError):
    """Invalid configuration, shapes or requests.

    Args:
        message: Human readable description.
        field: Name of the offending configuration field, if any.
        line: 1-based line number in an input file, if any.
    """

    def __init__(
        self, message: str, field: str | None = None, line: int | None = None
    ):
        super().__init__(message)
        self.field = field
        self.line = line


class NumericalError(FloatingPointError):
    """A non-finite value appeared in observations, actions, losses or gradients."""


class CheckpointError(ValueError):
    """A checkpoint is missing, unreadable or of an unknown format."""
