"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and FormatError (plus plain I/O
failures) to exit code 3; everything else is a bug.
"""


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(ValueError):
    """Input is outside the operation's domain (empty sequence, etc.)."""


class ContractError(RuntimeError):
    """A caller broke an API contract (bad index, non-scalar loss, ...)."""


class ConfigError(ValueError):
    """Invalid configuration value or combination."""


class FormatError(RuntimeError):
    """A binary file is malformed. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
