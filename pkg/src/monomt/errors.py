"""Exception types shared across the package.

Builtin exceptions are used where they fit (IndexError for out-of-range
token ids); everything else gets a named class so callers and the CLI
can map failures to exit codes without string matching.
"""


class MonomtError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(MonomtError, ValueError):
    """Operands have incompatible shapes; the message names both."""


class ContractError(MonomtError, ValueError):
    """A documented precondition was violated by the caller."""


class EmptyInputError(MonomtError, ValueError):
    """An operation that needs at least one element got none."""


class FormatError(MonomtError, ValueError):
    """A file or record does not match its documented format."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(MonomtError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericError(MonomtError, ArithmeticError):
    """A numeric invariant broke (NaN input, NaN loss, ...)."""
