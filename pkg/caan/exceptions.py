"""Errors raised across the caan apps."""


class CaanError(Exception):
    """Base class for every error the package raises on purpose."""


class ShapeError(CaanError, ValueError):
    """A tensor or feature map does not have the shape an operation requires."""


class ContractError(CaanError, ValueError):
    """A precondition of an operation was violated."""


class NumericError(CaanError, ArithmeticError):
    """A loss or gradient stopped being finite."""

    def __init__(self, message: str, iteration: int | None = None) -> None:
        super().__init__(message)
        self.iteration = iteration


class ConfigError(CaanError):
    """Invalid run or process configuration."""

    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(CaanError):
    """Dataset content violates its invariants."""


class ManifestParseError(ValidationError):
    """A manifest row could not be parsed."""

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class FormatError(CaanError):
    """A binary file does not follow its declared format."""


class TruncatedPayloadError(FormatError):
    """A binary file ends before the payload its header announces."""


class DatasetIOError(CaanError, OSError):
    """A dataset path could not be read or written."""
