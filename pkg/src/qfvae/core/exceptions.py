"""Custom exceptions for qfvae."""


class QFVAEError(Exception):
    """Base exception for all qfvae errors."""

    pass


class ValidationError(QFVAEError):
    """Base for errors caused by bad input rather than a failed computation.

    The CLI maps this family to exit status 2.
    """

    pass


class DimensionError(ValidationError):
    """Raised when array shapes or sequence lengths disagree."""

    pass


class DomainError(ValidationError):
    """Raised when a value lies outside an operation's domain."""

    pass


class ConfigError(ValidationError):
    """Raised when there's an error with configuration."""

    pass


class DataError(ValidationError):
    """Raised when records reference data that does not exist."""

    pass


class FormatError(ValidationError):
    """Raised when a binary or record file is malformed."""

    def __init__(self, message: str, record: int | None = None, record_id: str | None = None) -> None:
        self.record = record
        self.record_id = record_id
        where = ""
        if record is not None:
            where = f" (record {record}" + (f", id {record_id!r}" if record_id else "") + ")"
        super().__init__(f"{message}{where}")


class VersionError(FormatError):
    """Raised when a file or record set carries an unsupported version."""

    def __init__(self, found: int | str, expected: int | str) -> None:
        self.found = found
        self.expected = expected
        super().__init__(f"Unsupported format version {found}, expected {expected}")


class EvaluationError(QFVAEError):
    """Raised when an objective evaluates to a non-finite value."""

    pass


class TrainingError(QFVAEError):
    """Raised when training diverges."""

    def __init__(self, step: int, loss: float) -> None:
        self.step = step
        self.loss = loss
        super().__init__(f"Non-finite loss {loss} at step {step}")


class StorageError(QFVAEError):
    """Raised when reading or writing an artifact fails at the OS level."""

    pass
