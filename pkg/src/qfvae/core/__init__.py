"""Core module - configuration, constants, exceptions, logging."""

from qfvae.core.exceptions import (
    ConfigError,
    DataError,
    DimensionError,
    DomainError,
    EvaluationError,
    FormatError,
    QFVAEError,
    StorageError,
    TrainingError,
    ValidationError,
    VersionError,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DimensionError",
    "DomainError",
    "EvaluationError",
    "FormatError",
    "QFVAEError",
    "StorageError",
    "TrainingError",
    "ValidationError",
    "VersionError",
]
