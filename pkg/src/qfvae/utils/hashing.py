"""SHA-256 digests for configuration provenance and parameter checksums."""

import hashlib
from collections.abc import Mapping

import numpy as np


def hash_content(content: str | bytes, length: int | None = None) -> str:
    """
    Hex SHA-256 digest of text or bytes.

    Args:
        content: Text (hashed as UTF-8) or raw bytes
        length: Keep only this many leading hex characters

    Returns:
        Hex digest, truncated when `length` is given
    """
    data = content.encode("utf-8") if isinstance(content, str) else content
    digest = hashlib.sha256(data).hexdigest()
    return digest if length is None else digest[:length]


def hash_arrays(arrays: Mapping[str, np.ndarray]) -> str:
    """
    Hex SHA-256 digest of named float64 arrays.

    Names, shapes and little-endian bytes all contribute, in mapping order,
    so two parameter sets hash equal only when they are bit-identical.
    """
    hasher = hashlib.sha256()
    for name, value in arrays.items():
        value = np.ascontiguousarray(value, dtype="<f8")
        hasher.update(name.encode("utf-8"))
        hasher.update(repr(value.shape).encode("ascii"))
        hasher.update(value.tobytes())
    return hasher.hexdigest()
