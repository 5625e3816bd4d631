"""A small binary container for named little-endian array blocks.

Layout::

    magic (4 bytes) | version u32 | header length u32 | header (UTF-8 JSON)
    record count u32 | records...

    record:  payload length u64 | payload
    payload: id length u16 | id (UTF-8) | array count u16 | arrays...
    array:   name length u16 | name (UTF-8) | kind (b"f" float64, b"i" int64)
             | ndim u8 | shape u64 * ndim | data (8 bytes per element, little-endian)

Corpus files, checkpoints and sample sets all use this container with their
own magic bytes.
"""

import json
import os
import struct
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from qfvae.core.exceptions import FormatError, StorageError, VersionError

_DTYPES = {b"f": np.dtype("<f8"), b"i": np.dtype("<i8")}


@dataclass
class Record:
    """One identified group of named arrays."""

    record_id: str
    arrays: dict[str, np.ndarray] = field(default_factory=dict)


def _encode_array(name: str, value: np.ndarray) -> bytes:
    value = np.asarray(value)
    if np.issubdtype(value.dtype, np.integer) or value.dtype == np.bool_:
        kind, data = b"i", np.ascontiguousarray(value, dtype="<i8")
    else:
        kind, data = b"f", np.ascontiguousarray(value, dtype="<f8")
    raw_name = name.encode("utf-8")
    parts = [
        struct.pack("<H", len(raw_name)),
        raw_name,
        kind,
        struct.pack("<B", data.ndim),
        struct.pack(f"<{data.ndim}Q", *data.shape),
        data.tobytes(),
    ]
    return b"".join(parts)


def _encode_record(record: Record) -> bytes:
    raw_id = record.record_id.encode("utf-8")
    parts = [struct.pack("<H", len(raw_id)), raw_id, struct.pack("<H", len(record.arrays))]
    parts += [_encode_array(name, value) for name, value in record.arrays.items()]
    payload = b"".join(parts)
    return struct.pack("<Q", len(payload)) + payload


def encode(magic: bytes, version: int, header: dict[str, Any], records: Iterable[Record]) -> bytes:
    """Serialize a header and records to bytes."""
    raw_header = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    encoded = [_encode_record(r) for r in records]
    return b"".join(
        [
            magic,
            struct.pack("<II", version, len(raw_header)),
            raw_header,
            struct.pack("<I", len(encoded)),
            *encoded,
        ]
    )


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise EOFError
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _decode_payload(reader: _Reader) -> Record:
    (id_len,) = reader.unpack("<H")
    record = Record(reader.take(id_len).decode("utf-8"))
    (count,) = reader.unpack("<H")
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        kind = reader.take(1)
        if kind not in _DTYPES:
            raise ValueError(f"unknown array kind {kind!r} for {name!r}")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}Q")
        dtype = _DTYPES[kind]
        size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        data = np.frombuffer(reader.take(size * dtype.itemsize), dtype=dtype).reshape(shape)
        record.arrays[name] = data.astype(dtype.newbyteorder("="))
    return record


def decode(data: bytes, magic: bytes, version: int) -> tuple[dict[str, Any], list[Record]]:
    """Parse bytes produced by :func:`encode`; nothing is returned unless all records parse."""
    reader = _Reader(data)
    try:
        found = reader.take(len(magic))
    except EOFError:
        raise FormatError("file too short to hold the magic bytes") from None
    if found != magic:
        raise FormatError(f"bad magic {found!r}, expected {magic!r}")
    try:
        found_version, header_len = reader.unpack("<II")
        header = json.loads(reader.take(header_len).decode("utf-8"))
        (count,) = reader.unpack("<I")
    except (EOFError, ValueError) as e:
        raise FormatError(f"truncated or corrupt header: {e}") from e
    if found_version != version:
        raise VersionError(found_version, version)

    records: list[Record] = []
    for index in range(count):
        try:
            (length,) = reader.unpack("<Q")
            payload = _Reader(reader.take(length))
        except EOFError:
            raise FormatError("truncated record", record=index) from None
        record_id = None
        try:
            (id_len,) = struct.unpack_from("<H", payload.data)
            record_id = payload.data[2 : 2 + id_len].decode("utf-8")
        except (struct.error, UnicodeDecodeError):
            pass
        try:
            record = _decode_payload(payload)
        except (EOFError, ValueError, UnicodeDecodeError) as e:
            raise FormatError(f"corrupt record: {str(e) or 'truncated'}", record=index, record_id=record_id) from e
        if payload.pos != len(payload.data):
            raise FormatError("trailing bytes in record", record=index, record_id=record.record_id)
        records.append(record)
    if reader.pos != len(data):
        raise FormatError("trailing bytes after the last record")
    return header, records


def write_blockfile(
    path: Path, magic: bytes, version: int, header: dict[str, Any], records: Iterable[Record]
) -> None:
    """Write a block file atomically (temporary file, then rename)."""
    path = Path(path)
    data = encode(magic, version, header, records)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as e:
        raise StorageError(f"Failed to write {path}: {e}") from e


def read_blockfile(path: Path, magic: bytes, version: int) -> tuple[dict[str, Any], list[Record]]:
    """Read and validate a block file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise StorageError(f"Failed to read {path}: {e}") from e
    return decode(data, magic, version)
