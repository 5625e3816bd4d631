"""Digests and the binary block container shared by every artifact file."""

from qfvae.utils.blockfile import Record, read_blockfile, write_blockfile
from qfvae.utils.hashing import hash_arrays, hash_content

__all__ = ["Record", "hash_arrays", "hash_content", "read_blockfile", "write_blockfile"]
