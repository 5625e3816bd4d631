"""Deterministic, serializable random streams."""

from typing import Any

import numpy as np


class RngStream:
    """A seeded random stream backed by numpy's counter-based Philox generator.

    Philox output depends only on (key, counter), so a stream is reproducible
    across runs and platforms and its full state round-trips through
    :meth:`state` / :meth:`from_state`. A stream must not be shared between
    threads; give each worker its own stream via :meth:`split`.
    """

    def __init__(self, seed: int) -> None:
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._bit_generator = np.random.Philox(key=self.seed)
        self.generator = np.random.Generator(self._bit_generator)

    def split(self, index: int) -> "RngStream":
        """Derive an independent child stream for (seed, index)."""
        sequence = np.random.SeedSequence([self.seed & 0xFFFFFFFF, self.seed >> 32, int(index)])
        child_seed = int(sequence.generate_state(1, dtype=np.uint64)[0])
        return RngStream(child_seed)

    def state(self) -> dict[str, Any]:
        """JSON-serializable snapshot of the stream position."""
        raw = self._bit_generator.state
        return {
            "seed": self.seed,
            "counter": [int(v) for v in raw["state"]["counter"]],
            "key": [int(v) for v in raw["state"]["key"]],
            "buffer": [int(v) for v in raw["buffer"]],
            "buffer_pos": int(raw["buffer_pos"]),
            "has_uint32": int(raw["has_uint32"]),
            "uinteger": int(raw["uinteger"]),
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "RngStream":
        """Rebuild a stream at a position captured by :meth:`state`."""
        stream = cls(int(state["seed"]))
        stream._bit_generator.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array(state["counter"], dtype=np.uint64),
                "key": np.array(state["key"], dtype=np.uint64),
            },
            "buffer": np.array(state["buffer"], dtype=np.uint64),
            "buffer_pos": int(state["buffer_pos"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }
        return stream

    def normal(self, size: int | tuple[int, ...]) -> np.ndarray:
        """Standard-normal draws."""
        return self.generator.standard_normal(size)

    def uniform(self, low: float, high: float, size: int | tuple[int, ...] | None = None) -> Any:
        """Uniform draws on [low, high)."""
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size: int | tuple[int, ...] | None = None) -> Any:
        """Integer draws on [low, high)."""
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        """Random permutation of range(n)."""
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed})"
