"""Named parameter blocks shared by every trainable module."""

from collections.abc import Iterator, Mapping

import numpy as np

from qfvae.core.exceptions import DimensionError
from qfvae.numerics import tape
from qfvae.numerics.rng import RngStream
from qfvae.utils.hashing import hash_arrays


class ParameterSet:
    """An ordered mapping of parameter names to float64 arrays."""

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None) -> None:
        self._arrays: dict[str, np.ndarray] = {}
        for name, value in (arrays or {}).items():
            self[name] = value

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        self._arrays[name] = np.array(value, dtype=np.float64)

    def __contains__(self, name: object) -> bool:
        return name in self._arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._arrays.items())

    def names(self) -> list[str]:
        return list(self._arrays)

    @property
    def size(self) -> int:
        """Total number of scalar parameters."""
        return int(sum(a.size for a in self._arrays.values()))

    def copy(self) -> "ParameterSet":
        return ParameterSet({k: v.copy() for k, v in self._arrays.items()})

    def tensors(self) -> dict[str, tape.Tensor]:
        """Fresh tape leaves sharing this set's arrays."""
        return {name: tape.parameter(value) for name, value in self._arrays.items()}

    def subset(self, prefix: str) -> "ParameterSet":
        """Parameters whose names start with `prefix`."""
        return ParameterSet({k: v for k, v in self._arrays.items() if k.startswith(prefix)})

    def update(self, other: "ParameterSet") -> None:
        for name, value in other.items():
            self[name] = value

    def checksum(self) -> str:
        """SHA-256 over names, shapes and raw bytes."""
        return hash_arrays(self._arrays)

    def equals(self, other: "ParameterSet") -> bool:
        """Bit-exact equality."""
        if self.names() != other.names():
            return False
        return all(np.array_equal(self[n], other[n]) for n in self)


def collect_grads(params: ParameterSet, leaves: Mapping[str, tape.Tensor]) -> dict[str, np.ndarray]:
    """Gradients of the tape leaves, zero for parameters the loss never touched."""
    grads: dict[str, np.ndarray] = {}
    for name, value in params.items():
        leaf = leaves.get(name)
        grad = None if leaf is None else leaf.grad
        grads[name] = np.zeros_like(value) if grad is None else grad
    return grads


def glorot(rng: RngStream, n_in: int, n_out: int, scale: float = 1.0) -> np.ndarray:
    """Uniform Glorot initialization."""
    limit = scale * np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, (n_in, n_out))


def add_linear(
    params: ParameterSet,
    name: str,
    n_in: int,
    n_out: int,
    rng: RngStream,
    scale: float = 1.0,
    bias: float = 0.0,
) -> None:
    """Register `{name}.w` (n_in, n_out) and `{name}.b` (n_out,)."""
    params[f"{name}.w"] = glorot(rng, n_in, n_out, scale)
    params[f"{name}.b"] = np.full(n_out, bias)


def add_lstm(params: ParameterSet, name: str, n_in: int, hidden: int, rng: RngStream) -> None:
    """Register a packed LSTM cell; the forget-gate bias starts at 1."""
    params[f"{name}.w"] = glorot(rng, n_in + hidden, 4 * hidden)
    bias = np.zeros(4 * hidden)
    bias[hidden : 2 * hidden] = 1.0
    params[f"{name}.b"] = bias


def add_rnn(params: ParameterSet, name: str, n_in: int, hidden: int, rng: RngStream) -> None:
    """Register an Elman tanh cell."""
    params[f"{name}.w"] = glorot(rng, n_in + hidden, hidden)
    params[f"{name}.b"] = np.zeros(hidden)


def check_same_layout(a: ParameterSet, b: ParameterSet) -> None:
    """Raise unless both sets hold the same names with the same shapes."""
    if a.names() != b.names():
        raise DimensionError("parameter sets hold different names")
    for name in a:
        if a[name].shape != b[name].shape:
            raise DimensionError(f"parameter {name!r}: {a[name].shape} != {b[name].shape}")
