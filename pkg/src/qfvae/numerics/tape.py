"""A minimal reverse-mode tape over numpy arrays.

Each operation returns a :class:`Tensor` that remembers its parents and a
closure mapping the upstream gradient to one gradient per parent. Calling
:meth:`Tensor.backward` on a scalar walks the graph in reverse topological
order. Only the operations the models in this package need are provided;
recurrent cells are fused into single nodes with hand-derived gradients to
keep the graph small.
"""

from collections.abc import Callable, Sequence
from typing import Any

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """An array value plus the information needed to backpropagate into it."""

    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad")
    __array_priority__ = 100
    __array_ufunc__ = None

    def __init__(
        self,
        value: Any,
        parents: tuple["Tensor", ...] = (),
        backward_fn: BackwardFn | None = None,
        requires_grad: bool = False,
    ) -> None:
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires a gradient."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.value) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(order):
            if node.backward_fn is None or node.grad is None:
                continue
            for parent, g in zip(node.parents, node.backward_fn(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    # Operator sugar
    def __add__(self, other: Any) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return mul(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: Any) -> "Tensor":
        return matmul(self, other)

    def __getitem__(self, key: Any) -> "Tensor":
        return index(self, key)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(value: Any) -> Tensor:
    """Wrap a value that never receives a gradient."""
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(value: np.ndarray) -> Tensor:
    """Wrap a trainable leaf. The array is shared, not copied."""
    return Tensor(value, requires_grad=True)


def _node(value: np.ndarray, parents: tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(value, parents, backward_fn, requires_grad=True)
    return Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# Elementwise arithmetic


def add(a: Any, b: Any) -> Tensor:
    a, b = constant(a), constant(b)
    return _node(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Any, b: Any) -> Tensor:
    a, b = constant(a), constant(b)
    return _node(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Any, b: Any) -> Tensor:
    a, b = constant(a), constant(b)
    return _node(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def square(x: Tensor) -> Tensor:
    return _node(x.value**2, (x,), lambda g: (2.0 * x.value * g,))


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.value)
    return _node(y, (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    return _node(np.log(x.value), (x,), lambda g: (g / x.value,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.value)
    return _node(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.value))
    return _node(y, (x,), lambda g: (g * y * (1.0 - y),))


def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Clamp to [low, high]; the gradient is zero where the clamp is active."""
    inside = (x.value > low) & (x.value < high)
    return _node(np.clip(x.value, low, high), (x,), lambda g: (g * inside,))


# Reductions and shape manipulation


def sum(x: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(np.sum(x.value, axis=axis, keepdims=keepdims), (x,), backward)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    return _node(x.value.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def expand_dims(x: Tensor, axis: int) -> Tensor:
    return reshape(x, np.expand_dims(x.value, axis).shape)


def swap_last(x: Tensor) -> Tensor:
    """Transpose the last two axes."""
    return _node(np.swapaxes(x.value, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),))


def index(x: Tensor, key: Any) -> Tensor:
    """Basic (slice/integer) indexing."""

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros_like(x.value)
        out[key] = g
        return (out,)

    return _node(x.value[key], (x,), backward)


def concat(tensors: Sequence[Any], axis: int = -1) -> Tensor:
    parts = [constant(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]
    return _node(
        np.concatenate([p.value for p in parts], axis=axis),
        tuple(parts),
        lambda g: tuple(np.split(g, splits, axis=axis)),
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = tuple(constant(t) for t in tensors)
    return _node(
        np.stack([p.value for p in parts], axis=axis),
        parts,
        lambda g: tuple(np.take(g, i, axis=axis) for i in range(len(parts))),
    )


def shift_right(x: Tensor) -> Tensor:
    """Shift the last axis one place right, filling position 0 with zero."""
    y = np.zeros_like(x.value)
    y[..., 1:] = x.value[..., :-1]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros_like(g)
        out[..., :-1] = g[..., 1:]
        return (out,)

    return _node(y, (x,), backward)


def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Embedding lookup: out[...] = table[ids[...]]."""
    ids = np.asarray(ids, dtype=np.int64)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        out = np.zeros_like(table.value)
        np.add.at(out, ids, g)
        return (out,)

    return _node(table.value[ids], (table,), backward)


def permute_steps(x: Tensor, perm: np.ndarray) -> Tensor:
    """Reorder axis 1 independently per row: out[b, n] = x[b, perm[b, n]]."""
    perm = np.asarray(perm, dtype=np.int64)
    inverse = np.argsort(perm, axis=1)
    expand = (...,) + (None,) * (x.ndim - 2)
    return _node(
        np.take_along_axis(x.value, perm[expand], axis=1),
        (x,),
        lambda g: (np.take_along_axis(g, inverse[expand], axis=1),),
    )


# Linear algebra


def matmul(a: Any, b: Any) -> Tensor:
    a, b = constant(a), constant(b)
    return _node(
        a.value @ b.value,
        (a, b),
        lambda g: (
            _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape),
            _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape),
        ),
    )


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ weight + bias over the last axis of x."""
    x = constant(x)
    out = x.value @ weight.value
    if bias is not None:
        out = out + bias.value
    n_in, n_out = weight.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        flat_g = g.reshape(-1, n_out)
        grads: list[np.ndarray | None] = [
            g @ weight.value.T,
            x.value.reshape(-1, n_in).T @ flat_g,
        ]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _node(out, parents, backward)


# Normalization


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.value - np.max(x.value, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)
    return _node(
        y,
        (x,),
        lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),),
    )


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.value - np.max(x.value, axis=axis, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    y = shifted - log_z
    return _node(
        y,
        (x,),
        lambda g: (g - np.exp(y) * np.sum(g, axis=axis, keepdims=True),),
    )


# Gradient routing


def stop_gradient(x: Tensor) -> Tensor:
    """Identity forward, zero gradient backward."""
    return Tensor(x.value)


def custom(value: np.ndarray, parents: tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    """Node whose value and gradients were computed outside the tape."""
    return _node(np.asarray(value, dtype=np.float64), parents, backward_fn)


# Recurrent cells


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """
    One LSTM step with packed gates [input, forget, output, candidate].

    Args:
        x: Input, shape (B, I)
        h: Previous hidden state, shape (B, H)
        c: Previous cell state, shape (B, H)
        weight: Packed weights, shape (I + H, 4H)
        bias: Packed bias, shape (4H,)

    Returns:
        Tensor of shape (B, 2H) holding [h_next, c_next]
    """
    x, h, c = constant(x), constant(h), constant(c)
    n_in = x.shape[-1]
    hidden = h.shape[-1]
    xh = np.concatenate([x.value, h.value], axis=-1)
    a = xh @ weight.value + bias.value
    gates = 1.0 / (1.0 + np.exp(-a[:, : 3 * hidden]))
    i, f, o = gates[:, :hidden], gates[:, hidden : 2 * hidden], gates[:, 2 * hidden :]
    cand = np.tanh(a[:, 3 * hidden :])
    c_next = f * c.value + i * cand
    tanh_c = np.tanh(c_next)
    h_next = o * tanh_c

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        g_h, g_c = g[:, :hidden], g[:, hidden:]
        g_c = g_c + g_h * o * (1.0 - tanh_c**2)
        da = np.concatenate(
            [
                g_c * cand * i * (1.0 - i),
                g_c * c.value * f * (1.0 - f),
                g_h * tanh_c * o * (1.0 - o),
                g_c * i * (1.0 - cand**2),
            ],
            axis=-1,
        )
        dxh = da @ weight.value.T
        return (
            dxh[:, :n_in],
            dxh[:, n_in:],
            g_c * f,
            xh.T @ da,
            da.sum(axis=0),
        )

    return _node(np.concatenate([h_next, c_next], axis=-1), (x, h, c, weight, bias), backward)


def rnn_cell(x: Tensor, h: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """One Elman step: tanh([x, h] @ weight + bias)."""
    x, h = constant(x), constant(h)
    n_in = x.shape[-1]
    xh = np.concatenate([x.value, h.value], axis=-1)
    y = np.tanh(xh @ weight.value + bias.value)

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        da = g * (1.0 - y * y)
        dxh = da @ weight.value.T
        return dxh[:, :n_in], dxh[:, n_in:], xh.T @ da, da.sum(axis=0)

    return _node(y, (x, h, weight, bias), backward)
