"""Building blocks shared by the stage-1 model and the priors."""

import numpy as np

from qfvae.core.constants import MASK_NEGATIVE
from qfvae.numerics import tape
from qfvae.numerics.tape import Tensor


def dense(x: Tensor | np.ndarray, p: dict[str, Tensor], name: str) -> Tensor:
    """Affine layer `{name}.w`, with `{name}.b` when registered."""
    return tape.linear(x, p[f"{name}.w"], p.get(f"{name}.b"))


def mask_bias(mask: np.ndarray) -> np.ndarray:
    """0 where `mask` is set, a large negative number elsewhere."""
    return np.where(mask, 0.0, MASK_NEGATIVE)


def rnn_scan(x: Tensor, p: dict[str, Tensor], name: str) -> Tensor:
    """Run an Elman cell left to right over axis 1 of (B, N, I); returns (B, N, H)."""
    batch, steps = x.shape[0], x.shape[1]
    hidden = p[f"{name}.b"].shape[0]
    h: Tensor = tape.constant(np.zeros((batch, hidden)))
    outputs = []
    for n in range(steps):
        h = tape.rnn_cell(x[:, n, :], h, p[f"{name}.w"], p[f"{name}.b"])
        outputs.append(h)
    return tape.stack(outputs, axis=1)


def reverse_valid(lengths: np.ndarray, steps: int) -> np.ndarray:
    """Per-row permutation reversing the first `lengths[b]` steps; it is its own inverse."""
    perm = np.tile(np.arange(steps), (len(lengths), 1))
    for b, length in enumerate(lengths):
        perm[b, :length] = perm[b, :length][::-1]
    return perm


def bidirectional(x: Tensor, p: dict[str, Tensor], name: str, lengths: np.ndarray) -> Tensor:
    """Concatenated forward and backward Elman passes over padded sequences."""
    forward = rnn_scan(x, p, f"{name}.fwd")
    perm = reverse_valid(lengths, x.shape[1])
    backward = tape.permute_steps(rnn_scan(tape.permute_steps(x, perm), p, f"{name}.bwd"), perm)
    return tape.concat([forward, backward], axis=-1)


def lstm_step(
    x: Tensor, h: Tensor, c: Tensor, p: dict[str, Tensor], name: str
) -> tuple[Tensor, Tensor]:
    """One LSTM step; returns (h, c)."""
    hidden = h.shape[-1]
    out = tape.lstm_cell(x, h, c, p[f"{name}.w"], p[f"{name}.b"])
    return out[:, :hidden], out[:, hidden:]


def weighted_sum(weights: Tensor, values: Tensor) -> Tensor:
    """sum_n weights[b, n] * values[b, n, :] for (B, N) weights and (B, N, M) values."""
    batch, steps = weights.shape
    picked = tape.matmul(tape.reshape(weights, (batch, 1, steps)), values)
    return tape.reshape(picked, (batch, values.shape[-1]))


def gaussian_kl(
    mu_q: Tensor | np.ndarray,
    log_sigma_q: Tensor | np.ndarray,
    mu_p: Tensor | np.ndarray,
    log_sigma_p: Tensor | np.ndarray,
) -> Tensor:
    """KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)) summed over the last axis."""
    mu_q, log_sigma_q = tape.constant(mu_q), tape.constant(log_sigma_q)
    mu_p, log_sigma_p = tape.constant(mu_p), tape.constant(log_sigma_p)
    var_ratio = tape.exp(2.0 * (log_sigma_q - log_sigma_p))
    mean_term = tape.square(mu_q - mu_p) * tape.exp(-2.0 * log_sigma_p)
    per_dim = (log_sigma_p - log_sigma_q) + 0.5 * (var_ratio + mean_term) - 0.5
    return tape.sum(per_dim, axis=-1)


def standard_kl(mu: Tensor, log_sigma: Tensor) -> Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) summed over the last axis."""
    per_dim = tape.square(mu) + tape.exp(2.0 * log_sigma) - 1.0 - 2.0 * log_sigma
    return 0.5 * tape.sum(per_dim, axis=-1)
