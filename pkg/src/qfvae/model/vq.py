"""Vector quantization: codebook, nearest-neighbour assignment, losses and straight-through gradients."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.numerics import tape
from qfvae.numerics.rng import RngStream

INIT_RANGE = 0.05


@dataclass
class Codebook:
    """K embeddings of dimension D."""

    embeddings: np.ndarray

    def __post_init__(self) -> None:
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] < 1:
            raise DimensionError("codebook must be a K x D matrix with K >= 1")
        if not np.all(np.isfinite(self.embeddings)):
            raise DomainError("codebook entries must be finite")

    @property
    def size(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])


@dataclass
class Assignment:
    """Class index and quantized vector of each latent."""

    indices: np.ndarray  # int64, (N,)
    quantized: np.ndarray  # (N, D)


@dataclass
class VQLoss:
    """Both VQ terms with their separated gradients."""

    quantization: float
    commitment: float
    grad_codebook: np.ndarray  # d quantization / d embeddings, (K, D)
    grad_latents: np.ndarray  # d commitment / d latents, (N, D)

    @property
    def total(self) -> float:
        return self.quantization + self.commitment


def squared_distances(codebook: Codebook, latents: np.ndarray) -> np.ndarray:
    """||z_n - e_k||^2 for every latent and codebook row, shape (N, K)."""
    diff = latents[:, None, :] - codebook.embeddings[None, :, :]
    return np.sum(diff * diff, axis=-1)


def quantize(codebook: Codebook, z: np.ndarray) -> tuple[int, np.ndarray]:
    """
    Nearest codebook row to a single latent.

    Args:
        codebook: Codebook
        z: Latent of dimension D

    Returns:
        (index, embedding); ties go to the smallest index
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (codebook.dim,):
        raise DimensionError(f"latent shape {z.shape} does not match codebook dimension {codebook.dim}")
    index = int(np.argmin(squared_distances(codebook, z[None, :])[0]))
    return index, codebook.embeddings[index].copy()


def quantize_all(codebook: Codebook, latents: np.ndarray) -> Assignment:
    """Vectorized :func:`quantize` over rows of `latents`."""
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[1] != codebook.dim:
        raise DimensionError(f"latents shape {latents.shape} does not match codebook dimension {codebook.dim}")
    if latents.shape[0] == 0:
        return Assignment(np.zeros(0, dtype=np.int64), np.zeros((0, codebook.dim)))
    indices = np.argmin(squared_distances(codebook, latents), axis=1).astype(np.int64)
    return Assignment(indices, codebook.embeddings[indices].copy())


def vq_loss(codebook: Codebook, latents: np.ndarray, assignment: Assignment, gamma: float) -> VQLoss:
    """
    Quantization and commitment losses.

    The quantization term sum ||sg[z_n] - e_k||^2 only trains the codebook;
    the commitment term gamma * sum ||z_n - sg[e_k]||^2 only trains the latents.

    Args:
        codebook: Codebook
        latents: Pre-quantization latents, shape (N, D)
        assignment: Assignment of the latents
        gamma: Commitment weight

    Returns:
        VQLoss with both scalars and both gradients
    """
    latents = np.asarray(latents, dtype=np.float64)
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    if latents.shape != (assignment.indices.size, codebook.dim):
        raise DimensionError(
            f"latents {latents.shape} misaligned with {assignment.indices.size} assignments of dimension {codebook.dim}"
        )
    quantized = codebook.embeddings[assignment.indices]
    residual = latents - quantized
    squared = float(np.sum(residual * residual))
    grad_codebook = np.zeros_like(codebook.embeddings)
    np.add.at(grad_codebook, assignment.indices, -2.0 * residual)
    return VQLoss(
        quantization=squared,
        commitment=gamma * squared,
        grad_codebook=grad_codebook,
        grad_latents=2.0 * gamma * residual,
    )


def straight_through(upstream: np.ndarray) -> np.ndarray:
    """Gradient at the quantized value, copied unchanged to the pre-quantization latent."""
    return np.array(upstream, dtype=np.float64, copy=True)


def codebook_perplexity(indices: Sequence[int] | np.ndarray, size: int) -> float:
    """exp(entropy) of the empirical class distribution, in [1, K]."""
    indices = np.asarray(indices, dtype=np.int64).ravel()
    if indices.size == 0:
        raise DomainError("perplexity of an empty assignment set is undefined")
    if np.any(indices < 0) or np.any(indices >= size):
        raise DomainError(f"class index outside [0, {size})")
    probs = np.bincount(indices, minlength=size) / indices.size
    used = probs[probs > 0]
    return float(np.exp(-np.sum(used * np.log(used))))


def init_codebook(
    size: int, dim: int, rng: RngStream, samples: np.ndarray | None = None
) -> Codebook:
    """
    Initial codebook: K distinct latent samples when given, else uniform on [-0.05, 0.05].

    Args:
        size: K
        dim: D
        rng: Random stream
        samples: Optional latents, shape (M, D) with M >= K

    Returns:
        Codebook
    """
    if size < 1 or dim < 1:
        raise DomainError("codebook size and dimension must be >= 1")
    if samples is None:
        return Codebook(rng.uniform(-INIT_RANGE, INIT_RANGE, (size, dim)))
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[1] != dim:
        raise DimensionError(f"samples shape {samples.shape} does not match dimension {dim}")
    if samples.shape[0] < size:
        raise DomainError(f"need at least {size} samples to initialize the codebook, got {samples.shape[0]}")
    return Codebook(samples[rng.permutation(samples.shape[0])[:size]].copy())


# Tape integration


def quantize_node(z: tape.Tensor, quantized: np.ndarray) -> tape.Tensor:
    """Forward the quantized value; backward copies the gradient to `z`."""
    return tape.custom(quantized, (z,), lambda g: (straight_through(g),))


def vq_objective(
    z: tape.Tensor,
    codebook: tape.Tensor,
    valid: np.ndarray,
    gamma: float,
    scale: float = 1.0,
) -> tuple[tape.Tensor, Assignment, VQLoss]:
    """
    Quantize the valid rows of a padded latent batch and attach both VQ losses to the tape.

    Args:
        z: Latents, shape (B, N, D)
        codebook: Codebook leaf, shape (K, D)
        valid: Boolean mask of real tokens, shape (B, N)
        gamma: Commitment weight
        scale: Multiplier applied to the losses and their gradients

    Returns:
        (scaled loss node, assignment of the valid rows, unscaled VQLoss)
    """
    book = Codebook(codebook.value)
    flat = z.value[valid]
    assignment = quantize_all(book, flat)
    losses = vq_loss(book, flat, assignment, gamma)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        grad_z = np.zeros_like(z.value)
        grad_z[valid] = losses.grad_latents
        return g * scale * grad_z, g * scale * losses.grad_codebook

    return tape.custom(np.asarray(scale * losses.total), (z, codebook), backward), assignment, losses
