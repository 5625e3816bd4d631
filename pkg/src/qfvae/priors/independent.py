"""Independent standard-normal prior with a scaled standard deviation."""

import numpy as np

from qfvae.core.exceptions import DomainError
from qfvae.model.qfvae import LatentSequence
from qfvae.model.vq import Codebook, quantize_all
from qfvae.numerics.rng import RngStream


def sample_independent(
    num_tokens: int,
    dim: int,
    scale: float,
    rng: RngStream,
    codebook: Codebook | None = None,
) -> LatentSequence:
    """
    Draw z_n ~ N(0, scale^2 I) independently per token.

    Args:
        num_tokens: Number of latent rows
        dim: Latent dimension
        scale: Standard deviation multiplier, >= 0
        rng: Random stream
        codebook: Quantize every row when given

    Returns:
        LatentSequence, quantized when a codebook is given
    """
    if scale < 0:
        raise DomainError(f"scale must be non-negative, got {scale}")
    if num_tokens < 1 or dim < 1:
        raise DomainError("need at least one latent row of positive dimension")
    z = scale * rng.normal((num_tokens, dim))
    if codebook is None:
        return LatentSequence(z=z)
    assignment = quantize_all(codebook, z)
    return LatentSequence(z=z, indices=assignment.indices, quantized=assignment.quantized)


def adjacent_discontinuity(latents: np.ndarray) -> float:
    """Mean ||z_n - z_{n-1}|| over adjacent rows; 0 for a single row."""
    latents = np.asarray(latents, dtype=np.float64)
    if latents.shape[0] < 2:
        return 0.0
    return float(np.mean(np.linalg.norm(np.diff(latents, axis=0), axis=-1)))
