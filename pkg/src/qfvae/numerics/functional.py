"""Sampling and numerically stable primitives on plain arrays."""

import numpy as np

from qfvae.core.constants import PROB_TOLERANCE
from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.numerics.rng import RngStream


def sample_gaussian(rng: RngStream, mean: np.ndarray, stddev: np.ndarray) -> np.ndarray:
    """
    Draw mean + stddev * eps with eps standard-normal.

    Args:
        rng: Random stream
        mean: Mean vector (any shape)
        stddev: Non-negative standard deviations, same shape as mean

    Returns:
        One sample with the shape of mean
    """
    mean = np.asarray(mean, dtype=np.float64)
    stddev = np.asarray(stddev, dtype=np.float64)
    if mean.shape != stddev.shape:
        raise DimensionError(f"mean shape {mean.shape} != stddev shape {stddev.shape}")
    if np.any(stddev < 0):
        raise DomainError("stddev must be non-negative")
    return mean + stddev * rng.normal(mean.shape)


def check_probabilities(probs: np.ndarray) -> np.ndarray:
    """Validate a probability vector and return it as float64."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise DimensionError("probabilities must be a non-empty vector")
    if np.any(probs < 0):
        raise DomainError("probabilities must be non-negative")
    if abs(probs.sum() - 1.0) > PROB_TOLERANCE:
        raise DomainError(f"probabilities sum to {probs.sum()!r}, expected 1")
    return probs


def sample_categorical(rng: RngStream, probs: np.ndarray) -> int:
    """Draw a class index i with probability probs[i]."""
    probs = check_probabilities(probs)
    # Inverse CDF on one uniform draw; searchsorted skips zero-mass classes.
    cdf = np.cumsum(probs)
    u = rng.uniform(0.0, 1.0) * cdf[-1]
    index = int(np.searchsorted(cdf, u, side="right"))
    return min(index, probs.size - 1)


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Log-probabilities with max-subtraction for stability."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax computed through :func:`log_softmax`."""
    return np.exp(log_softmax(logits, axis=axis))
