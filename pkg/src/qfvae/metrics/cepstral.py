"""MFCC extraction and mel-cepstral distortion."""

from functools import lru_cache

import numpy as np
from scipy import fft

from qfvae.core.constants import MEL_BANDS, MFCC_COEFFICIENTS, MFCC_LOG_FLOOR
from qfvae.core.exceptions import DimensionError, DomainError

MCD_SCALE = 10.0 / np.log(10.0)


def hz_to_mel(hz: np.ndarray | float) -> np.ndarray:
    """HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel: np.ndarray | float) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(n_bins: int, bin_hz: float, n_bands: int = MEL_BANDS) -> np.ndarray:
    """
    Triangular filters spanning 0 .. n_bins * bin_hz on the mel scale.

    Each filter is normalized to unit sum, so a flat spectrum gives the same
    output in every band. A filter too narrow to cover any bin falls back to
    its nearest bin.

    Args:
        n_bins: Number of linear-frequency bins
        bin_hz: Spacing of the bins in Hz
        n_bands: Number of mel bands

    Returns:
        Read-only matrix of shape (n_bands, n_bins)
    """
    freqs = np.arange(n_bins) * bin_hz
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(n_bins * bin_hz), n_bands + 2))
    bank = np.zeros((n_bands, n_bins))
    for m in range(n_bands):
        low, centre, high = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - low) / (centre - low)
        falling = (high - freqs) / (high - centre)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
        total = bank[m].sum()
        if total <= 0.0:
            bank[m, int(np.argmin(np.abs(freqs - centre)))] = 1.0
        else:
            bank[m] /= total
    bank.setflags(write=False)
    return bank


def mfcc(
    frames: np.ndarray,
    bin_hz: float,
    n_coefficients: int = MFCC_COEFFICIENTS,
    n_bands: int = MEL_BANDS,
) -> np.ndarray:
    """
    Mel-frequency cepstral coefficients of magnitude frames.

    Args:
        frames: Non-negative magnitudes, shape (T, F)
        bin_hz: Spacing of the frequency bins in Hz
        n_coefficients: Coefficients kept, starting at c0
        n_bands: Mel bands

    Returns:
        Array of shape (T, n_coefficients)
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise DimensionError("frames must be a T x F matrix")
    if np.any(frames < 0):
        raise DomainError("frames must be non-negative")
    if not 1 <= n_coefficients <= n_bands:
        raise DomainError(f"n_coefficients must lie in [1, {n_bands}]")
    bank = mel_filterbank(frames.shape[1], float(bin_hz), n_bands)
    log_mel = np.log(np.maximum(frames @ bank.T, MFCC_LOG_FLOOR))
    return fft.dct(log_mel, type=2, norm="ortho", axis=-1)[:, :n_coefficients]


def mcd(reference: np.ndarray, estimate: np.ndarray, include_c0: bool = False) -> float:
    """
    Mean mel-cepstral distortion in dB.

    Args:
        reference: Reference cepstra, shape (T, C)
        estimate: Estimated cepstra of the same shape
        include_c0: Also count the energy coefficient

    Returns:
        Frame-averaged (10 / ln 10) * sqrt(2 * sum_d (c_d - c'_d)^2)
    """
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise DimensionError(f"cepstra shapes differ: {reference.shape} != {estimate.shape}")
    if reference.ndim != 2 or reference.shape[0] == 0:
        raise DomainError("cepstra must be a non-empty T x C matrix")
    first = 0 if include_c0 else 1
    diff = reference[:, first:] - estimate[:, first:]
    return float(np.mean(MCD_SCALE * np.sqrt(2.0 * np.sum(diff * diff, axis=-1))))
