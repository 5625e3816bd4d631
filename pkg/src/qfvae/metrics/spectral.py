"""Magnitude STFT front end and Griffin-Lim resynthesis.

Frames are centred: the waveform is padded with (window - hop) / 2 zeros on
each side so a signal of T * hop samples yields exactly T frames and frame t
is centred on hop block t. Magnitudes are divided by sum(window) / 2, so a
unit-amplitude sinusoid on a bin centre peaks at 1.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft
from scipy.signal import get_window

from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.numerics.rng import RngStream

TINY = 1e-12


@dataclass(frozen=True)
class FrameGeometry:
    """Analysis geometry in samples."""

    sample_rate: int
    hop: int
    window: int
    n_bins: int

    @property
    def hop_ms(self) -> float:
        return 1000.0 * self.hop / self.sample_rate

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.window

    def num_samples(self, num_frames: int) -> int:
        """Waveform length that analyses to exactly `num_frames` frames."""
        return num_frames * self.hop


@lru_cache(maxsize=16)
def hann(window: int) -> np.ndarray:
    """Periodic Hann window."""
    w = get_window("hann", window, fftbins=True)
    w.setflags(write=False)
    return w


def _check_geometry(window: int, hop: int) -> None:
    if hop <= 0 or window < hop:
        raise DomainError(f"need window >= hop > 0, got window={window} hop={hop}")


def _padding(window: int, hop: int) -> tuple[int, int]:
    left = (window - hop) // 2
    return left, window - hop - left


def _bin_weights(window: int) -> np.ndarray:
    """Multiplicity of each one-sided bin in the full spectrum."""
    weights = np.full(window // 2 + 1, 2.0)
    weights[0] = 1.0
    if window % 2 == 0:
        weights[-1] = 1.0
    return weights


def stft(waveform: np.ndarray, window: int, hop: int) -> np.ndarray:
    """
    Complex one-sided STFT of a centred, zero-padded waveform.

    Args:
        waveform: Real samples
        window: Window length in samples
        hop: Hop length in samples

    Returns:
        Complex array of shape (len // hop, window // 2 + 1)
    """
    _check_geometry(window, hop)
    waveform = np.asarray(waveform, dtype=np.float64)
    if waveform.ndim != 1:
        raise DimensionError("waveform must be one-dimensional")
    if waveform.size < window:
        raise DomainError(f"waveform of {waveform.size} samples is shorter than one window ({window})")
    return _stft_centred(waveform, window, hop)


def _stft_centred(waveform: np.ndarray, window: int, hop: int) -> np.ndarray:
    left, right = _padding(window, hop)
    padded = np.pad(waveform, (left, right))
    num_frames = waveform.size // hop
    frames = sliding_window_view(padded, window)[::hop][:num_frames]
    w = hann(window)
    return fft.rfft(frames * w, axis=-1) / (w.sum() / 2.0)


def stft_mag(waveform: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Hann-windowed magnitudes with window/2 bins (the Nyquist bin is dropped)."""
    return np.abs(stft(waveform, window, hop))[:, : window // 2]


def analysis_frames(waveform: np.ndarray, geometry: FrameGeometry) -> np.ndarray:
    """The lowest `n_bins` magnitude bins of :func:`stft_mag`."""
    return stft_mag(waveform, geometry.window, geometry.hop)[:, : geometry.n_bins]


def istft(spectrum: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Least-squares overlap-add inverse of :func:`stft`."""
    _check_geometry(window, hop)
    w = hann(window)
    num_frames = spectrum.shape[0]
    left, right = _padding(window, hop)
    length = num_frames * hop
    total = length + left + right
    frames = fft.irfft(spectrum * (w.sum() / 2.0), n=window, axis=-1) * w
    num = np.zeros(total)
    den = np.zeros(total)
    for t in range(num_frames):
        start = t * hop
        num[start : start + window] += frames[t]
        den[start : start + window] += w * w
    out = np.where(den > TINY, num / np.maximum(den, TINY), 0.0)
    return out[left : left + length]


def _full_magnitude(frames: np.ndarray, window: int) -> np.ndarray:
    """Zero-fill kept bins up to the full one-sided spectrum."""
    frames = np.asarray(frames, dtype=np.float64)
    full = np.zeros((frames.shape[0], window // 2 + 1))
    full[:, : frames.shape[1]] = frames
    return full


def _weighted_error(estimate: np.ndarray, target: np.ndarray, weights: np.ndarray) -> float:
    norm = np.sqrt(np.sum(weights * target**2))
    if norm == 0.0:
        return 0.0 if not np.any(estimate) else float("inf")
    return float(np.sqrt(np.sum(weights * (estimate - target) ** 2)) / norm)


def spectral_error(waveform: np.ndarray, frames: np.ndarray, geometry: FrameGeometry) -> float:
    """Relative magnitude error ||(|STFT(x)| - frames)|| / ||frames|| over the full spectrum."""
    target = _full_magnitude(frames, geometry.window)
    estimate = np.abs(_stft_centred(np.asarray(waveform, dtype=np.float64), geometry.window, geometry.hop))
    if estimate.shape != target.shape:
        raise DimensionError(f"waveform gives {estimate.shape[0]} frames, expected {target.shape[0]}")
    return _weighted_error(estimate, target, _bin_weights(geometry.window))


def griffin_lim_trace(
    frames: np.ndarray,
    geometry: FrameGeometry,
    iterations: int,
    rng: RngStream,
) -> tuple[np.ndarray, list[float]]:
    """
    Griffin-Lim phase recovery, also returning the error after each iteration.

    Args:
        frames: Non-negative magnitudes, shape (T, F) with F <= window / 2
        geometry: Frame geometry the magnitudes were computed with
        iterations: Number of projection rounds
        rng: Stream for the random initial phase

    Returns:
        (waveform of T * hop samples, relative spectral error per iteration)
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise DimensionError("frames must be a T x F matrix")
    if np.any(frames < 0):
        raise DomainError("frames must be non-negative")
    window, hop = geometry.window, geometry.hop
    target = _full_magnitude(frames, window)
    weights = _bin_weights(window)
    angles = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, target.shape))
    errors: list[float] = []
    for _ in range(iterations):
        waveform = istft(target * angles, window, hop)
        rebuilt = _stft_centred(waveform, window, hop)
        magnitude = np.abs(rebuilt)
        errors.append(_weighted_error(magnitude, target, weights))
        angles = np.where(magnitude > TINY, rebuilt / np.maximum(magnitude, TINY), 1.0)
    return istft(target * angles, window, hop), errors


def griffin_lim(
    frames: np.ndarray,
    geometry: FrameGeometry,
    iterations: int = 32,
    rng: RngStream | None = None,
) -> np.ndarray:
    """Waveform whose magnitude STFT approximates `frames`."""
    waveform, _ = griffin_lim_trace(frames, geometry, iterations, rng or RngStream(0))
    return waveform
