"""YIN pitch tracking and F0 frame error."""

from dataclasses import dataclass

import numpy as np
from scipy import fft

from qfvae.core.constants import FFE_PITCH_TOLERANCE
from qfvae.core.exceptions import DimensionError, DomainError


@dataclass
class PitchTrack:
    """Per-frame F0 in Hz and voicing flags; f0 is 0 on unvoiced frames."""

    f0: np.ndarray
    voiced: np.ndarray

    def __post_init__(self) -> None:
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.voiced = np.asarray(self.voiced, dtype=bool)
        if self.f0.shape != self.voiced.shape or self.f0.ndim != 1:
            raise DimensionError("f0 and voiced must be vectors of equal length")

    def __len__(self) -> int:
        return int(self.f0.size)

    @classmethod
    def unvoiced(cls, num_frames: int) -> "PitchTrack":
        return cls(np.zeros(num_frames), np.zeros(num_frames, dtype=bool))

    def segment(self, start: int, end: int) -> "PitchTrack":
        return PitchTrack(self.f0[start:end], self.voiced[start:end])


def _frame_starts(length: int, frame: int, hop: int) -> np.ndarray:
    """Start of the frame centred on each hop block, shifted inside the signal at the edges."""
    num_frames = length // hop
    centres = np.arange(num_frames) * hop + hop // 2
    return np.clip(centres - frame // 2, 0, length - frame)


def difference_function(frames: np.ndarray, tau_max: int) -> np.ndarray:
    """
    YIN difference d(tau) = sum_j (x_j - x_{j+tau})^2 for every row of `frames`.

    The integration window is frame - tau_max samples. Cross terms come from
    one FFT correlation per frame.

    Args:
        frames: Array of shape (T, frame)
        tau_max: Largest lag

    Returns:
        Array of shape (T, tau_max + 1)
    """
    num_frames, frame = frames.shape
    width = frame - tau_max
    head = frames[:, :width]
    n = fft.next_fast_len(frame + width)
    corr = fft.irfft(
        fft.rfft(frames, n, axis=-1) * np.conj(fft.rfft(head, n, axis=-1)), n, axis=-1
    )[:, : tau_max + 1]
    squares = np.concatenate([np.zeros((num_frames, 1)), np.cumsum(frames * frames, axis=-1)], axis=-1)
    taus = np.arange(tau_max + 1)
    energy_head = squares[:, width][:, None]
    energy_lag = squares[:, taus + width] - squares[:, taus]
    return np.maximum(energy_head + energy_lag - 2.0 * corr, 0.0)


def cumulative_mean_normalized(diff: np.ndarray) -> np.ndarray:
    """d'(0) = 1, d'(tau) = d(tau) * tau / sum_{j<=tau} d(j); 1 where the sum is zero."""
    out = np.ones_like(diff)
    running = np.cumsum(diff[:, 1:], axis=-1)
    taus = np.arange(1, diff.shape[1])
    safe = running > 0
    out[:, 1:] = np.where(safe, diff[:, 1:] * taus / np.where(safe, running, 1.0), 1.0)
    return out


def _parabolic_offset(left: float, centre: float, right: float) -> float:
    curvature = left - 2.0 * centre + right
    if curvature <= 0:
        return 0.0
    return float(np.clip(0.5 * (left - right) / curvature, -0.5, 0.5))


def yin_f0(
    waveform: np.ndarray,
    sample_rate: int,
    frame: int,
    hop: int,
    f0_min: float,
    f0_max: float,
    threshold: float = 0.15,
) -> PitchTrack:
    """
    Track F0 with YIN, one estimate per hop block.

    Args:
        waveform: Real samples
        sample_rate: Samples per second
        frame: Analysis frame length in samples
        hop: Hop length in samples
        f0_min: Lowest F0 searched, Hz
        f0_max: Highest F0 searched, Hz
        threshold: Absolute threshold on the normalized difference

    Returns:
        PitchTrack with len(waveform) // hop frames
    """
    if not 0 < f0_min < f0_max < sample_rate / 2:
        raise DomainError(f"invalid F0 search range [{f0_min}, {f0_max}] Hz")
    if threshold <= 0:
        raise DomainError("threshold must be positive")
    waveform = np.asarray(waveform, dtype=np.float64)
    if frame > waveform.size:
        raise DomainError(f"frame of {frame} samples is longer than the waveform ({waveform.size})")
    tau_min = max(1, int(np.floor(sample_rate / f0_max)))
    tau_max = int(np.ceil(sample_rate / f0_min))
    if tau_max >= frame:
        raise DomainError(f"frame of {frame} samples cannot hold a lag of {tau_max}")

    starts = _frame_starts(waveform.size, frame, hop)
    frames = waveform[starts[:, None] + np.arange(frame)]
    diff = difference_function(frames, tau_max)
    cmnd = cumulative_mean_normalized(diff)

    f0 = np.zeros(len(starts))
    voiced = np.zeros(len(starts), dtype=bool)
    for t in range(len(starts)):
        below = np.nonzero(cmnd[t, tau_min : tau_max + 1] < threshold)[0]
        if below.size == 0:
            continue
        tau = tau_min + int(below[0])
        while tau < tau_max and cmnd[t, tau + 1] < cmnd[t, tau]:
            tau += 1
        shift = 0.0
        if 0 < tau < tau_max:
            shift = _parabolic_offset(diff[t, tau - 1], diff[t, tau], diff[t, tau + 1])
        f0[t] = np.clip(sample_rate / (tau + shift), f0_min, f0_max)
        voiced[t] = True
    return PitchTrack(f0, voiced)


def ffe(reference: PitchTrack, estimate: PitchTrack) -> float:
    """
    F0 frame error: share of frames with a voicing mismatch or a gross pitch error.

    Args:
        reference: Reference track
        estimate: Estimated track of the same length

    Returns:
        Error rate in [0, 1]
    """
    if len(reference) != len(estimate):
        raise DimensionError(f"track lengths differ: {len(reference)} != {len(estimate)}")
    if len(reference) == 0:
        raise DomainError("cannot compute FFE of empty tracks")
    voicing = reference.voiced != estimate.voiced
    both = reference.voiced & estimate.voiced
    gross = both & (np.abs(estimate.f0 - reference.f0) > FFE_PITCH_TOLERANCE * reference.f0)
    return float(np.count_nonzero(voicing | gross)) / len(reference)
