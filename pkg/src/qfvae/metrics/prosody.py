"""Per-token prosody measurements and their diversity across samples."""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.metrics.pitch import PitchTrack


@dataclass
class ProsodyMeasurements:
    """
    Relative energy, mean F0 and duration of each token.

    `missing` marks tokens that received no frames; their energy and F0 are 0.
    `has_f0` marks tokens with at least one voiced frame.
    """

    energy: np.ndarray
    f0: np.ndarray
    duration_ms: np.ndarray
    missing: np.ndarray
    has_f0: np.ndarray

    @property
    def num_tokens(self) -> int:
        return int(self.energy.size)


@dataclass
class DiversityStats:
    """Mean over tokens of the per-token standard deviation across samples."""

    energy: float
    f0: float
    duration_ms: float

    def as_dict(self) -> dict[str, float]:
        return {"energy": self.energy, "f0": self.f0, "duration_ms": self.duration_ms}


def token_of_frame(attention: np.ndarray) -> np.ndarray:
    """Argmax token per frame, ties to the smallest index."""
    return np.argmax(attention, axis=1)


def phoneme_prosody(
    frames: np.ndarray,
    attention: np.ndarray,
    pitch: PitchTrack,
    hop_ms: float,
) -> ProsodyMeasurements:
    """
    Measure each token's prosody from decoder output.

    Args:
        frames: Magnitude frames, shape (T, F)
        attention: Decoder attention, shape (T, N)
        pitch: Pitch track with T frames
        hop_ms: Frame hop in milliseconds

    Returns:
        ProsodyMeasurements for the N tokens
    """
    frames = np.asarray(frames, dtype=np.float64)
    attention = np.asarray(attention, dtype=np.float64)
    if attention.ndim != 2 or frames.ndim != 2:
        raise DimensionError("frames and attention must be matrices")
    num_frames, num_tokens = attention.shape
    if frames.shape[0] != num_frames or len(pitch) != num_frames:
        raise DimensionError(
            f"frame counts differ: frames {frames.shape[0]}, attention {num_frames}, pitch {len(pitch)}"
        )
    if num_frames and not np.allclose(attention.sum(axis=1), 1.0, atol=1e-6):
        raise DomainError("attention rows must sum to 1")

    owner = token_of_frame(attention)
    magnitude = frames.sum(axis=1)
    overall = float(magnitude.mean()) if num_frames else 0.0
    counts = np.bincount(owner, minlength=num_tokens).astype(np.float64)

    energy = np.zeros(num_tokens)
    f0 = np.zeros(num_tokens)
    has_f0 = np.zeros(num_tokens, dtype=bool)
    for n in range(num_tokens):
        mine = owner == n
        if not mine.any():
            continue
        if overall > 0:
            energy[n] = magnitude[mine].mean() / overall
        voiced = mine & pitch.voiced
        if voiced.any():
            f0[n] = pitch.f0[voiced].mean()
            has_f0[n] = True
    return ProsodyMeasurements(
        energy=energy,
        f0=f0,
        duration_ms=counts * hop_ms,
        missing=counts == 0,
        has_f0=has_f0,
    )


def _mean_token_std(values: np.ndarray, valid: np.ndarray) -> float:
    """Population std per column over valid rows; mean over columns with >= 2 valid rows."""
    stds = []
    for n in range(values.shape[1]):
        column = values[valid[:, n], n]
        if column.size >= 2:
            stds.append(float(np.std(column)))
    return float(np.mean(stds)) if stds else 0.0


def diversity_stats(samples: Sequence[ProsodyMeasurements]) -> DiversityStats:
    """
    Average per-token standard deviation of each attribute across samples.

    Absent values (tokens without frames, tokens without voiced frames for F0)
    are skipped; a token contributes to an attribute only with two or more
    valid samples.

    Args:
        samples: Measurements of the same token sequence, at least two

    Returns:
        DiversityStats
    """
    if len(samples) < 2:
        raise DomainError("diversity needs at least two samples")
    num_tokens = samples[0].num_tokens
    if any(s.num_tokens != num_tokens for s in samples):
        raise DimensionError("samples cover different token counts")
    energy = np.stack([s.energy for s in samples])
    f0 = np.stack([s.f0 for s in samples])
    duration = np.stack([s.duration_ms for s in samples])
    present = ~np.stack([s.missing for s in samples])
    voiced = np.stack([s.has_f0 for s in samples])
    return DiversityStats(
        energy=_mean_token_std(energy, present),
        f0=_mean_token_std(f0, voiced),
        duration_ms=_mean_token_std(duration, np.ones_like(present)),
    )
