"""Data models for the synthetic prosody corpus."""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.metrics.spectral import FrameGeometry


class ProsodyRanges(BaseModel):
    """Ranges the generator draws tokens and their prosody from."""

    vocab_size: int = Field(24, ge=1, description="Token vocabulary size V")
    min_tokens: int = Field(8, ge=1)
    max_tokens: int = Field(20, ge=1)
    f0_min: float = Field(120.0, gt=0, description="Lowest token F0, Hz")
    f0_max: float = Field(300.0, gt=0, description="Highest token F0, Hz")
    min_duration: int = Field(4, ge=1, description="Shortest token, frames")
    max_duration: int = Field(14, ge=1, description="Longest token, frames")
    energy_min: float = Field(0.4, gt=0)
    energy_max: float = Field(1.6, gt=0)
    f0_glide_ms: float = Field(2.5, ge=0, description="Linear F0 transition across token boundaries")

    @model_validator(mode="after")
    def _check_ranges(self) -> "ProsodyRanges":
        for low, high in (
            ("min_tokens", "max_tokens"),
            ("f0_min", "f0_max"),
            ("min_duration", "max_duration"),
            ("energy_min", "energy_max"),
        ):
            if getattr(self, low) > getattr(self, high):
                raise DomainError(f"empty range: {low}={getattr(self, low)} > {high}={getattr(self, high)}")
        return self


class CorpusSpec(ProsodyRanges):
    """Everything needed to generate a corpus deterministically."""

    model_config = ConfigDict(frozen=True)

    count: int = Field(..., ge=0)
    seed: int = Field(..., ge=0, lt=2**64)
    geometry: FrameGeometry

    @model_validator(mode="after")
    def _check_nyquist(self) -> "CorpusSpec":
        nyquist = self.geometry.sample_rate / 2
        if self.f0_max >= nyquist / 4:
            raise DomainError(f"f0_max={self.f0_max} must be below Nyquist/4 ({nyquist / 4})")
        if self.min_tokens * self.min_duration * self.geometry.hop < self.geometry.window:
            raise DomainError("shortest possible utterance is shorter than one analysis window")
        return self


@dataclass
class TokenTruth:
    """The prosody drawn for each token."""

    durations: np.ndarray  # frames, int64
    f0: np.ndarray  # Hz
    energy: np.ndarray

    def boundaries(self) -> np.ndarray:
        """Start frame of every token plus the end frame."""
        return np.concatenate([[0], np.cumsum(self.durations)]).astype(np.int64)


@dataclass
class Utterance:
    """One corpus item: tokens, waveform, magnitude frames and ground truth."""

    utt_id: str
    tokens: np.ndarray  # int64, (N,)
    frames: np.ndarray  # (T, F)
    waveform: np.ndarray  # (T * hop,)
    truth: TokenTruth

    def __post_init__(self) -> None:
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.waveform = np.asarray(self.waveform, dtype=np.float64)
        if self.truth.durations.size != self.tokens.size:
            raise DimensionError(f"{self.utt_id}: {self.tokens.size} tokens but {self.truth.durations.size} durations")
        if int(self.truth.durations.sum()) != self.frames.shape[0]:
            raise DimensionError(f"{self.utt_id}: durations do not sum to the frame count")

    @property
    def num_tokens(self) -> int:
        return int(self.tokens.size)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    def equals(self, other: "Utterance") -> bool:
        """Bit-exact equality on every field."""
        return (
            self.utt_id == other.utt_id
            and np.array_equal(self.tokens, other.tokens)
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.waveform, other.waveform)
            and np.array_equal(self.truth.durations, other.truth.durations)
            and np.array_equal(self.truth.f0, other.truth.f0)
            and np.array_equal(self.truth.energy, other.truth.energy)
        )
