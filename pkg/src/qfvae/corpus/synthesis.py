"""Harmonic-stack synthesis of utterances with controllable prosody."""

import logging
from functools import lru_cache

import numpy as np

from qfvae.core.constants import (
    AMPLITUDE_SCALE,
    HARMONIC_COUNT,
    TIMBRE_MAX,
    TIMBRE_MIN,
    TIMBRE_SEED,
)
from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.corpus.models import CorpusSpec, TokenTruth, Utterance
from qfvae.metrics.pitch import yin_f0
from qfvae.metrics.spectral import FrameGeometry, analysis_frames
from qfvae.numerics.rng import RngStream

logger = logging.getLogger(__name__)


@lru_cache(maxsize=256)
def timbre_profile(token: int) -> np.ndarray:
    """Harmonic amplitudes of a token: fundamental at 1, overtones in [0.1, 0.8]."""
    stream = RngStream(TIMBRE_SEED).split(token)
    profile = np.ones(HARMONIC_COUNT)
    profile[1:] = stream.uniform(TIMBRE_MIN, TIMBRE_MAX, HARMONIC_COUNT - 1)
    profile.setflags(write=False)
    return profile


def f0_contour(
    durations: np.ndarray, f0: np.ndarray, hop: int, glide: int
) -> np.ndarray:
    """Per-sample F0: constant inside tokens, linear across a `glide`-sample span at each boundary."""
    bounds = np.concatenate([[0], np.cumsum(durations)]) * hop
    length = int(bounds[-1])
    if glide <= 0 or f0.size == 1:
        return np.repeat(f0, np.asarray(durations) * hop).astype(np.float64)
    half = glide / 2.0
    knots_x: list[float] = []
    knots_y: list[float] = []
    for n in range(f0.size):
        start = bounds[n] + (half if n > 0 else 0.0)
        end = bounds[n + 1] - (half if n < f0.size - 1 else 0.0)
        knots_x += [start, end]
        knots_y += [f0[n], f0[n]]
    return np.interp(np.arange(length) + 0.5, knots_x, knots_y)


def synthesize(
    tokens: np.ndarray,
    durations: np.ndarray,
    f0: np.ndarray,
    energy: np.ndarray,
    geometry: FrameGeometry,
    glide_ms: float = 2.5,
) -> np.ndarray:
    """
    Render a harmonic stack for a token sequence.

    Args:
        tokens: Token ids, shape (N,)
        durations: Frames per token, shape (N,)
        f0: Fundamental per token in Hz, shape (N,)
        energy: Amplitude multiplier per token, shape (N,)
        geometry: Frame geometry; the waveform has sum(durations) * hop samples
        glide_ms: Width of the F0 transition at token boundaries

    Returns:
        Waveform samples
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    durations = np.asarray(durations, dtype=np.int64)
    f0 = np.asarray(f0, dtype=np.float64)
    energy = np.asarray(energy, dtype=np.float64)
    if not tokens.size == durations.size == f0.size == energy.size:
        raise DimensionError("tokens, durations, f0 and energy must have equal lengths")
    if tokens.size == 0 or np.any(durations < 1):
        raise DomainError("need at least one token and positive durations")

    counts = durations * geometry.hop
    glide = int(round(geometry.sample_rate * glide_ms / 1000.0))
    contour = f0_contour(durations, f0, geometry.hop, glide)
    phase = 2.0 * np.pi * np.cumsum(contour) / geometry.sample_rate
    gain = AMPLITUDE_SCALE * np.repeat(energy, counts)
    profiles = np.repeat(np.stack([timbre_profile(int(k)) for k in tokens]), counts, axis=0)

    waveform = np.zeros(contour.size)
    for h in range(1, HARMONIC_COUNT + 1):
        audible = h * contour < geometry.sample_rate / 2
        waveform += audible * profiles[:, h - 1] * np.sin(h * phase)
    return gain * waveform


def gen_utterance(rng: RngStream, spec: CorpusSpec, utt_id: str = "utt00000") -> Utterance:
    """
    Draw one utterance from the corpus ranges.

    Args:
        rng: Stream the prosody is drawn from
        spec: Corpus ranges and frame geometry
        utt_id: Identifier stored with the utterance

    Returns:
        Utterance with frames computed from its waveform
    """
    num_tokens = int(rng.integers(spec.min_tokens, spec.max_tokens + 1))
    tokens = rng.integers(0, spec.vocab_size, num_tokens).astype(np.int64)
    durations = rng.integers(spec.min_duration, spec.max_duration + 1, num_tokens).astype(np.int64)
    f0 = rng.uniform(spec.f0_min, spec.f0_max, num_tokens)
    energy = rng.uniform(spec.energy_min, spec.energy_max, num_tokens)
    waveform = synthesize(tokens, durations, f0, energy, spec.geometry, spec.f0_glide_ms)
    return Utterance(
        utt_id=utt_id,
        tokens=tokens,
        frames=analysis_frames(waveform, spec.geometry),
        waveform=waveform,
        truth=TokenTruth(durations=durations, f0=f0, energy=energy),
    )


def generate_corpus(spec: CorpusSpec, prefix: str = "utt") -> list[Utterance]:
    """Generate `spec.count` utterances, each from its own split stream."""
    root = RngStream(spec.seed)
    utterances = [gen_utterance(root.split(i), spec, f"{prefix}{i:05d}") for i in range(spec.count)]
    logger.info("Generated %d utterances (%d frames)", len(utterances), sum(u.num_frames for u in utterances))
    return utterances


def probe_token_f0(
    utterance: Utterance,
    geometry: FrameGeometry,
    frame: int,
    f0_min: float,
    f0_max: float,
    threshold: float = 0.15,
) -> np.ndarray:
    """
    Mean YIN F0 of each token, measured on the token's own waveform segment.

    Returns NaN for tokens with no voiced frame.
    """
    bounds = utterance.truth.boundaries() * geometry.hop
    out = np.full(utterance.num_tokens, np.nan)
    for n in range(utterance.num_tokens):
        segment = utterance.waveform[bounds[n] : bounds[n + 1]]
        track = yin_f0(segment, geometry.sample_rate, frame, geometry.hop, f0_min, f0_max, threshold)
        if track.voiced.any():
            out[n] = track.f0[track.voiced].mean()
    return out
