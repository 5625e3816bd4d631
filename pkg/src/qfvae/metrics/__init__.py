"""Objective evaluation: spectra, pitch, cepstra and prosody statistics."""

from qfvae.metrics.cepstral import mcd, mfcc
from qfvae.metrics.pitch import PitchTrack, ffe, yin_f0
from qfvae.metrics.prosody import DiversityStats, ProsodyMeasurements, diversity_stats, phoneme_prosody
from qfvae.metrics.spectral import FrameGeometry, analysis_frames, griffin_lim, stft_mag

__all__ = [
    "DiversityStats",
    "FrameGeometry",
    "PitchTrack",
    "ProsodyMeasurements",
    "analysis_frames",
    "diversity_stats",
    "ffe",
    "griffin_lim",
    "mcd",
    "mfcc",
    "phoneme_prosody",
    "stft_mag",
    "yin_f0",
]
