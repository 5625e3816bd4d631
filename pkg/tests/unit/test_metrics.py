"""Tests for spectral analysis, pitch tracking, cepstral distance and prosody statistics."""

import numpy as np
import pytest

from qfvae.core.constants import MEL_BANDS
from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.metrics.cepstral import MCD_SCALE, mcd, mel_filterbank, mfcc
from qfvae.metrics.pitch import PitchTrack, ffe, yin_f0
from qfvae.metrics.prosody import ProsodyMeasurements, diversity_stats, phoneme_prosody, token_of_frame
from qfvae.metrics.spectral import (
    analysis_frames,
    griffin_lim,
    griffin_lim_trace,
    istft,
    spectral_error,
    stft,
    stft_mag,
)
from qfvae.numerics.rng import RngStream

SAMPLE_RATE = 16000


def sine(freq: float, num_samples: int, amplitude: float = 1.0) -> np.ndarray:
    t = np.arange(num_samples) / SAMPLE_RATE
    return amplitude * np.sin(2.0 * np.pi * freq * t)


class TestSpectral:
    """Tests for the STFT front end and Griffin-Lim."""

    def test_frame_count_and_bins(self, geometry):
        frames = analysis_frames(sine(400.0, 40 * geometry.hop), geometry)
        assert frames.shape == (40, geometry.n_bins)

    def test_bin_centre_sine_peaks_at_amplitude(self, geometry):
        # 400 Hz is bin 20 at 20 Hz spacing
        mags = stft_mag(sine(400.0, 40 * geometry.hop, amplitude=0.7), geometry.window, geometry.hop)
        assert np.allclose(mags[5:-5, 20], 0.7, atol=1e-6)
        assert mags.shape[1] == geometry.window // 2

    def test_istft_inverts_stft(self, geometry):
        signal = RngStream(0).normal(30 * geometry.hop)
        rebuilt = istft(stft(signal, geometry.window, geometry.hop), geometry.window, geometry.hop)
        assert np.allclose(rebuilt, signal, atol=1e-9)

    def test_short_waveform_rejected(self, geometry):
        with pytest.raises(DomainError):
            stft(np.zeros(geometry.window - 1), geometry.window, geometry.hop)

    def test_spectral_error_of_own_frames_is_small(self, geometry):
        signal = sine(200.0, 30 * geometry.hop)
        frames = analysis_frames(signal, geometry)
        assert spectral_error(signal, frames, geometry) < 1e-2

    def test_griffin_lim_error_non_increasing(self, geometry):
        signal = sine(180.0, 30 * geometry.hop) + 0.5 * sine(360.0, 30 * geometry.hop)
        frames = analysis_frames(signal, geometry)
        waveform, errors = griffin_lim_trace(frames, geometry, 16, RngStream(3))
        assert waveform.size == signal.size
        assert all(b <= a + 1e-9 for a, b in zip(errors, errors[1:]))
        assert errors[-1] < errors[0]

    def test_griffin_lim_is_seeded(self, geometry):
        frames = analysis_frames(sine(250.0, 20 * geometry.hop), geometry)
        a = griffin_lim(frames, geometry, 4, RngStream(9))
        b = griffin_lim(frames, geometry, 4, RngStream(9))
        assert np.array_equal(a, b)

    def test_griffin_lim_rejects_negative(self, geometry):
        with pytest.raises(DomainError):
            griffin_lim(-np.ones((10, geometry.n_bins)), geometry, 2)


class TestPitch:
    """Tests for YIN and F0 frame error."""

    def test_recovers_pure_tone(self):
        track = yin_f0(sine(220.0, 8000), SAMPLE_RATE, 480, 200, 100.0, 400.0)
        assert track.voiced.all()
        assert np.all(np.abs(track.f0 - 220.0) < 1.0)

    def test_silence_is_unvoiced(self):
        track = yin_f0(np.zeros(4000), SAMPLE_RATE, 480, 200, 100.0, 400.0)
        assert len(track) == 20
        assert not track.voiced.any()
        assert np.all(track.f0 == 0.0)

    def test_voiced_f0_inside_search_range(self):
        signal = sine(150.0, 6000) + 0.3 * RngStream(1).normal(6000)
        track = yin_f0(signal, SAMPLE_RATE, 480, 200, 100.0, 400.0)
        voiced = track.f0[track.voiced]
        assert np.all((voiced >= 100.0) & (voiced <= 400.0))

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            yin_f0(np.zeros(4000), SAMPLE_RATE, 480, 200, 400.0, 100.0)
        with pytest.raises(DomainError):
            yin_f0(np.zeros(100), SAMPLE_RATE, 480, 200, 100.0, 400.0)

    def test_ffe_identical_is_zero(self):
        track = PitchTrack(np.array([200.0, 0.0, 180.0]), np.array([True, False, True]))
        assert ffe(track, track) == 0.0

    def test_ffe_gross_error(self):
        reference = PitchTrack(np.full(5, 200.0), np.ones(5, dtype=bool))
        estimate = PitchTrack(np.full(5, 250.0), np.ones(5, dtype=bool))
        assert ffe(reference, estimate) == 1.0
        close = PitchTrack(np.full(5, 230.0), np.ones(5, dtype=bool))
        assert ffe(reference, close) == 0.0

    def test_ffe_voicing_mismatch(self):
        reference = PitchTrack(np.full(4, 200.0), np.ones(4, dtype=bool))
        estimate = PitchTrack(np.array([200.0, 0.0, 200.0, 0.0]), np.array([True, False, True, False]))
        assert ffe(reference, estimate) == 0.5

    def test_ffe_length_mismatch(self):
        with pytest.raises(DimensionError):
            ffe(PitchTrack.unvoiced(3), PitchTrack.unvoiced(4))
        with pytest.raises(DomainError):
            ffe(PitchTrack.unvoiced(0), PitchTrack.unvoiced(0))


class TestCepstral:
    """Tests for MFCC and MCD."""

    def test_constant_spectrum_only_c0(self):
        coeffs = mfcc(np.full((3, 64), 0.5), 20.0)
        assert coeffs.shape == (3, 13)
        assert np.all(np.abs(coeffs[:, 1:]) < 1e-8)

    def test_doubling_magnitudes_shifts_only_c0(self):
        frames = RngStream(3).uniform(0.1, 1.0, (5, 64))
        base = mfcc(frames, 20.0)
        doubled = mfcc(2.0 * frames, 20.0)
        # ortho DCT-II of a constant log 2 offset lands entirely in c0
        assert np.allclose(doubled[:, 0] - base[:, 0], np.log(2.0) * np.sqrt(MEL_BANDS))
        assert np.allclose(doubled[:, 1:], base[:, 1:], atol=1e-10)

    def test_filterbank_rows_sum_to_one(self):
        bank = mel_filterbank(64, 20.0)
        assert np.allclose(bank.sum(axis=1), 1.0)

    def test_mcd_identical_is_zero(self):
        c = RngStream(0).normal((6, 13))
        assert mcd(c, c) == 0.0

    def test_mcd_single_difference(self):
        reference = np.zeros((4, 13))
        estimate = reference.copy()
        estimate[:, 3] = 1.0
        assert mcd(reference, estimate) == pytest.approx(MCD_SCALE * np.sqrt(2.0), abs=1e-9)

    def test_mcd_c0_excluded_by_default(self):
        reference = np.zeros((2, 13))
        estimate = reference.copy()
        estimate[:, 0] = 5.0
        assert mcd(reference, estimate) == 0.0
        assert mcd(reference, estimate, include_c0=True) > 0.0

    def test_mcd_shape_mismatch(self):
        with pytest.raises(DimensionError):
            mcd(np.zeros((2, 13)), np.zeros((3, 13)))

    def test_mfcc_rejects_negative(self):
        with pytest.raises(DomainError):
            mfcc(-np.ones((2, 8)), 20.0)


class TestProsody:
    """Tests for per-token measurements and diversity."""

    def test_token_of_frame_ties_to_first(self):
        attention = np.array([[0.5, 0.5], [0.2, 0.8]])
        assert token_of_frame(attention).tolist() == [0, 1]

    def test_phoneme_prosody(self):
        frames = np.array([[1.0, 1.0], [1.0, 1.0], [4.0, 4.0], [0.0, 0.0]])
        attention = np.array([[0.9, 0.1, 0.0], [0.8, 0.2, 0.0], [0.1, 0.9, 0.0], [0.0, 1.0, 0.0]])
        pitch = PitchTrack(np.array([200.0, 220.0, 0.0, 150.0]), np.array([True, True, False, True]))
        out = phoneme_prosody(frames, attention, pitch, hop_ms=12.5)
        assert out.duration_ms.tolist() == [25.0, 25.0, 0.0]
        # overall mean magnitude 3.0; token 0 mean 2.0, token 1 mean 4.0
        assert out.energy[0] == pytest.approx(2.0 / 3.0)
        assert out.energy[1] == pytest.approx(4.0 / 3.0)
        assert out.f0[0] == pytest.approx(210.0)
        assert out.f0[1] == pytest.approx(150.0)
        assert out.missing.tolist() == [False, False, True]
        assert out.has_f0.tolist() == [True, True, False]

    def test_phoneme_prosody_validates(self):
        with pytest.raises(DimensionError):
            phoneme_prosody(np.zeros((3, 2)), np.full((2, 2), 0.5), PitchTrack.unvoiced(3), 12.5)
        with pytest.raises(DomainError):
            phoneme_prosody(np.zeros((2, 2)), np.full((2, 2), 0.7), PitchTrack.unvoiced(2), 12.5)

    @staticmethod
    def _measure(durations: list[float], energy: list[float]) -> ProsodyMeasurements:
        n = len(durations)
        return ProsodyMeasurements(
            energy=np.array(energy),
            f0=np.full(n, 200.0),
            duration_ms=np.array(durations),
            missing=np.zeros(n, dtype=bool),
            has_f0=np.ones(n, dtype=bool),
        )

    def test_identical_samples_have_zero_diversity(self):
        sample = self._measure([25.0, 50.0], [1.0, 1.0])
        stats = diversity_stats([sample, sample, sample])
        assert stats.as_dict() == {"energy": 0.0, "f0": 0.0, "duration_ms": 0.0}

    def test_diversity_is_mean_token_std(self):
        a = self._measure([20.0, 50.0], [1.0, 2.0])
        b = self._measure([40.0, 50.0], [1.0, 1.0])
        stats = diversity_stats([a, b])
        assert stats.duration_ms == pytest.approx((10.0 + 0.0) / 2)
        assert stats.energy == pytest.approx((0.0 + 0.5) / 2)

    def test_duration_spread_of_two_samples(self):
        stats = diversity_stats([self._measure([50.0], [1.0]), self._measure([70.0], [1.0])])
        assert stats.duration_ms == pytest.approx(10.0)
        assert stats.energy == 0.0

    def test_missing_tokens_skipped(self):
        a = self._measure([20.0, 0.0], [1.0, 0.0])
        a.missing[1] = True
        b = self._measure([20.0, 30.0], [1.0, 3.0])
        stats = diversity_stats([a, b])
        # token 1 has one valid energy sample, so only token 0 contributes
        assert stats.energy == 0.0

    def test_diversity_needs_two_samples(self):
        with pytest.raises(DomainError):
            diversity_stats([self._measure([10.0], [1.0])])
