"""Tests for corpus synthesis, storage and splitting."""

import numpy as np
import pytest

from qfvae.core.constants import CORPUS_MAGIC, CORPUS_VERSION
from qfvae.core.exceptions import DomainError, FormatError, StorageError, VersionError
from qfvae.corpus.models import CorpusSpec
from qfvae.corpus.storage import read_corpus, split_corpus, write_corpus
from qfvae.corpus.synthesis import (
    gen_utterance,
    generate_corpus,
    probe_token_f0,
    synthesize,
    timbre_profile,
)
from qfvae.metrics.spectral import analysis_frames
from qfvae.numerics.rng import RngStream
from qfvae.utils.blockfile import Record, write_blockfile


@pytest.fixture
def spec(geometry) -> CorpusSpec:
    return CorpusSpec(count=6, seed=3, geometry=geometry)


class TestSynthesis:
    """Tests for waveform generation."""

    def test_utterance_shapes(self, spec, geometry):
        utt = gen_utterance(RngStream(0), spec)
        assert spec.min_tokens <= utt.num_tokens <= spec.max_tokens
        assert utt.num_frames == int(utt.truth.durations.sum())
        assert utt.waveform.size == utt.num_frames * geometry.hop
        assert utt.frames.shape == (utt.num_frames, geometry.n_bins)
        assert np.all((utt.truth.f0 >= spec.f0_min) & (utt.truth.f0 <= spec.f0_max))
        assert np.all((utt.tokens >= 0) & (utt.tokens < spec.vocab_size))

    def test_corpus_is_deterministic(self, spec):
        a = generate_corpus(spec)
        b = generate_corpus(spec)
        assert all(x.equals(y) for x, y in zip(a, b))
        assert [u.utt_id for u in a] == [f"utt{i:05d}" for i in range(spec.count)]

    def test_seed_changes_corpus(self, spec, geometry):
        other = CorpusSpec(count=6, seed=4, geometry=geometry)
        assert not generate_corpus(spec)[0].equals(generate_corpus(other)[0])

    def test_energy_scales_magnitude(self, geometry):
        tokens = np.array([2, 2])
        durations = np.array([10, 10])
        waveform = synthesize(tokens, durations, np.array([200.0, 200.0]), np.array([1.0, 2.0]), geometry)
        frames = analysis_frames(waveform, geometry)
        first = frames[2:8].sum(axis=1).mean()
        second = frames[12:18].sum(axis=1).mean()
        assert second / first == pytest.approx(2.0, rel=0.05)

    def test_timbre_is_fixed_per_token(self):
        assert np.array_equal(timbre_profile(3), timbre_profile(3))
        assert not np.array_equal(timbre_profile(3), timbre_profile(4))
        assert timbre_profile(5)[0] == 1.0

    def test_rejects_inconsistent_inputs(self, geometry):
        with pytest.raises(DomainError):
            synthesize(np.array([1]), np.array([0]), np.array([200.0]), np.array([1.0]), geometry)

    def test_yin_recovers_token_f0(self, spec, geometry):
        hits = total = 0
        for utt in generate_corpus(spec):
            measured = probe_token_f0(utt, geometry, 480, 100.0, 400.0)
            hits += int(np.sum(np.abs(measured - utt.truth.f0) < 3.0))
            total += utt.num_tokens
        assert hits >= 0.95 * total


class TestSpec:
    """Tests for generation spec validation."""

    def test_nyquist_bound(self, geometry):
        with pytest.raises(DomainError):
            CorpusSpec(count=1, seed=0, geometry=geometry, f0_max=2000.0)

    def test_empty_range(self, geometry):
        with pytest.raises(DomainError):
            CorpusSpec(count=1, seed=0, geometry=geometry, min_tokens=5, max_tokens=4)


class TestStorage:
    """Tests for corpus files."""

    def test_round_trip(self, spec, tmp_path):
        utterances = generate_corpus(spec)
        path = tmp_path / "train.qfvc"
        write_corpus(path, utterances)
        loaded = read_corpus(path)
        assert len(loaded) == len(utterances)
        assert all(a.equals(b) for a, b in zip(utterances, loaded))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.qfvc"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(FormatError):
            read_corpus(path)

    def test_wrong_version(self, tmp_path):
        path = tmp_path / "old.qfvc"
        write_blockfile(path, CORPUS_MAGIC, CORPUS_VERSION + 1, {}, [])
        with pytest.raises(VersionError):
            read_corpus(path)

    def test_truncated_file_names_record(self, spec, tmp_path):
        path = tmp_path / "cut.qfvc"
        write_corpus(path, generate_corpus(spec)[:2])
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with pytest.raises(FormatError) as info:
            read_corpus(path)
        assert info.value.record == 1

    def test_missing_fields(self, tmp_path):
        path = tmp_path / "partial.qfvc"
        write_blockfile(path, CORPUS_MAGIC, CORPUS_VERSION, {}, [Record("u0", {"tokens": np.arange(3)})])
        with pytest.raises(FormatError) as info:
            read_corpus(path)
        assert info.value.record_id == "u0"

    def test_missing_file(self, tmp_path):
        with pytest.raises(StorageError):
            read_corpus(tmp_path / "absent.qfvc")


class TestSplit:
    """Tests for train/test partitioning."""

    def test_partition_keeps_order(self, spec):
        utterances = generate_corpus(spec)
        train, test = split_corpus(utterances, 0.5, seed=1)
        assert len(train) == 3 and len(test) == 3
        ids = [u.utt_id for u in utterances]
        assert sorted(u.utt_id for u in train + test) == ids
        assert [u.utt_id for u in train] == sorted(u.utt_id for u in train)

    def test_split_is_seeded(self, spec):
        utterances = generate_corpus(spec)
        a, _ = split_corpus(utterances, 0.5, seed=2)
        b, _ = split_corpus(utterances, 0.5, seed=2)
        assert [u.utt_id for u in a] == [u.utt_id for u in b]

    def test_rejects_bad_fraction(self, spec):
        with pytest.raises(DomainError):
            split_corpus(generate_corpus(spec), 1.0, seed=0)
