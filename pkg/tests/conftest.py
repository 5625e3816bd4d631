"""Shared fixtures: a tiny experiment configuration and corpus."""

from pathlib import Path

import pytest

from qfvae.core.config import ExperimentConfig
from qfvae.corpus.models import Utterance
from qfvae.corpus.synthesis import generate_corpus
from qfvae.metrics.spectral import FrameGeometry
from qfvae.numerics.rng import RngStream

TINY_CONFIG = {
    "experiment": {"name": "tiny", "seed": 7},
    "corpus": {
        "train_count": 6,
        "test_count": 3,
        "vocab_size": 6,
        "min_tokens": 3,
        "max_tokens": 5,
        "min_duration": 3,
        "max_duration": 5,
    },
    "signal": {"n_bins": 16, "griffin_lim_iters": 4},
    "model": {
        "latent_dim": 2,
        "global_latent_dim": 4,
        "encoding_dim": 8,
        "token_embed_dim": 4,
        "reference_dim": 6,
        "attention_dim": 6,
        "prenet_dim": 6,
        "decoder_hidden": 10,
        "codebook_size": 4,
        "max_decode_frames": 40,
    },
    "train": {"steps": 4, "batch_size": 2, "log_every": 2, "eval_every": 2, "learning_rate": 1e-2},
    "prior": {"hidden_size": 6, "epochs": 2, "batch_size": 2, "log_every": 1},
    "sampling": {"samples_per_utterance": 3, "utterances": 2},
}


def tiny_config_dict(out_dir: Path, **sections: dict) -> dict:
    """TINY_CONFIG with an output directory and per-section overrides merged in."""
    data = {name: dict(values) for name, values in TINY_CONFIG.items()}
    data["paths"] = {"out_dir": str(out_dir)}
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return data


@pytest.fixture
def tiny_config(tmp_path: Path) -> ExperimentConfig:
    """A configuration small enough to run every pipeline stage in seconds."""
    return ExperimentConfig.from_dict(tiny_config_dict(tmp_path / "out"))


@pytest.fixture
def geometry() -> FrameGeometry:
    """Default analysis geometry: 16 kHz, 12.5 ms hop, 50 ms window, 64 bins."""
    return FrameGeometry(sample_rate=16000, hop=200, window=800, n_bins=64)


@pytest.fixture
def tiny_corpus(tiny_config: ExperimentConfig) -> list[Utterance]:
    """Training utterances of the tiny configuration."""
    return generate_corpus(tiny_config.corpus_spec(tiny_config.corpus.train_count, 11), prefix="train")


@pytest.fixture
def rng() -> RngStream:
    return RngStream(1234)
