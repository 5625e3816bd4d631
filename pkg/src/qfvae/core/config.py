"""Configuration management for qfvae."""

import json
import sys
from enum import Enum
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport
    import tomli as tomllib

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from qfvae.core.constants import (
    CONFIG_DIGEST_LENGTH,
    CORPUS_DIR,
    PRIOR_AR_CONTINUOUS,
    PRIOR_AR_DISCRETE,
    PRIOR_INDEPENDENT,
    RUNS_DIR,
)
from qfvae.core.exceptions import ConfigError
from qfvae.corpus.models import CorpusSpec, ProsodyRanges
from qfvae.metrics.spectral import FrameGeometry
from qfvae.utils.hashing import hash_content


class Section(BaseModel):
    """Base for config sections: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")


class LatentMode(str, Enum):
    """How many prosody latents the encoder produces."""

    FINE = "fine"  # one latent per token
    GLOBAL = "global"  # one latent per utterance


class PriorKind(str, Enum):
    """Prior used when drawing latents without a reference."""

    INDEPENDENT = PRIOR_INDEPENDENT
    AR_CONTINUOUS = PRIOR_AR_CONTINUOUS
    AR_DISCRETE = PRIOR_AR_DISCRETE


class ExperimentSection(Section):
    """Run identity."""

    name: str = Field("qfvae-k32", description="Run name, used as the run directory")
    seed: int = Field(1234, ge=0, lt=2**64)


class CorpusConfig(ProsodyRanges):
    """Synthetic corpus configuration."""

    model_config = ConfigDict(extra="forbid")

    train_count: int = Field(64, ge=1)
    test_count: int = Field(16, ge=1)


class SignalConfig(Section):
    """Waveform and frame analysis settings."""

    sample_rate: int = Field(16000, gt=0)
    hop_ms: float = Field(12.5, gt=0)
    window_ms: float = Field(50.0, gt=0)
    n_bins: int = Field(64, ge=1)
    griffin_lim_iters: int = Field(32, ge=1)
    yin_frame_ms: float = Field(30.0, gt=0)
    yin_threshold: float = Field(0.15, gt=0)
    yin_f0_floor: float = Field(100.0, gt=0)
    yin_f0_ceil: float = Field(400.0, gt=0)

    @model_validator(mode="after")
    def _check_geometry(self) -> "SignalConfig":
        if self.window_ms < self.hop_ms:
            raise ValueError("signal.window_ms must be >= signal.hop_ms")
        if self.yin_f0_floor >= self.yin_f0_ceil:
            raise ValueError("signal.yin_f0_floor must be below signal.yin_f0_ceil")
        if self.yin_f0_ceil >= self.sample_rate / 2:
            raise ValueError("signal.yin_f0_ceil must be below Nyquist")
        geometry = self.geometry()
        if self.n_bins > geometry.window // 2:
            raise ValueError("signal.n_bins exceeds window/2")
        return self

    def geometry(self) -> FrameGeometry:
        """Frame geometry in samples."""
        return FrameGeometry(
            sample_rate=self.sample_rate,
            hop=round(self.sample_rate * self.hop_ms / 1000),
            window=round(self.sample_rate * self.window_ms / 1000),
            n_bins=self.n_bins,
        )

    def yin_frame(self) -> int:
        """YIN analysis frame length in samples."""
        return round(self.sample_rate * self.yin_frame_ms / 1000)


class ModelConfig(Section):
    """Stage-1 model hyperparameters."""

    latent_mode: LatentMode = Field(LatentMode.FINE)
    latent_dim: int = Field(3, ge=1, description="Per-token latent dimension D")
    global_latent_dim: int = Field(32, ge=1, description="Latent size in global mode")
    encoding_dim: int = Field(32, ge=2, description="Token encoding size E (even)")
    token_embed_dim: int = Field(16, ge=1)
    reference_dim: int = Field(32, ge=1, description="Aligned reference projection size")
    attention_dim: int = Field(32, ge=1)
    prenet_dim: int = Field(32, ge=1)
    decoder_hidden: int = Field(64, ge=1)
    quantize: bool = Field(True, description="Enable the VQ codebook (QFVAE)")
    codebook_size: int = Field(32, ge=1, description="K")
    beta: float = Field(1e-2, ge=0)
    gamma: float = Field(0.25, ge=0)
    advance_bias: float = Field(-2.0, description="Initial bias of the attention advance gate")
    max_decode_frames: int = Field(400, ge=1)
    init_scale: float = Field(0.1, gt=0)

    @model_validator(mode="after")
    def _check_mode(self) -> "ModelConfig":
        if self.encoding_dim % 2:
            raise ValueError("model.encoding_dim must be even (two recurrent directions)")
        if self.quantize and self.latent_mode is LatentMode.GLOBAL:
            raise ValueError("model.quantize requires model.latent_mode = 'fine'")
        return self

    @property
    def effective_latent_dim(self) -> int:
        """Size of the latent concatenated to each token encoding."""
        if self.latent_mode is LatentMode.GLOBAL:
            return self.global_latent_dim
        return self.latent_dim


class TrainConfig(Section):
    """Stage-1 optimization settings."""

    steps: int = Field(500, ge=0)
    batch_size: int = Field(8, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    decay_every: int = Field(2000, ge=1)
    decay_rate: float = Field(0.5, gt=0, le=1)
    clip_norm: float = Field(5.0, gt=0)
    log_every: int = Field(50, ge=1)
    eval_every: int = Field(100, ge=1)
    checkpoint_every: int = Field(0, ge=0, description="0 disables intermediate checkpoints")


class PriorConfig(Section):
    """Stage-2 prior settings."""

    kind: PriorKind = Field(PriorKind.AR_CONTINUOUS)
    hidden_size: int = Field(64, ge=1)
    epochs: int = Field(60, ge=1)
    batch_size: int = Field(8, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    decay_every: int = Field(2000, ge=1)
    decay_rate: float = Field(0.5, gt=0, le=1)
    clip_norm: float = Field(5.0, gt=0)
    log_every: int = Field(10, ge=1)


class SamplingConfig(Section):
    """Sampling plan."""

    scale: float = Field(1.0, ge=0)
    samples_per_utterance: int = Field(100, ge=1)
    utterances: int = Field(3, ge=1)
    temperature: float = Field(1.0, gt=0)
    greedy: bool = Field(False)


class EvaluateConfig(Section):
    """Evaluation settings."""

    mcd_include_c0: bool = Field(False)
    workers: int = Field(1, ge=1)


class PathsConfig(Section):
    """Artifact locations."""

    out_dir: Path = Field(Path("qfvae-out"))


class ExperimentConfig(Section):
    """Complete configuration of a two-stage experiment."""

    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    signal: SignalConfig = Field(default_factory=SignalConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    prior: PriorConfig = Field(default_factory=PriorConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    evaluate: EvaluateConfig = Field(default_factory=EvaluateConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @model_validator(mode="after")
    def _check_corpus_signal(self) -> "ExperimentConfig":
        nyquist = self.signal.sample_rate / 2
        if self.corpus.f0_max >= nyquist / 4:
            raise ValueError("corpus.f0_max must be below Nyquist/4")
        return self

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        """Validate a nested mapping."""
        try:
            return cls.model_validate(data)
        except PydanticValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def load(cls, path: Path) -> "ExperimentConfig":
        """Load configuration from a key = value (TOML) or YAML file."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            text = path.read_text()
            if path.suffix in (".yaml", ".yml"):
                data = yaml.safe_load(text) or {}
            else:
                data = tomllib.loads(text)
        except (OSError, yaml.YAMLError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"Failed to load config from {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {path} must contain a mapping")
        return cls.from_dict(data)

    def save(self, path: Path) -> None:
        """Save configuration to a YAML file."""
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, "w") as f:
                yaml.safe_dump(
                    self.model_dump(mode="json"),
                    f,
                    default_flow_style=False,
                    sort_keys=False,
                )
        except OSError as e:
            raise ConfigError(f"Failed to save config to {path}: {e}") from e

    def with_overrides(self, seed: int | None = None, out_dir: Path | None = None) -> "ExperimentConfig":
        """Apply CLI overrides for the seed and output directory."""
        data = self.model_dump()
        if seed is not None:
            data["experiment"]["seed"] = seed
        if out_dir is not None:
            data["paths"]["out_dir"] = out_dir
        return self.from_dict(data)

    def to_json(self) -> str:
        """Canonical JSON form, used for checkpoint echoes and digests."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        """Short provenance digest of the canonical JSON form."""
        return hash_content(self.to_json(), CONFIG_DIGEST_LENGTH)

    def corpus_spec(self, count: int, seed: int) -> CorpusSpec:
        """Corpus generation spec for `count` utterances."""
        ranges = self.corpus.model_dump(exclude={"train_count", "test_count"})
        return CorpusSpec(count=count, seed=seed, geometry=self.signal.geometry(), **ranges)

    @property
    def run_dir(self) -> Path:
        """Directory holding this run's checkpoints, samples and metrics."""
        return Path(self.paths.out_dir) / RUNS_DIR / self.experiment.name

    @property
    def corpus_dir(self) -> Path:
        """Directory holding the train/test corpus files."""
        return Path(self.paths.out_dir) / CORPUS_DIR
