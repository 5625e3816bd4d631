"""The two-stage experiment pipeline, one function per CLI subcommand."""

import logging
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, TypeVar

import numpy as np

from qfvae.core.config import ExperimentConfig, LatentMode, ModelConfig, PriorKind
from qfvae.core.constants import (
    CONFIG_ECHO_FILE,
    COPY_SYNTH_FILE,
    PRIOR_CONTINUOUS,
    PRIOR_DISCRETE,
    PRIOR_LOG_FILE,
    PRIOR_STAGE_TAGS,
    REPORT_FILE,
    REPORTS_DIR,
    RUNS_DIR,
    STAGE1,
    STAGE1_CHECKPOINT_FILE,
    TEST_CORPUS_FILE,
    TRAIN_CORPUS_FILE,
    TRAIN_LOG_FILE,
)
from qfvae.core.exceptions import ConfigError, DataError, StorageError
from qfvae.corpus import Utterance, generate_corpus, read_corpus, write_corpus
from qfvae.harness.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from qfvae.harness.records import (
    MetricKind,
    MetricRow,
    MetricSet,
    MetricsHeader,
    read_metrics,
    utterance_row,
    write_metrics,
)
from qfvae.harness.report import render_report
from qfvae.harness.samples import KIND_COPY_SYNTH, KIND_SAMPLES, SampleRecord, read_samples, write_samples
from qfvae.metrics import PitchTrack, diversity_stats, ffe, griffin_lim, mcd, mfcc, phoneme_prosody, yin_f0
from qfvae.model.qfvae import LatentSequence, QFVAEModel, TokenEncoding
from qfvae.model.training import TrainingState, corpus_perplexity, make_optimizer, train_stage1
from qfvae.numerics.params import ParameterSet
from qfvae.numerics.rng import RngStream
from qfvae.priors import (
    ContinuousARPrior,
    DiscreteARPrior,
    fit_prior_continuous,
    fit_prior_discrete,
    posterior_classes,
    sample_independent,
)

logger = logging.getLogger(__name__)

# Child streams of the experiment seed
CORPUS_TRAIN_STREAM = 0
CORPUS_TEST_STREAM = 1
TRAIN_STREAM = 2
PRIOR_STREAM = 3
SAMPLE_STREAM = 4
EVALUATE_STREAM = 5

T = TypeVar("T")
R = TypeVar("R")

LatentSampler = Callable[[TokenEncoding, RngStream], LatentSequence]


class EvaluationTarget(str, Enum):
    """Which persisted outputs to evaluate."""

    COPY_SYNTH = "copy-synth"
    SAMPLES = "samples"


@dataclass
class CorpusSummary:
    train_path: Path
    test_path: Path
    train_count: int
    test_count: int
    train_frames: int
    test_frames: int


@dataclass
class TrainSummary:
    checkpoint_path: Path
    log_path: Path
    steps: int
    final_loss: float | None
    perplexity: float | None
    model: str


@dataclass
class PriorSummary:
    checkpoint_path: Path
    log_path: Path
    kind: str
    epochs: int
    final_loss: float


@dataclass
class SampleSummary:
    path: Path
    utterances: int
    records: int


@dataclass
class EvaluateSummary:
    path: Path
    metrics: MetricSet


# Paths


def train_corpus_path(config: ExperimentConfig) -> Path:
    return config.corpus_dir / TRAIN_CORPUS_FILE


def test_corpus_path(config: ExperimentConfig) -> Path:
    return config.corpus_dir / TEST_CORPUS_FILE


def stage1_path(config: ExperimentConfig) -> Path:
    return config.run_dir / STAGE1_CHECKPOINT_FILE


def prior_path(config: ExperimentConfig) -> Path:
    return config.run_dir / f"{PRIOR_STAGE_TAGS[config.prior.kind.value]}.qfvk"


def samples_path(config: ExperimentConfig) -> Path:
    return config.run_dir / f"samples-{config.prior.kind.value}-{config.sampling.scale:g}.qfvs"


def copy_synth_path(config: ExperimentConfig) -> Path:
    return config.run_dir / COPY_SYNTH_FILE


def metrics_path(config: ExperimentConfig, target: EvaluationTarget) -> Path:
    if target is EvaluationTarget.COPY_SYNTH:
        return config.run_dir / "metrics-recon.jsonl"
    return config.run_dir / f"metrics-{config.prior.kind.value}-{config.sampling.scale:g}.jsonl"


# Helpers


def seed_stream(config: ExperimentConfig, index: int) -> RngStream:
    return RngStream(config.experiment.seed).split(index)


def model_name(model_config: ModelConfig) -> str:
    """Row label used in reports."""
    if model_config.latent_mode is LatentMode.GLOBAL:
        return "global"
    return "qfvae" if model_config.quantize else "baseline"


def build_model(config: ExperimentConfig) -> QFVAEModel:
    return QFVAEModel(config.model, config.corpus.vocab_size, config.signal.n_bins)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], workers: int) -> list[R]:
    """Apply `fn` to every item, in order, on up to `workers` threads."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def load_split(path: Path, name: str) -> list[Utterance]:
    if not path.exists():
        raise DataError(f"{name} corpus not found at {path}; run gen-corpus first")
    utterances = read_corpus(path)
    if not utterances:
        raise DataError(f"{name} corpus at {path} is empty")
    return utterances


def _reset_file(path: Path) -> None:
    try:
        path.unlink(missing_ok=True)
    except OSError as e:
        raise StorageError(f"Failed to remove {path}: {e}") from e


def load_stage1(config: ExperimentConfig) -> tuple[QFVAEModel, Checkpoint]:
    """Stage-1 checkpoint of the run and the model its configuration describes."""
    path = stage1_path(config)
    if not path.exists():
        raise DataError(f"stage-1 checkpoint not found at {path}; run train first")
    checkpoint = load_checkpoint(path, STAGE1)
    echo = ExperimentConfig.from_dict(checkpoint.config)
    return build_model(echo), checkpoint


def pitch_track(waveform: np.ndarray, config: ExperimentConfig) -> PitchTrack:
    """YIN track of a waveform; unvoiced when it is shorter than one analysis frame."""
    signal = config.signal
    hop = signal.geometry().hop
    frame = signal.yin_frame()
    if waveform.size < frame:
        return PitchTrack.unvoiced(waveform.size // hop)
    return yin_f0(
        waveform,
        signal.sample_rate,
        frame,
        hop,
        signal.yin_f0_floor,
        signal.yin_f0_ceil,
        signal.yin_threshold,
    )


# Commands


def cmd_gen_corpus(config: ExperimentConfig) -> CorpusSummary:
    """Generate and write the train and test corpora."""
    train_spec = config.corpus_spec(config.corpus.train_count, seed_stream(config, CORPUS_TRAIN_STREAM).seed)
    test_spec = config.corpus_spec(config.corpus.test_count, seed_stream(config, CORPUS_TEST_STREAM).seed)
    train = generate_corpus(train_spec, prefix="train")
    test = generate_corpus(test_spec, prefix="test")
    write_corpus(train_corpus_path(config), train)
    write_corpus(test_corpus_path(config), test)
    logger.info("Wrote %d train and %d test utterances to %s", len(train), len(test), config.corpus_dir)
    return CorpusSummary(
        train_path=train_corpus_path(config),
        test_path=test_corpus_path(config),
        train_count=len(train),
        test_count=len(test),
        train_frames=sum(u.num_frames for u in train),
        test_frames=sum(u.num_frames for u in test),
    )


def _stage1_checkpoint(
    config: ExperimentConfig, model: QFVAEModel, state: TrainingState, perplexity: float | None
) -> Checkpoint:
    meta: dict[str, Any] = {
        "step": state.step,
        "rng_state": state.rng.state(),
        "model": model_name(model.config),
        "config_digest": config.digest,
    }
    if perplexity is not None:
        meta["perplexity"] = perplexity
    return Checkpoint(
        stage=STAGE1,
        params=state.params,
        config=config.model_dump(mode="json"),
        meta=meta,
        optimizer=state.optimizer.state_arrays(),
    )


def _resume_state(config: ExperimentConfig, checkpoint: Checkpoint) -> TrainingState:
    saved = ExperimentConfig.from_dict(checkpoint.config)
    if saved.model != config.model:
        raise ConfigError("cannot resume: model settings differ from the checkpoint")
    train = config.train
    optimizer = make_optimizer(train.learning_rate, train.decay_every, train.decay_rate, train.clip_norm)
    optimizer.load_state_arrays(checkpoint.optimizer, int(checkpoint.meta["step"]))
    return TrainingState(
        params=checkpoint.params,
        optimizer=optimizer,
        rng=RngStream.from_state(checkpoint.meta["rng_state"]),
    )


def cmd_train(config: ExperimentConfig, resume: bool = False) -> TrainSummary:
    """
    Train the stage-1 model and write its checkpoint and loss log.

    Args:
        config: Experiment configuration
        resume: Continue from the run's existing stage-1 checkpoint

    Returns:
        TrainSummary
    """
    train = load_split(train_corpus_path(config), "train")
    model = build_model(config)
    checkpoint_path = stage1_path(config)
    log_path = config.run_dir / TRAIN_LOG_FILE

    state = None
    if resume:
        if not checkpoint_path.exists():
            raise DataError(f"nothing to resume: {checkpoint_path} does not exist")
        state = _resume_state(config, load_checkpoint(checkpoint_path, STAGE1))
        logger.info("Resuming from step %d", state.step)
    else:
        _reset_file(log_path)
    config.save(config.run_dir / CONFIG_ECHO_FILE)

    def save(current: TrainingState) -> None:
        save_checkpoint(checkpoint_path, _stage1_checkpoint(config, model, current, None))

    state = train_stage1(
        model,
        train,
        config.train,
        rng=seed_stream(config, TRAIN_STREAM),
        state=state,
        log_path=log_path,
        on_checkpoint=save,
    )
    perplexity = corpus_perplexity(model, state.params, train) if model.quantized else None
    save_checkpoint(checkpoint_path, _stage1_checkpoint(config, model, state, perplexity))
    losses = [row["loss"] for row in state.log if "loss" in row]
    return TrainSummary(
        checkpoint_path=checkpoint_path,
        log_path=log_path,
        steps=state.step,
        final_loss=losses[-1] if losses else None,
        perplexity=perplexity,
        model=model_name(model.config),
    )


def cmd_fit_prior(config: ExperimentConfig) -> PriorSummary:
    """
    Fit the configured autoregressive prior to the frozen stage-1 posteriors.

    Raises:
        ConfigError: For the independent prior, a global-latent model, or a
            discrete prior against a model without a codebook
    """
    kind = config.prior.kind
    if kind is PriorKind.INDEPENDENT:
        raise ConfigError("the independent prior has nothing to fit; set prior.kind to an autoregressive prior")
    model, stage1 = load_stage1(config)
    if model.is_global:
        raise ConfigError("autoregressive priors need per-token latents (model.latent_mode = 'fine')")
    codebook = model.codebook(stage1.params)
    if kind is PriorKind.AR_DISCRETE and codebook is None:
        raise ConfigError("prior.kind = 'ar-discrete' needs a quantized stage-1 checkpoint")

    train = load_split(train_corpus_path(config), "train")
    inferred = [model.infer_posterior(stage1.params, u) for u in train]
    encodings = [enc for enc, _ in inferred]
    posteriors = [post for _, post in inferred]
    log_path = config.run_dir / PRIOR_LOG_FILE
    _reset_file(log_path)
    rng = seed_stream(config, PRIOR_STREAM)
    hidden = config.prior.hidden_size
    meta: dict[str, Any] = {
        "kind": kind.value,
        "stage1_checksum": stage1.params.checksum(),
        "latent_dim": model.latent_dim,
        "encoding_dim": model.config.encoding_dim,
        "hidden_size": hidden,
        "config_digest": config.digest,
    }
    if kind is PriorKind.AR_CONTINUOUS:
        continuous = ContinuousARPrior(model.latent_dim, model.config.encoding_dim, hidden)
        fit = fit_prior_continuous(continuous, posteriors, encodings, config.prior, rng, log_path)
        stage = PRIOR_CONTINUOUS
    else:
        assert codebook is not None
        discrete = DiscreteARPrior(codebook.size, model.latent_dim, model.config.encoding_dim, hidden)
        classes = posterior_classes(posteriors, codebook)
        fit = fit_prior_discrete(discrete, classes, encodings, config.prior, rng, log_path)
        stage = PRIOR_DISCRETE
        meta["codebook_size"] = codebook.size
    meta["final_loss"] = fit.final_loss

    path = prior_path(config)
    save_checkpoint(path, Checkpoint(stage=stage, params=fit.params, config=config.model_dump(mode="json"), meta=meta))
    return PriorSummary(
        checkpoint_path=path,
        log_path=log_path,
        kind=kind.value,
        epochs=len(fit.log),
        final_loss=fit.final_loss,
    )


def _latent_sampler(config: ExperimentConfig, model: QFVAEModel, params: ParameterSet) -> LatentSampler:
    """The configured prior as a function of (encoding, stream)."""
    kind = config.prior.kind
    sampling = config.sampling
    codebook = model.codebook(params)
    if kind is PriorKind.INDEPENDENT:

        def independent(encoding: TokenEncoding, rng: RngStream) -> LatentSequence:
            rows = 1 if model.is_global else encoding.num_tokens
            return sample_independent(rows, model.latent_dim, sampling.scale, rng, codebook)

        return independent

    path = prior_path(config)
    if not path.exists():
        raise DataError(f"prior checkpoint not found at {path}; run fit-prior first")
    prior = load_checkpoint(path, PRIOR_STAGE_TAGS[kind.value])
    meta = prior.meta
    if meta.get("stage1_checksum") != params.checksum():
        raise ConfigError(f"{path} was fitted against a different stage-1 checkpoint")
    if meta.get("latent_dim") != model.latent_dim or meta.get("encoding_dim") != model.config.encoding_dim:
        raise ConfigError(f"{path} does not match the stage-1 latent or encoding size")
    hidden = int(meta["hidden_size"])

    if kind is PriorKind.AR_CONTINUOUS:
        continuous = ContinuousARPrior(model.latent_dim, model.config.encoding_dim, hidden)

        def ar_continuous(encoding: TokenEncoding, rng: RngStream) -> LatentSequence:
            return continuous.sample(prior.params, encoding, rng, codebook, sampling.scale)

        return ar_continuous

    if codebook is None or meta.get("codebook_size") != codebook.size:
        raise ConfigError(f"{path} does not match the stage-1 codebook")
    discrete = DiscreteARPrior(codebook.size, model.latent_dim, model.config.encoding_dim, hidden)

    def ar_discrete(encoding: TokenEncoding, rng: RngStream) -> LatentSequence:
        return discrete.sample(prior.params, encoding, rng, codebook, sampling.temperature, sampling.greedy)

    return ar_discrete


def _samples_header(config: ExperimentConfig, model: QFVAEModel, kind: str) -> dict[str, Any]:
    header: dict[str, Any] = {
        "kind": kind,
        "run": config.experiment.name,
        "model": model_name(model.config),
        "codebook_size": model.config.codebook_size if model.quantized else None,
        "config_digest": config.digest,
    }
    if kind == KIND_SAMPLES:
        header["prior"] = config.prior.kind.value
        header["scale"] = config.sampling.scale
    return header


def cmd_sample(config: ExperimentConfig) -> SampleSummary:
    """
    Draw latent sequences under the configured prior and decode them free-running.

    Utterances are drawn at random from the test set; each (utterance, sample)
    pair gets its own child stream, so the result does not depend on the
    number of workers.
    """
    model, stage1 = load_stage1(config)
    params = stage1.params
    sampler = _latent_sampler(config, model, params)
    test = load_split(test_corpus_path(config), "test")
    rng = seed_stream(config, SAMPLE_STREAM)
    count = min(config.sampling.utterances, len(test))
    picks = sorted(int(i) for i in rng.permutation(len(test))[:count])
    encodings = {j: model.encode_tokens(params, test[j].tokens) for j in picks}
    jobs = [(j, s) for j in picks for s in range(config.sampling.samples_per_utterance)]

    def run(job: tuple[int, int]) -> SampleRecord:
        j, s = job
        latents = sampler(encodings[j], rng.split(j).split(s))
        output = model.decode(params, encodings[j], latents)
        return SampleRecord(
            utt_id=test[j].utt_id,
            sample_index=s,
            frames=output.frames,
            attention=output.attention,
            latents=latents.values,
            indices=latents.indices,
        )

    samples = parallel_map(run, jobs, config.evaluate.workers)
    path = samples_path(config)
    write_samples(path, _samples_header(config, model, KIND_SAMPLES), samples)
    logger.info("Wrote %d samples of %d utterances to %s", len(samples), len(picks), path)
    return SampleSummary(path=path, utterances=len(picks), records=len(samples))


def cmd_copy_synth(config: ExperimentConfig) -> SampleSummary:
    """Reconstruct every test utterance from its posterior means."""
    model, stage1 = load_stage1(config)
    test = load_split(test_corpus_path(config), "test")

    def run(utterance: Utterance) -> SampleRecord:
        output, latents = model.reconstruct(stage1.params, utterance)
        return SampleRecord(
            utt_id=utterance.utt_id,
            sample_index=0,
            frames=output.frames,
            attention=output.attention,
            latents=latents.values,
            indices=latents.indices,
        )

    records = parallel_map(run, test, config.evaluate.workers)
    path = copy_synth_path(config)
    write_samples(path, _samples_header(config, model, KIND_COPY_SYNTH), records)
    return SampleSummary(path=path, utterances=len(test), records=len(records))


def _metrics_header(config: ExperimentConfig, header: dict[str, Any], kind: MetricKind) -> MetricsHeader:
    return MetricsHeader(
        kind=kind,
        run=header.get("run", config.experiment.name),
        model=header.get("model", model_name(config.model)),
        codebook_size=header.get("codebook_size"),
        prior=header.get("prior"),
        scale=header.get("scale"),
        config_digest=header.get("config_digest", config.digest),
    )


def cmd_evaluate(
    config: ExperimentConfig,
    target: EvaluationTarget = EvaluationTarget.COPY_SYNTH,
    include_c0: bool | None = None,
) -> EvaluateSummary:
    """
    Score persisted outputs against the test corpus.

    Copy synthesis yields FFE and MCD per utterance; sample sets yield the
    per-token prosody standard deviations per utterance.

    Args:
        config: Experiment configuration
        target: Which outputs to score
        include_c0: Override of `evaluate.mcd_include_c0`

    Returns:
        EvaluateSummary with the written metric set
    """
    source = copy_synth_path(config) if target is EvaluationTarget.COPY_SYNTH else samples_path(config)
    if not source.exists():
        raise DataError(f"no {target.value} outputs at {source}")
    header, records = read_samples(source)
    if not records:
        raise DataError(f"{source} holds no records to evaluate")
    test = load_split(test_corpus_path(config), "test")
    references = {u.utt_id: u for u in test}
    # samples of one utterance share a phase initialization
    phase_stream = {u.utt_id: j for j, u in enumerate(test)}
    for record in records:
        if record.utt_id not in references:
            raise DataError(f"reference utterance {record.utt_id!r} not found in the test corpus")

    geometry = config.signal.geometry()
    iterations = config.signal.griffin_lim_iters
    rng = seed_stream(config, EVALUATE_STREAM)
    c0 = config.evaluate.mcd_include_c0 if include_c0 is None else include_c0

    def estimate_pitch(record: SampleRecord) -> PitchTrack:
        stream = rng.split(phase_stream[record.utt_id])
        waveform = griffin_lim(np.maximum(record.frames, 0.0), geometry, iterations, stream)
        return pitch_track(waveform, config)

    tracks = parallel_map(estimate_pitch, records, config.evaluate.workers)

    rows: list[MetricRow] = []
    if target is EvaluationTarget.COPY_SYNTH:
        kind = MetricKind.RECONSTRUCTION
        for record, track in zip(records, tracks):
            reference = references[record.utt_id]
            if record.frames.shape != reference.frames.shape:
                raise DataError(f"reconstruction of {record.utt_id!r} does not match its reference length")
            values = {
                "ffe": ffe(pitch_track(reference.waveform, config), track),
                "mcd": mcd(
                    mfcc(reference.frames, geometry.bin_hz),
                    mfcc(np.maximum(record.frames, 0.0), geometry.bin_hz),
                    include_c0=c0,
                ),
            }
            rows.append(utterance_row(record.utt_id, values))
    else:
        kind = MetricKind.DIVERSITY
        grouped: dict[str, list[Any]] = {}
        for record, track in zip(records, tracks):
            measured = phoneme_prosody(record.frames, record.attention, track, geometry.hop_ms)
            grouped.setdefault(record.utt_id, []).append(measured)
        for utt_id, measurements in grouped.items():
            rows.append(utterance_row(utt_id, diversity_stats(measurements).as_dict()))

    path = metrics_path(config, target)
    metric_set = write_metrics(path, _metrics_header(config, header, kind), rows)
    logger.info("Wrote %d %s records to %s", len(rows), kind.value, path)
    return EvaluateSummary(path=path, metrics=metric_set)


def find_metric_files(out_dir: Path) -> list[Path]:
    """Every metric file under the runs directory, in sorted order."""
    return sorted((Path(out_dir) / RUNS_DIR).glob("*/metrics-*.jsonl"))


def cmd_report(config: ExperimentConfig, paths: Sequence[Path] | None = None) -> tuple[Path, str]:
    """
    Render reconstruction and diversity tables from metric files.

    Args:
        config: Experiment configuration (locates the output directory)
        paths: Metric files; every file under the runs directory when None

    Returns:
        (report path, report text)
    """
    files = list(paths) if paths else find_metric_files(config.paths.out_dir)
    if not files:
        raise DataError(f"no metric files found under {config.paths.out_dir}")
    text = render_report([read_metrics(p) for p in files])
    path = Path(config.paths.out_dir) / REPORTS_DIR / REPORT_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise StorageError(f"Failed to write report to {path}: {e}") from e
    return path, text
