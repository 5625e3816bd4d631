"""Stage-1 training loop."""

import json
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from qfvae.core.config import TrainConfig
from qfvae.core.exceptions import DomainError, StorageError, TrainingError
from qfvae.corpus.models import Utterance
from qfvae.model.qfvae import Batch, QFVAEModel
from qfvae.model.vq import codebook_perplexity, quantize_all
from qfvae.numerics.optim import Adam, StepDecay
from qfvae.numerics.params import ParameterSet
from qfvae.numerics.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass
class TrainingState:
    """Everything needed to continue a run bit-identically."""

    params: ParameterSet
    optimizer: Adam
    rng: RngStream
    log: list[dict[str, Any]] = field(default_factory=list)

    @property
    def step(self) -> int:
        return self.optimizer.step


CheckpointHook = Callable[[TrainingState], None]


def make_optimizer(learning_rate: float, decay_every: int, decay_rate: float, clip_norm: float) -> Adam:
    """Adam on the clipped gradient with a step-decayed step size."""
    return Adam(schedule=StepDecay(learning_rate, decay_every, decay_rate), clip_norm=clip_norm)


def append_jsonl(path: Path | None, row: dict[str, Any]) -> None:
    """Append one JSON row to a log file."""
    if path is None:
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a") as f:
            f.write(json.dumps(row, sort_keys=True) + "\n")
    except OSError as e:
        raise StorageError(f"Failed to append to {path}: {e}") from e


def corpus_indices(model: QFVAEModel, params: ParameterSet, corpus: Sequence[Utterance]) -> np.ndarray:
    """Codebook classes of the posterior means over a corpus, concatenated."""
    codebook = model.codebook(params)
    if codebook is None:
        raise DomainError("class indices need a quantized model")
    indices = [quantize_all(codebook, model.infer_posterior(params, u)[1].mu).indices for u in corpus]
    return np.concatenate(indices)


def corpus_perplexity(model: QFVAEModel, params: ParameterSet, corpus: Sequence[Utterance]) -> float:
    """Codebook perplexity of the posterior-mean assignments over a corpus."""
    return codebook_perplexity(corpus_indices(model, params, corpus), model.config.codebook_size)


def reconstruction_error(model: QFVAEModel, params: ParameterSet, corpus: Sequence[Utterance]) -> float:
    """Mean teacher-forced reconstruction error of the posterior means."""
    errors = []
    for utterance in corpus:
        output, _ = model.reconstruct(params, utterance)
        diff = output.frames - utterance.frames
        errors.append(float(np.mean(np.sum(diff * diff, axis=-1))))
    return float(np.mean(errors))


def evaluate_interval(model: QFVAEModel, params: ParameterSet, corpus: Sequence[Utterance]) -> dict[str, float]:
    """Diagnostics logged every `eval_every` steps."""
    values = {"recon_eval": reconstruction_error(model, params, corpus)}
    if model.quantized:
        values["perplexity"] = corpus_perplexity(model, params, corpus)
    return values


def start_training(model: QFVAEModel, config: TrainConfig, rng: RngStream) -> TrainingState:
    """Fresh parameters, optimizer and data stream for a new run."""
    params = model.init_params(rng.split(0))
    optimizer = make_optimizer(config.learning_rate, config.decay_every, config.decay_rate, config.clip_norm)
    return TrainingState(params=params, optimizer=optimizer, rng=rng.split(1))


def train_stage1(
    model: QFVAEModel,
    corpus: Sequence[Utterance],
    config: TrainConfig,
    rng: RngStream | None = None,
    state: TrainingState | None = None,
    log_path: Path | None = None,
    on_checkpoint: CheckpointHook | None = None,
) -> TrainingState:
    """
    Train the stage-1 model with mini-batch Adam until `config.steps`.

    Each step draws a batch without replacement and the reparameterization
    noise from the state's stream, so a run resumed from a saved state
    continues exactly as the uninterrupted run would.

    Args:
        model: Model hyperparameters
        corpus: Training utterances
        config: Optimization settings
        rng: Seed stream for a new run (ignored when `state` is given)
        state: State to resume from
        log_path: JSON-lines log appended to every `log_every` steps and
            every `eval_every` steps with evaluation diagnostics
        on_checkpoint: Called with the state every `checkpoint_every` steps

    Returns:
        Final training state

    Raises:
        DomainError: If the corpus is empty
        TrainingError: If the loss becomes non-finite
    """
    if not corpus:
        raise DomainError("cannot train on an empty corpus")
    if state is None:
        state = start_training(model, config, rng or RngStream(0))
    batch_size = min(config.batch_size, len(corpus))
    if state.step < config.steps:
        logger.info(
            "Training %s model from step %d to %d on %d utterances",
            "quantized" if model.quantized else "continuous",
            state.step,
            config.steps,
            len(corpus),
        )

    while state.step < config.steps:
        step = state.step
        chosen = state.rng.permutation(len(corpus))[:batch_size]
        batch = Batch.from_utterances([corpus[i] for i in chosen])
        noise = model.draw_noise(batch, state.rng)
        losses, grads = model.loss_and_grads(state.params, batch, noise)
        if not np.isfinite(losses.total):
            raise TrainingError(step, losses.total)
        lr = state.optimizer.schedule(step)
        grad_norm = state.optimizer.apply(state.params, grads)

        if (step + 1) % config.log_every == 0 or step == 0:
            row: dict[str, Any] = {
                "step": step + 1,
                "loss": losses.total,
                "recon": losses.recon,
                "kl": losses.kl,
                "vq": losses.vq,
                "lr": lr,
                "grad_norm": grad_norm,
            }
            if (step + 1) % config.eval_every == 0:
                row.update(evaluate_interval(model, state.params, corpus))
            state.log.append(row)
            append_jsonl(log_path, row)
            logger.info(
                "step %d loss %.4f recon %.4f kl %.4f vq %.4f",
                step + 1,
                losses.total,
                losses.recon,
                losses.kl,
                losses.vq,
            )
        elif (step + 1) % config.eval_every == 0:
            row = {"step": step + 1, **evaluate_interval(model, state.params, corpus)}
            state.log.append(row)
            append_jsonl(log_path, row)

        if on_checkpoint is not None and config.checkpoint_every and (step + 1) % config.checkpoint_every == 0:
            on_checkpoint(state)

    return state
