"""Mini-batch loop shared by the autoregressive priors."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from qfvae.core.config import PriorConfig
from qfvae.core.exceptions import DomainError, TrainingError
from qfvae.model.training import append_jsonl, make_optimizer
from qfvae.numerics.params import ParameterSet
from qfvae.numerics.rng import RngStream

logger = logging.getLogger(__name__)

# Maps (parameters, item indices, stream) to (loss, gradients by name)
BatchObjective = Callable[[ParameterSet, Sequence[int], RngStream], tuple[float, dict[str, np.ndarray]]]


@dataclass
class FitResult:
    """Trained prior parameters and the per-epoch loss curve."""

    params: ParameterSet
    log: list[dict[str, Any]] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return float(self.log[-1]["loss"]) if self.log else float("nan")


def fit_loop(
    objective: BatchObjective,
    params: ParameterSet,
    num_items: int,
    config: PriorConfig,
    rng: RngStream,
    log_path: Path | None = None,
    label: str = "prior",
) -> FitResult:
    """
    Run `config.epochs` shuffled passes over `num_items` training items.

    Args:
        objective: Batch loss and gradients
        params: Initial parameters; updated in place
        num_items: Number of training items
        config: Optimization settings
        rng: Stream for shuffling and for the objective's own draws
        log_path: JSON-lines file receiving one row per epoch
        label: Name used in log messages

    Returns:
        FitResult holding `params` and the loss curve
    """
    if num_items == 0:
        raise DomainError(f"cannot fit the {label} on an empty training set")
    optimizer = make_optimizer(config.learning_rate, config.decay_every, config.decay_rate, config.clip_norm)
    result = FitResult(params=params)
    for epoch in range(config.epochs):
        order = rng.permutation(num_items)
        losses = []
        for start in range(0, num_items, config.batch_size):
            chosen = [int(i) for i in order[start : start + config.batch_size]]
            loss, grads = objective(params, chosen, rng)
            if not np.isfinite(loss):
                raise TrainingError(optimizer.step, loss)
            optimizer.apply(params, grads)
            losses.append(loss)
        row = {"epoch": epoch + 1, "step": optimizer.step, "loss": float(np.mean(losses))}
        result.log.append(row)
        append_jsonl(log_path, row)
        if (epoch + 1) % config.log_every == 0 or epoch == 0:
            logger.info("%s epoch %d loss %.5f", label, epoch + 1, row["loss"])
    return result
