"""Checkpoint files: named parameter blocks plus a JSON header."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from qfvae.core.constants import (
    CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
    PRIOR_CONTINUOUS,
    PRIOR_DISCRETE,
    STAGE1,
)
from qfvae.core.exceptions import FormatError
from qfvae.numerics.params import ParameterSet
from qfvae.utils.blockfile import Record, read_blockfile, write_blockfile

logger = logging.getLogger(__name__)

STAGES = (STAGE1, PRIOR_CONTINUOUS, PRIOR_DISCRETE)
PARAMS_RECORD = "params"
OPTIMIZER_RECORD = "optimizer"


@dataclass
class Checkpoint:
    """
    Parameters of one training stage.

    Attributes:
        stage: Stage tag (stage1, prior-cont or prior-disc)
        params: Trained parameters
        config: Echo of the experiment configuration
        meta: Stage-specific header fields (step, RNG state, diagnostics)
        optimizer: Optimizer state blocks, for resuming
    """

    stage: str
    params: ParameterSet
    config: dict[str, Any]
    meta: dict[str, Any] = field(default_factory=dict)
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def has_codebook(self) -> bool:
        return "vq.codebook" in self.params


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    """Write a checkpoint atomically."""
    if checkpoint.stage not in STAGES:
        raise FormatError(f"unknown stage tag {checkpoint.stage!r}")
    header = {"stage": checkpoint.stage, "config": checkpoint.config, "meta": checkpoint.meta}
    records = [Record(PARAMS_RECORD, dict(checkpoint.params.items()))]
    if checkpoint.optimizer:
        records.append(Record(OPTIMIZER_RECORD, dict(checkpoint.optimizer)))
    write_blockfile(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, header, records)
    logger.debug("Saved %s checkpoint with %d blocks to %s", checkpoint.stage, len(checkpoint.params), path)


def load_checkpoint(path: Path, stage: str | None = None) -> Checkpoint:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    Args:
        path: Checkpoint file
        stage: Required stage tag, if any

    Returns:
        Checkpoint with bit-exact parameters
    """
    header, records = read_blockfile(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    found = header.get("stage")
    if found not in STAGES:
        raise FormatError(f"{path} carries unknown stage tag {found!r}")
    if stage is not None and found != stage:
        raise FormatError(f"{path} holds a {found} checkpoint, expected {stage}")
    by_id = {r.record_id: r for r in records}
    if PARAMS_RECORD not in by_id:
        raise FormatError(f"{path} has no parameter record")
    optimizer = by_id[OPTIMIZER_RECORD].arrays if OPTIMIZER_RECORD in by_id else {}
    return Checkpoint(
        stage=found,
        params=ParameterSet(by_id[PARAMS_RECORD].arrays),
        config=header.get("config", {}),
        meta=header.get("meta", {}),
        optimizer=dict(optimizer),
    )
