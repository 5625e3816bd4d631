"""Corpus files and train/test splitting."""

import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from qfvae.core.constants import CORPUS_MAGIC, CORPUS_VERSION
from qfvae.core.exceptions import DimensionError, DomainError, FormatError
from qfvae.corpus.models import TokenTruth, Utterance
from qfvae.numerics.rng import RngStream
from qfvae.utils.blockfile import Record, read_blockfile, write_blockfile

logger = logging.getLogger(__name__)

_FIELDS = ("tokens", "frames", "waveform", "durations", "f0", "energy")


def _to_record(utterance: Utterance) -> Record:
    return Record(
        utterance.utt_id,
        {
            "tokens": utterance.tokens,
            "frames": utterance.frames,
            "waveform": utterance.waveform,
            "durations": utterance.truth.durations,
            "f0": utterance.truth.f0,
            "energy": utterance.truth.energy,
        },
    )


def _from_record(index: int, record: Record) -> Utterance:
    missing = [name for name in _FIELDS if name not in record.arrays]
    if missing:
        raise FormatError(f"missing fields {missing}", record=index, record_id=record.record_id)
    a = record.arrays
    try:
        return Utterance(
            utt_id=record.record_id,
            tokens=a["tokens"],
            frames=a["frames"],
            waveform=a["waveform"],
            truth=TokenTruth(durations=a["durations"].astype(np.int64), f0=a["f0"], energy=a["energy"]),
        )
    except DimensionError as e:
        raise FormatError(f"inconsistent fields: {e}", record=index, record_id=record.record_id) from e


def write_corpus(path: Path, utterances: Sequence[Utterance]) -> None:
    """
    Write utterances to a corpus file.

    Args:
        path: Destination file
        utterances: Utterances in order
    """
    write_blockfile(
        path,
        CORPUS_MAGIC,
        CORPUS_VERSION,
        {"count": len(utterances)},
        (_to_record(u) for u in utterances),
    )
    logger.debug("Wrote %d utterances to %s", len(utterances), path)


def read_corpus(path: Path) -> list[Utterance]:
    """
    Read a corpus file written by :func:`write_corpus`.

    Args:
        path: Corpus file

    Returns:
        Utterances in file order
    """
    _, records = read_blockfile(path, CORPUS_MAGIC, CORPUS_VERSION)
    return [_from_record(i, r) for i, r in enumerate(records)]


def split_corpus(
    utterances: Sequence[Utterance], train_fraction: float, seed: int
) -> tuple[list[Utterance], list[Utterance]]:
    """
    Partition utterances into train and test sets.

    Both sets keep the input order.

    Args:
        utterances: Utterances to split
        train_fraction: Share assigned to training, strictly between 0 and 1
        seed: Seed of the shuffle

    Returns:
        (train, test)
    """
    if not 0.0 < train_fraction < 1.0:
        raise DomainError(f"train fraction must lie in (0, 1), got {train_fraction}")
    count = len(utterances)
    num_train = int(round(train_fraction * count))
    order = RngStream(seed).permutation(count)
    chosen = set(int(i) for i in order[:num_train])
    train = [u for i, u in enumerate(utterances) if i in chosen]
    test = [u for i, u in enumerate(utterances) if i not in chosen]
    return train, test
