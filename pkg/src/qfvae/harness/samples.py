"""Sample-set files: predicted frames, attention and latents per sample."""

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from qfvae.core.constants import SAMPLES_MAGIC, SAMPLES_VERSION
from qfvae.core.exceptions import FormatError
from qfvae.utils.blockfile import Record, read_blockfile, write_blockfile

KIND_SAMPLES = "samples"
KIND_COPY_SYNTH = "copy-synth"


@dataclass
class SampleRecord:
    """Decoder output for one utterance under one latent draw."""

    utt_id: str
    sample_index: int
    frames: np.ndarray  # (T, F)
    attention: np.ndarray  # (T, N)
    latents: np.ndarray  # (N, D), or (1, D) for a global latent
    indices: np.ndarray | None = None  # codebook classes when quantized

    @property
    def record_id(self) -> str:
        return f"{self.utt_id}#{self.sample_index:04d}"


def _to_record(sample: SampleRecord) -> Record:
    arrays = {
        "frames": sample.frames,
        "attention": sample.attention,
        "latents": sample.latents,
    }
    if sample.indices is not None:
        arrays["indices"] = sample.indices
    return Record(sample.record_id, arrays)


def _from_record(index: int, record: Record) -> SampleRecord:
    utt_id, sep, number = record.record_id.rpartition("#")
    if not sep or not number.isdigit():
        raise FormatError("malformed sample id", record=index, record_id=record.record_id)
    missing = [k for k in ("frames", "attention", "latents") if k not in record.arrays]
    if missing:
        raise FormatError(f"missing fields {missing}", record=index, record_id=record.record_id)
    a = record.arrays
    if a["frames"].shape[0] != a["attention"].shape[0]:
        raise FormatError("frames and attention disagree on length", record=index, record_id=record.record_id)
    return SampleRecord(
        utt_id=utt_id,
        sample_index=int(number),
        frames=a["frames"],
        attention=a["attention"],
        latents=a["latents"],
        indices=a.get("indices"),
    )


def write_samples(path: Path, header: dict[str, Any], samples: Sequence[SampleRecord]) -> None:
    """Write a sample set; `header` must name its kind."""
    if header.get("kind") not in (KIND_SAMPLES, KIND_COPY_SYNTH):
        raise FormatError(f"unknown sample-set kind {header.get('kind')!r}")
    write_blockfile(
        path,
        SAMPLES_MAGIC,
        SAMPLES_VERSION,
        {**header, "count": len(samples)},
        (_to_record(s) for s in samples),
    )


def read_samples(path: Path) -> tuple[dict[str, Any], list[SampleRecord]]:
    """Read a sample set written by :func:`write_samples`."""
    header, records = read_blockfile(path, SAMPLES_MAGIC, SAMPLES_VERSION)
    return header, [_from_record(i, r) for i, r in enumerate(records)]
