"""Metric records: one JSON object per line, led by a self-describing header."""

import json
import math
from collections.abc import Sequence
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from qfvae.core.constants import METRICS_FORMAT, METRICS_VERSION
from qfvae.core.exceptions import FormatError, StorageError, VersionError


class MetricKind(str, Enum):
    """What a record set measures."""

    RECONSTRUCTION = "reconstruction"
    DIVERSITY = "diversity"


class MetricsHeader(BaseModel):
    """First line of a metric file."""

    format: str = Field(METRICS_FORMAT)
    version: int = Field(METRICS_VERSION)
    kind: MetricKind
    run: str = Field(..., description="Experiment name")
    model: str = Field(..., description="baseline, qfvae or global")
    codebook_size: int | None = Field(None, description="K for quantized models")
    prior: str | None = Field(None, description="Prior used for sampling")
    scale: float | None = Field(None, description="Sampling scale")
    config_digest: str = Field(..., description="Digest of the producing configuration")


class MetricRow(BaseModel):
    """Metrics of one utterance, or the summary over all of them."""

    type: str = Field("utterance", description="utterance or summary")
    utt_id: str | None = None
    values: dict[str, float | None] = Field(default_factory=dict)


class MetricSet(BaseModel):
    """A parsed metric file."""

    header: MetricsHeader
    rows: list[MetricRow]
    summary: MetricRow


def _clean(values: dict[str, float]) -> dict[str, float | None]:
    """Non-finite values are stored as null."""
    return {k: (float(v) if math.isfinite(v) else None) for k, v in values.items()}


def utterance_row(utt_id: str, values: dict[str, float]) -> MetricRow:
    return MetricRow(type="utterance", utt_id=utt_id, values=_clean(values))


def summarize(rows: Sequence[MetricRow]) -> MetricRow:
    """Per-key mean over rows, skipping nulls."""
    keys: list[str] = []
    for row in rows:
        keys.extend(k for k in row.values if k not in keys)
    means: dict[str, float] = {}
    for key in keys:
        present = [row.values[key] for row in rows if row.values.get(key) is not None]
        means[key] = math.fsum(present) / len(present) if present else math.nan  # type: ignore[arg-type]
    return MetricRow(type="summary", values=_clean(means))


def write_metrics(path: Path, header: MetricsHeader, rows: Sequence[MetricRow]) -> MetricSet:
    """Write header, one line per row, then the summary line."""
    metric_set = MetricSet(header=header, rows=list(rows), summary=summarize(rows))
    lines = [header.model_dump_json()]
    lines.extend(row.model_dump_json() for row in metric_set.rows)
    lines.append(metric_set.summary.model_dump_json())
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise StorageError(f"Failed to write metrics to {path}: {e}") from e
    return metric_set


def read_metrics(path: Path) -> MetricSet:
    """
    Parse a metric file.

    Raises:
        FormatError: If the file is not a metric file
        VersionError: If its version is not supported
    """
    try:
        lines = [line for line in path.read_text().splitlines() if line.strip()]
    except OSError as e:
        raise StorageError(f"Failed to read metrics from {path}: {e}") from e
    if len(lines) < 2:
        raise FormatError(f"{path} is not a metric file")
    try:
        first = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: bad header line: {e}", record=0) from e
    if not isinstance(first, dict) or first.get("format") != METRICS_FORMAT:
        raise FormatError(f"{path} is not a {METRICS_FORMAT} file", record=0)
    if first.get("version") != METRICS_VERSION:
        raise VersionError(first.get("version"), METRICS_VERSION)
    try:
        header = MetricsHeader.model_validate(first)
        rows = [MetricRow.model_validate_json(line) for line in lines[1:]]
    except PydanticValidationError as e:
        raise FormatError(f"{path}: invalid record: {e}") from e
    if rows[-1].type != "summary":
        raise FormatError(f"{path} does not end with a summary record", record=len(rows))
    return MetricSet(header=header, rows=rows[:-1], summary=rows[-1])
