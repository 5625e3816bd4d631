"""Text tables summarizing reconstruction and sampling metrics."""

import io
from collections.abc import Sequence

from rich.console import Console
from rich.table import Table

from qfvae.core.exceptions import DomainError
from qfvae.harness.records import MetricKind, MetricSet

MODEL_ORDER = {"baseline": 0, "global": 1, "qfvae": 2}
REPORT_WIDTH = 120


def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def _model_key(metric_set: MetricSet) -> tuple[int, int, str]:
    header = metric_set.header
    return (MODEL_ORDER.get(header.model, len(MODEL_ORDER)), header.codebook_size or 0, header.run)


def reconstruction_table(sets: Sequence[MetricSet]) -> Table:
    """One row per run: copy-synthesis FFE and MCD."""
    table = Table(title="Reconstruction performance")
    table.add_column("Run", style="cyan")
    table.add_column("Model")
    table.add_column("K", justify="right")
    table.add_column("FFE", justify="right")
    table.add_column("MCD (dB)", justify="right")
    table.add_column("Utterances", justify="right")
    table.add_column("Config", style="dim")
    for metric_set in sorted(sets, key=_model_key):
        header, values = metric_set.header, metric_set.summary.values
        table.add_row(
            header.run,
            header.model,
            str(header.codebook_size) if header.codebook_size else "-",
            _fmt(values.get("ffe")),
            _fmt(values.get("mcd"), 3),
            str(len(metric_set.rows)),
            header.config_digest,
        )
    return table


def sampling_table(sets: Sequence[MetricSet]) -> Table:
    """One row per (run, prior, scale): mean per-token prosody standard deviations."""
    table = Table(
        title="Prosody diversity (per-token stddev)",
        caption="F0 is averaged over voiced frames only",
    )
    table.add_column("Run", style="cyan")
    table.add_column("Model")
    table.add_column("K", justify="right")
    table.add_column("Prior")
    table.add_column("Scale", justify="right")
    table.add_column("E", justify="right")
    table.add_column("F0 (Hz)", justify="right")
    table.add_column("Dur (ms)", justify="right")
    table.add_column("Config", style="dim")

    def key(metric_set: MetricSet) -> tuple[tuple[int, int, str], str, float]:
        header = metric_set.header
        return _model_key(metric_set), header.prior or "", header.scale or 0.0

    for metric_set in sorted(sets, key=key):
        header, values = metric_set.header, metric_set.summary.values
        table.add_row(
            header.run,
            header.model,
            str(header.codebook_size) if header.codebook_size else "-",
            header.prior or "-",
            _fmt(header.scale, 2),
            _fmt(values.get("energy")),
            _fmt(values.get("f0"), 2),
            _fmt(values.get("duration_ms"), 2),
            header.config_digest,
        )
    return table


def render_report(sets: Sequence[MetricSet]) -> str:
    """
    Render every metric set into plain, deterministic text.

    Args:
        sets: Parsed metric files, at least one

    Returns:
        The report text

    Raises:
        DomainError: If no sets are given
    """
    if not sets:
        raise DomainError("a report needs at least one metric set")

    buffer = io.StringIO()
    console = Console(file=buffer, width=REPORT_WIDTH, color_system=None, force_terminal=False)
    recon = [s for s in sets if s.header.kind is MetricKind.RECONSTRUCTION]
    diversity = [s for s in sets if s.header.kind is MetricKind.DIVERSITY]
    if recon:
        console.print(reconstruction_table(recon))
    if diversity:
        console.print(sampling_table(diversity))
    return buffer.getvalue()
