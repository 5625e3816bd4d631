"""Main CLI application for qfvae."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, NoReturn, Optional

import typer
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from qfvae import __version__
from qfvae.core.config import ExperimentConfig
from qfvae.core.exceptions import QFVAEError, ValidationError
from qfvae.core.logging import setup_logging
from qfvae.harness.pipeline import (
    EvaluationTarget,
    cmd_copy_synth,
    cmd_evaluate,
    cmd_fit_prior,
    cmd_gen_corpus,
    cmd_report,
    cmd_sample,
    cmd_train,
)

# Create the main app
app = typer.Typer(
    name="qfvae",
    help="QFVAE - Quantized fine-grained prosody VAE experiments",
    no_args_is_help=True,
    rich_markup_mode="rich",
)

console = Console()

EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


@dataclass
class GlobalOptions:
    """Options shared by every subcommand."""

    config_path: Path | None = None
    seed: int | None = None
    out_dir: Path | None = None


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        console.print(f"qfvae version {__version__}")
        raise typer.Exit()


def _fail(error: Exception) -> NoReturn:
    """Report an error and exit with its status."""
    console.print(f"[red]Error: {error}[/red]")
    if isinstance(error, ValidationError):
        raise typer.Exit(EXIT_VALIDATION)
    raise typer.Exit(EXIT_RUNTIME)


def _load_config(ctx: typer.Context) -> ExperimentConfig:
    options: GlobalOptions = ctx.obj or GlobalOptions()
    config = ExperimentConfig.load(options.config_path) if options.config_path else ExperimentConfig()
    return config.with_overrides(seed=options.seed, out_dir=options.out_dir)


@app.callback()
def main(
    ctx: typer.Context,
    config: Annotated[
        Optional[Path],
        typer.Option("--config", help="Experiment config (key = value or YAML)"),
    ] = None,
    seed: Annotated[
        Optional[int],
        typer.Option("--seed", help="Override experiment.seed", min=0, max=2**64 - 1),
    ] = None,
    out: Annotated[
        Optional[Path],
        typer.Option("--out", help="Override paths.out_dir"),
    ] = None,
    verbose: Annotated[
        bool,
        typer.Option("--verbose", help="Log at debug level"),
    ] = False,
    version: Annotated[
        Optional[bool],
        typer.Option("--version", callback=version_callback, is_eager=True),
    ] = None,
) -> None:
    """QFVAE - Quantized fine-grained prosody VAE experiments."""
    setup_logging(logging.DEBUG if verbose else logging.INFO)
    ctx.obj = GlobalOptions(config_path=config, seed=seed, out_dir=out)


@app.command("gen-corpus")
def gen_corpus(ctx: typer.Context) -> None:
    """Generate the synthetic train and test corpora."""
    try:
        summary = cmd_gen_corpus(_load_config(ctx))
        table = Table(title="Corpus", show_header=True)
        table.add_column("Split", style="cyan")
        table.add_column("Utterances", justify="right", style="green")
        table.add_column("Frames", justify="right")
        table.add_column("File")
        table.add_row("train", str(summary.train_count), str(summary.train_frames), str(summary.train_path))
        table.add_row("test", str(summary.test_count), str(summary.test_frames), str(summary.test_path))
        console.print(table)
    except (QFVAEError, OSError) as e:
        _fail(e)


@app.command()
def train(
    ctx: typer.Context,
    resume: Annotated[
        bool,
        typer.Option("--resume", help="Continue from the run's stage-1 checkpoint"),
    ] = False,
) -> None:
    """Train the stage-1 model."""
    try:
        config = _load_config(ctx)
        console.print(f"[cyan]Training run: {config.experiment.name}[/cyan]")
        summary = cmd_train(config, resume=resume)
        lines = [
            f"Model: [cyan]{summary.model}[/cyan]",
            f"Steps: {summary.steps}",
        ]
        if summary.final_loss is not None:
            lines.append(f"Final loss: {summary.final_loss:.4f}")
        if summary.perplexity is not None:
            lines.append(f"Codebook perplexity: {summary.perplexity:.2f}")
        lines.append(f"Checkpoint: {summary.checkpoint_path}")
        console.print(Panel("\n".join(lines), title="Training complete", border_style="green"))
    except (QFVAEError, OSError) as e:
        _fail(e)


@app.command("fit-prior")
def fit_prior(ctx: typer.Context) -> None:
    """Fit the autoregressive prior to the frozen stage-1 posteriors."""
    try:
        summary = cmd_fit_prior(_load_config(ctx))
        console.print(
            Panel(
                f"Prior: [cyan]{summary.kind}[/cyan]\n"
                f"Epochs: {summary.epochs}\n"
                f"Final loss: {summary.final_loss:.5f}\n"
                f"Checkpoint: {summary.checkpoint_path}",
                title="Prior fitted",
                border_style="green",
            )
        )
    except (QFVAEError, OSError) as e:
        _fail(e)


@app.command()
def sample(ctx: typer.Context) -> None:
    """Sample latents from the prior and decode them."""
    try:
        summary = cmd_sample(_load_config(ctx))
        console.print(
            f"[green]Wrote {summary.records} samples of {summary.utterances} utterances[/green] "
            f"to {summary.path}"
        )
    except (QFVAEError, OSError) as e:
        _fail(e)


@app.command("copy-synth")
def copy_synth(ctx: typer.Context) -> None:
    """Reconstruct the test set from posterior means."""
    try:
        summary = cmd_copy_synth(_load_config(ctx))
        console.print(f"[green]Reconstructed {summary.records} utterances[/green] to {summary.path}")
    except (QFVAEError, OSError) as e:
        _fail(e)


@app.command()
def evaluate(
    ctx: typer.Context,
    target: Annotated[
        EvaluationTarget,
        typer.Option("--target", help="Outputs to evaluate"),
    ] = EvaluationTarget.COPY_SYNTH,
    mcd_include_c0: Annotated[
        Optional[bool],
        typer.Option("--mcd-include-c0/--mcd-exclude-c0", help="Include c0 in MCD"),
    ] = None,
) -> None:
    """Compute metric records for copy synthesis or a sample set."""
    try:
        summary = cmd_evaluate(_load_config(ctx), target, include_c0=mcd_include_c0)
        table = Table(title=f"Summary: {target.value}", show_header=False)
        table.add_column("Metric", style="cyan")
        table.add_column("Mean", style="green", justify="right")
        for key, value in summary.metrics.summary.values.items():
            table.add_row(key, "-" if value is None else f"{value:.4f}")
        console.print(table)
        console.print(f"Records: {summary.path}")
    except (QFVAEError, OSError) as e:
        _fail(e)


@app.command()
def report(
    ctx: typer.Context,
    files: Annotated[
        Optional[list[Path]],
        typer.Argument(help="Metric files (defaults to every run under the output directory)"),
    ] = None,
) -> None:
    """Render reconstruction and diversity tables."""
    try:
        path, text = cmd_report(_load_config(ctx), files)
        console.print(text, markup=False, highlight=False)
        console.print(f"[dim]Saved to {path}[/dim]")
    except (QFVAEError, OSError) as e:
        _fail(e)


if __name__ == "__main__":
    app()
