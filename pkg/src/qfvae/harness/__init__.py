"""Experiment pipeline, artifact formats and reports."""

from qfvae.harness.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
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
from qfvae.harness.records import MetricKind, MetricSet, read_metrics, write_metrics
from qfvae.harness.report import render_report
from qfvae.harness.samples import SampleRecord, read_samples, write_samples

__all__ = [
    "Checkpoint",
    "EvaluationTarget",
    "MetricKind",
    "MetricSet",
    "SampleRecord",
    "cmd_copy_synth",
    "cmd_evaluate",
    "cmd_fit_prior",
    "cmd_gen_corpus",
    "cmd_report",
    "cmd_sample",
    "cmd_train",
    "load_checkpoint",
    "read_metrics",
    "read_samples",
    "render_report",
    "save_checkpoint",
    "write_metrics",
    "write_samples",
]
