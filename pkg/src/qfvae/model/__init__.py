"""Stage-1 model, vector quantization and training."""

from qfvae.model.qfvae import (
    Batch,
    DecoderOutput,
    LatentSequence,
    LossBreakdown,
    PosteriorSequence,
    QFVAEModel,
    ReferenceAlignment,
    TokenEncoding,
    elbo_loss,
    kl_standard,
    reparam_sample,
)
from qfvae.model.training import TrainingState, train_stage1
from qfvae.model.vq import Assignment, Codebook, VQLoss, quantize, quantize_all, vq_loss

__all__ = [
    "Assignment",
    "Batch",
    "Codebook",
    "DecoderOutput",
    "LatentSequence",
    "LossBreakdown",
    "PosteriorSequence",
    "QFVAEModel",
    "ReferenceAlignment",
    "TokenEncoding",
    "TrainingState",
    "VQLoss",
    "elbo_loss",
    "kl_standard",
    "quantize",
    "quantize_all",
    "reparam_sample",
    "train_stage1",
    "vq_loss",
]
