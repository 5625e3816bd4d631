"""Numerical core: random streams, primitives, the tape and gradient checks."""

from qfvae.numerics.functional import log_softmax, sample_categorical, sample_gaussian, softmax
from qfvae.numerics.gradcheck import GradReport, check_parameter_set, grad_check
from qfvae.numerics.optim import Adam, StepDecay, clip_by_global_norm
from qfvae.numerics.params import ParameterSet
from qfvae.numerics.rng import RngStream

__all__ = [
    "Adam",
    "GradReport",
    "ParameterSet",
    "RngStream",
    "StepDecay",
    "check_parameter_set",
    "clip_by_global_norm",
    "grad_check",
    "log_softmax",
    "sample_categorical",
    "sample_gaussian",
    "softmax",
]
