"""Stage-2 priors and sampling."""

from qfvae.priors.continuous import (
    ContinuousARPrior,
    fit_prior_continuous,
    kl_gaussians,
    sample_prior_continuous,
)
from qfvae.priors.discrete import (
    DiscreteARPrior,
    fit_prior_discrete,
    fixed_classes,
    posterior_classes,
    sample_prior_discrete,
)
from qfvae.priors.fitting import FitResult
from qfvae.priors.independent import adjacent_discontinuity, sample_independent

__all__ = [
    "ContinuousARPrior",
    "DiscreteARPrior",
    "FitResult",
    "adjacent_discontinuity",
    "fit_prior_continuous",
    "fit_prior_discrete",
    "fixed_classes",
    "kl_gaussians",
    "posterior_classes",
    "sample_independent",
    "sample_prior_continuous",
    "sample_prior_discrete",
]
