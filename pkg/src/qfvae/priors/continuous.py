"""Autoregressive Gaussian prior over continuous latent sequences."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qfvae.core.config import PriorConfig
from qfvae.core.constants import LOG_SIGMA_MAX, LOG_SIGMA_MIN
from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.model import layers
from qfvae.model.qfvae import LatentSequence, PosteriorSequence, TokenEncoding
from qfvae.model.vq import Codebook, quantize_all
from qfvae.numerics import tape
from qfvae.numerics.params import ParameterSet, add_linear, add_lstm, collect_grads
from qfvae.numerics.rng import RngStream
from qfvae.numerics.tape import Tensor
from qfvae.priors.fitting import FitResult, fit_loop

logger = logging.getLogger(__name__)

PREFIX = "cprior"


def kl_gaussians(
    mu_q: np.ndarray, sigma_q: np.ndarray, mu_p: np.ndarray, sigma_p: np.ndarray
) -> float:
    """
    KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)) for diagonal Gaussians, summed over all entries.

    Raises:
        DomainError: If any standard deviation is not positive
        DimensionError: If the shapes disagree
    """
    mu_q, sigma_q, mu_p, sigma_p = (np.asarray(a, dtype=np.float64) for a in (mu_q, sigma_q, mu_p, sigma_p))
    if not mu_q.shape == sigma_q.shape == mu_p.shape == sigma_p.shape:
        raise DimensionError("both Gaussians must have the same shape")
    if np.any(sigma_q <= 0) or np.any(sigma_p <= 0):
        raise DomainError("standard deviations must be positive")
    terms = np.log(sigma_p / sigma_q) + (sigma_q**2 + (mu_q - mu_p) ** 2) / (2.0 * sigma_p**2) - 0.5
    return float(np.sum(terms))


@dataclass
class ContinuousBatch:
    """Padded teacher sequences for the continuous prior."""

    teacher: np.ndarray  # sampled latents, (B, N, D)
    encodings: np.ndarray  # (B, N, E)
    mu_q: np.ndarray  # (B, N, D)
    log_sigma_q: np.ndarray  # (B, N, D)
    mask: np.ndarray  # (B, N) bool

    @classmethod
    def build(
        cls,
        teachers: Sequence[np.ndarray],
        encodings: Sequence[TokenEncoding],
        posteriors: Sequence[PosteriorSequence],
    ) -> "ContinuousBatch":
        size = len(teachers)
        steps = max(len(t) for t in teachers)
        dim = teachers[0].shape[1]
        enc_dim = encodings[0].vectors.shape[1]
        batch = cls(
            teacher=np.zeros((size, steps, dim)),
            encodings=np.zeros((size, steps, enc_dim)),
            mu_q=np.zeros((size, steps, dim)),
            log_sigma_q=np.zeros((size, steps, dim)),
            mask=np.zeros((size, steps), dtype=bool),
        )
        for b, (z, enc, post) in enumerate(zip(teachers, encodings, posteriors)):
            n = len(z)
            batch.teacher[b, :n] = z
            batch.encodings[b, :n] = enc.vectors
            batch.mu_q[b, :n] = post.mu
            batch.log_sigma_q[b, :n] = post.log_sigma
            batch.mask[b, :n] = True
        return batch


class ContinuousARPrior:
    """
    Single-layer LSTM over [z_{n-1}; Y_n] emitting a diagonal Gaussian for z_n.

    The recurrent state and the first input latent start at zero.
    """

    def __init__(self, latent_dim: int, encoding_dim: int, hidden_size: int = 64) -> None:
        self.latent_dim = latent_dim
        self.encoding_dim = encoding_dim
        self.hidden_size = hidden_size

    def init_params(self, rng: RngStream) -> ParameterSet:
        params = ParameterSet()
        add_lstm(params, f"{PREFIX}.lstm", self.latent_dim + self.encoding_dim, self.hidden_size, rng.split(0))
        add_linear(params, f"{PREFIX}.mu", self.hidden_size, self.latent_dim, rng.split(1), 0.1)
        add_linear(params, f"{PREFIX}.logsig", self.hidden_size, self.latent_dim, rng.split(2), 0.1)
        return params

    def _heads(self, p: dict[str, Tensor], hidden: Tensor) -> tuple[Tensor, Tensor]:
        mu = layers.dense(hidden, p, f"{PREFIX}.mu")
        log_sigma = tape.clip(layers.dense(hidden, p, f"{PREFIX}.logsig"), LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        return mu, log_sigma

    def _teacher_forced(
        self, p: dict[str, Tensor], teacher: np.ndarray, encodings: np.ndarray
    ) -> tuple[Tensor, Tensor]:
        batch, steps = teacher.shape[0], teacher.shape[1]
        previous = np.zeros_like(teacher)
        previous[:, 1:] = teacher[:, :-1]
        h: Tensor = tape.constant(np.zeros((batch, self.hidden_size)))
        c: Tensor = tape.constant(np.zeros((batch, self.hidden_size)))
        hidden = []
        for n in range(steps):
            x = np.concatenate([previous[:, n], encodings[:, n]], axis=-1)
            h, c = layers.lstm_step(tape.constant(x), h, c, p, f"{PREFIX}.lstm")
            hidden.append(h)
        return self._heads(p, tape.stack(hidden, axis=1))

    def loss_and_grads(
        self, params: ParameterSet, batch: ContinuousBatch
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Per-token mean KL(posterior || prior) and its parameter gradients."""
        if batch.teacher.shape[-1] != self.latent_dim or batch.encodings.shape[-1] != self.encoding_dim:
            raise DimensionError("batch dimensions do not match the prior")
        p = params.tensors()
        mu_p, log_sigma_p = self._teacher_forced(p, batch.teacher, batch.encodings)
        kl = layers.gaussian_kl(batch.mu_q, batch.log_sigma_q, mu_p, log_sigma_p)
        count = max(int(batch.mask.sum()), 1)
        loss = tape.sum(kl * batch.mask) * (1.0 / count)
        loss.backward()
        return loss.item(), collect_grads(params, p)

    def predict(
        self, params: ParameterSet, teacher: np.ndarray, encoding: TokenEncoding
    ) -> PosteriorSequence:
        """Prior mean and stddev at every step of one teacher-forced sequence."""
        teacher = np.asarray(teacher, dtype=np.float64)
        if teacher.shape != (encoding.num_tokens, self.latent_dim):
            raise DimensionError(f"teacher {teacher.shape} does not match {encoding.num_tokens} tokens")
        p = {k: tape.constant(v) for k, v in params.items()}
        mu, log_sigma = self._teacher_forced(p, teacher[None], encoding.vectors[None])
        return PosteriorSequence(mu=mu.value[0], sigma=np.exp(log_sigma.value[0]))

    def sample(
        self,
        params: ParameterSet,
        encoding: TokenEncoding,
        rng: RngStream,
        codebook: Codebook | None = None,
        scale: float = 1.0,
    ) -> LatentSequence:
        """
        Ancestral sampling, feeding each draw back as the next input.

        Args:
            params: Prior parameters
            encoding: Token encoding Y, N rows
            rng: Random stream
            codebook: Quantize the finished sequence when given
            scale: Multiplier on the prior stddev; 0 gives the mean rollout

        Returns:
            LatentSequence of N rows
        """
        if scale < 0:
            raise DomainError(f"scale must be non-negative, got {scale}")
        p = {k: tape.constant(v) for k, v in params.items()}
        h: Tensor = tape.constant(np.zeros((1, self.hidden_size)))
        c: Tensor = tape.constant(np.zeros((1, self.hidden_size)))
        previous = np.zeros(self.latent_dim)
        rows = []
        for n in range(encoding.num_tokens):
            x = np.concatenate([previous, encoding.vectors[n]])[None]
            h, c = layers.lstm_step(tape.constant(x), h, c, p, f"{PREFIX}.lstm")
            mu, log_sigma = self._heads(p, h)
            previous = mu.value[0] + scale * np.exp(log_sigma.value[0]) * rng.normal(self.latent_dim)
            rows.append(previous)
        z = np.stack(rows)
        if codebook is None:
            return LatentSequence(z=z)
        assignment = quantize_all(codebook, z)
        return LatentSequence(z=z, indices=assignment.indices, quantized=assignment.quantized)


def fit_prior_continuous(
    prior: ContinuousARPrior,
    posteriors: Sequence[PosteriorSequence],
    encodings: Sequence[TokenEncoding],
    config: PriorConfig,
    rng: RngStream,
    log_path: Path | None = None,
) -> FitResult:
    """
    Fit the prior to stage-1 posteriors by teacher forcing.

    Teacher inputs are single posterior samples, redrawn every time an
    utterance is visited.

    Args:
        prior: Prior architecture
        posteriors: Posterior of every training utterance
        encodings: Token encoding of every training utterance
        config: Optimization settings
        rng: Random stream
        log_path: JSON-lines file receiving the loss curve

    Returns:
        FitResult with the trained parameters
    """
    if len(posteriors) != len(encodings):
        raise DimensionError(f"{len(posteriors)} posteriors for {len(encodings)} encodings")
    for i, (post, enc) in enumerate(zip(posteriors, encodings)):
        if len(post) != enc.num_tokens:
            raise DimensionError(f"posterior {i} has {len(post)} rows for {enc.num_tokens} tokens")

    def objective(
        params: ParameterSet, chosen: Sequence[int], stream: RngStream
    ) -> tuple[float, dict[str, np.ndarray]]:
        teachers = [posteriors[i].mu + posteriors[i].sigma * stream.normal(posteriors[i].mu.shape) for i in chosen]
        batch = ContinuousBatch.build(
            teachers, [encodings[i] for i in chosen], [posteriors[i] for i in chosen]
        )
        return prior.loss_and_grads(params, batch)

    if not posteriors:
        raise DomainError("cannot fit the continuous prior on an empty training set")
    params = prior.init_params(rng.split(0))
    return fit_loop(objective, params, len(posteriors), config, rng.split(1), log_path, "continuous prior")


def sample_prior_continuous(
    prior: ContinuousARPrior,
    params: ParameterSet,
    encoding: TokenEncoding,
    rng: RngStream,
    codebook: Codebook | None = None,
    scale: float = 1.0,
) -> LatentSequence:
    """Draw a latent sequence from a fitted continuous prior."""
    return prior.sample(params, encoding, rng, codebook, scale)
