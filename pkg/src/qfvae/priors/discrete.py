"""Autoregressive categorical prior over codebook classes."""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from qfvae.core.config import PriorConfig
from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.model import layers
from qfvae.model.qfvae import LatentSequence, PosteriorSequence, TokenEncoding
from qfvae.model.vq import Codebook, quantize_all
from qfvae.numerics import tape
from qfvae.numerics.functional import sample_categorical, softmax
from qfvae.numerics.params import ParameterSet, add_linear, add_lstm, collect_grads
from qfvae.numerics.rng import RngStream
from qfvae.numerics.tape import Tensor
from qfvae.priors.fitting import FitResult, fit_loop

logger = logging.getLogger(__name__)

PREFIX = "dprior"

# Class sequence of training item `index`, possibly redrawn on every call
ClassSampler = Callable[[int, RngStream], np.ndarray]


def fixed_classes(sequences: Sequence[np.ndarray]) -> ClassSampler:
    """Sampler returning the same class sequence every time."""
    frozen = [np.asarray(s, dtype=np.int64) for s in sequences]
    return lambda index, rng: frozen[index]


def posterior_classes(posteriors: Sequence[PosteriorSequence], codebook: Codebook) -> ClassSampler:
    """Sampler drawing one posterior sample per call and quantizing it."""

    def draw(index: int, rng: RngStream) -> np.ndarray:
        post = posteriors[index]
        z = post.mu + post.sigma * rng.normal(post.mu.shape)
        return quantize_all(codebook, z).indices

    return draw


@dataclass
class DiscreteBatch:
    """Padded class sequences and token encodings."""

    classes: np.ndarray  # (B, N) int64
    encodings: np.ndarray  # (B, N, E)
    mask: np.ndarray  # (B, N) bool

    @classmethod
    def build(cls, sequences: Sequence[np.ndarray], encodings: Sequence[TokenEncoding]) -> "DiscreteBatch":
        size = len(sequences)
        steps = max(len(s) for s in sequences)
        batch = cls(
            classes=np.zeros((size, steps), dtype=np.int64),
            encodings=np.zeros((size, steps, encodings[0].vectors.shape[1])),
            mask=np.zeros((size, steps), dtype=bool),
        )
        for b, (seq, enc) in enumerate(zip(sequences, encodings)):
            if len(seq) != enc.num_tokens:
                raise DimensionError(f"class sequence of {len(seq)} for {enc.num_tokens} tokens")
            batch.classes[b, : len(seq)] = seq
            batch.encodings[b, : len(seq)] = enc.vectors
            batch.mask[b, : len(seq)] = True
        return batch


class DiscreteARPrior:
    """
    Single-layer LSTM over [embed(k_{n-1}); Y_n] emitting logits over K classes.

    The class embedding table is separate from the stage-1 codebook. The
    first step receives a zero vector in place of a class embedding.
    """

    def __init__(self, num_classes: int, embed_dim: int, encoding_dim: int, hidden_size: int = 64) -> None:
        self.num_classes = num_classes
        self.embed_dim = embed_dim
        self.encoding_dim = encoding_dim
        self.hidden_size = hidden_size

    def init_params(self, rng: RngStream) -> ParameterSet:
        params = ParameterSet()
        params[f"{PREFIX}.embed"] = 0.1 * rng.split(0).normal((self.num_classes, self.embed_dim))
        add_lstm(params, f"{PREFIX}.lstm", self.embed_dim + self.encoding_dim, self.hidden_size, rng.split(1))
        add_linear(params, f"{PREFIX}.logits", self.hidden_size, self.num_classes, rng.split(2), 0.1)
        return params

    def _check_classes(self, classes: np.ndarray) -> None:
        if classes.size and (classes.min() < 0 or classes.max() >= self.num_classes):
            raise DomainError(f"class index outside [0, {self.num_classes})")

    def _teacher_logits(self, p: dict[str, Tensor], classes: np.ndarray, encodings: np.ndarray) -> Tensor:
        batch, steps = classes.shape
        previous = np.zeros_like(classes)
        previous[:, 1:] = classes[:, :-1]
        first = np.ones((batch, steps, 1))
        first[:, 0] = 0.0
        embedded = tape.take_rows(p[f"{PREFIX}.embed"], previous) * first
        h: Tensor = tape.constant(np.zeros((batch, self.hidden_size)))
        c: Tensor = tape.constant(np.zeros((batch, self.hidden_size)))
        hidden = []
        for n in range(steps):
            x = tape.concat([embedded[:, n, :], encodings[:, n]], axis=-1)
            h, c = layers.lstm_step(x, h, c, p, f"{PREFIX}.lstm")
            hidden.append(h)
        return layers.dense(tape.stack(hidden, axis=1), p, f"{PREFIX}.logits")

    def loss_and_grads(self, params: ParameterSet, batch: DiscreteBatch) -> tuple[float, dict[str, np.ndarray]]:
        """Per-token mean next-class cross-entropy, in nats, and its gradients."""
        self._check_classes(batch.classes[batch.mask])
        p = params.tensors()
        log_probs = tape.log_softmax(self._teacher_logits(p, batch.classes, batch.encodings), axis=-1)
        targets = np.eye(self.num_classes)[batch.classes] * batch.mask[:, :, None]
        count = max(int(batch.mask.sum()), 1)
        loss = tape.sum(log_probs * targets) * (-1.0 / count)
        loss.backward()
        return loss.item(), collect_grads(params, p)

    def sample(
        self,
        params: ParameterSet,
        encoding: TokenEncoding,
        rng: RngStream,
        codebook: Codebook,
        temperature: float = 1.0,
        greedy: bool = False,
    ) -> LatentSequence:
        """
        Ancestral sampling of class indices; latents are the chosen codewords.

        Args:
            params: Prior parameters
            encoding: Token encoding Y, N rows
            rng: Random stream
            codebook: Stage-1 codebook providing the output rows
            temperature: Softmax temperature (> 0)
            greedy: Take the most likely class at every step

        Returns:
            LatentSequence whose z and codewords are the codebook rows
        """
        if temperature <= 0:
            raise DomainError("temperature must be positive")
        if codebook.size != self.num_classes:
            raise DimensionError(f"codebook has {codebook.size} rows, prior has {self.num_classes} classes")
        p = {k: tape.constant(v) for k, v in params.items()}
        h: Tensor = tape.constant(np.zeros((1, self.hidden_size)))
        c: Tensor = tape.constant(np.zeros((1, self.hidden_size)))
        previous = np.zeros(self.embed_dim)
        indices = np.zeros(encoding.num_tokens, dtype=np.int64)
        for n in range(encoding.num_tokens):
            x = np.concatenate([previous, encoding.vectors[n]])[None]
            h, c = layers.lstm_step(tape.constant(x), h, c, p, f"{PREFIX}.lstm")
            logits = layers.dense(h, p, f"{PREFIX}.logits").value[0]
            if greedy:
                k = int(np.argmax(logits))
            else:
                k = sample_categorical(rng, softmax(logits / temperature))
            indices[n] = k
            previous = params[f"{PREFIX}.embed"][k]
        rows = codebook.embeddings[indices].copy()
        return LatentSequence(z=rows, indices=indices, quantized=rows.copy())


def fit_prior_discrete(
    prior: DiscreteARPrior,
    classes: ClassSampler,
    encodings: Sequence[TokenEncoding],
    config: PriorConfig,
    rng: RngStream,
    log_path: Path | None = None,
) -> FitResult:
    """
    Fit the prior as a next-class language model over codebook classes.

    Args:
        prior: Prior architecture
        classes: Class sequence of each training utterance
        encodings: Token encoding of every training utterance
        config: Optimization settings
        rng: Random stream
        log_path: JSON-lines file receiving the loss curve

    Returns:
        FitResult with the trained parameters
    """
    if not encodings:
        raise DomainError("cannot fit the discrete prior on an empty training set")

    def objective(
        params: ParameterSet, chosen: Sequence[int], stream: RngStream
    ) -> tuple[float, dict[str, np.ndarray]]:
        sequences = [classes(i, stream) for i in chosen]
        batch = DiscreteBatch.build(sequences, [encodings[i] for i in chosen])
        return prior.loss_and_grads(params, batch)

    params = prior.init_params(rng.split(0))
    return fit_loop(objective, params, len(encodings), config, rng.split(1), log_path, "discrete prior")


def sample_prior_discrete(
    prior: DiscreteARPrior,
    params: ParameterSet,
    encoding: TokenEncoding,
    rng: RngStream,
    codebook: Codebook,
    temperature: float = 1.0,
    greedy: bool = False,
) -> LatentSequence:
    """Draw a codeword sequence from a fitted discrete prior."""
    return prior.sample(params, encoding, rng, codebook, temperature, greedy)
