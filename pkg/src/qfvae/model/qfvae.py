"""Stage-1 model: token encoder, reference alignment, latent posterior and attention decoder.

All graph builders work on padded batches so training, gradient checks and
single-utterance inference share one code path. The single-utterance
methods wrap a batch of one.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from qfvae.core.config import LatentMode, ModelConfig
from qfvae.core.constants import DECODE_EXIT_MASS, LOG_SIGMA_MAX, LOG_SIGMA_MIN
from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.corpus.models import Utterance
from qfvae.model import layers
from qfvae.model.vq import Codebook, init_codebook, quantize_all, quantize_node, vq_objective
from qfvae.numerics import tape
from qfvae.numerics.params import ParameterSet, add_linear, add_lstm, add_rnn, collect_grads, glorot
from qfvae.numerics.rng import RngStream
from qfvae.numerics.tape import Tensor

logger = logging.getLogger(__name__)

PRIOR_FLOOR = 1e-6

Params = dict[str, Tensor]


@dataclass
class TokenEncoding:
    """Per-token vectors Y_n, shape (N, E)."""

    vectors: np.ndarray

    @property
    def num_tokens(self) -> int:
        return int(self.vectors.shape[0])


@dataclass
class ReferenceAlignment:
    """Aligned reference vectors (N, R) and their attention over frames (N, T)."""

    vectors: np.ndarray
    weights: np.ndarray


@dataclass
class PosteriorSequence:
    """Diagonal Gaussian posterior per latent row."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.mu.shape != self.sigma.shape:
            raise DimensionError(f"mu {self.mu.shape} and sigma {self.sigma.shape} differ")

    @property
    def log_sigma(self) -> np.ndarray:
        return np.log(self.sigma)

    def __len__(self) -> int:
        return int(self.mu.shape[0])


@dataclass
class LatentSequence:
    """Continuous latents z, with class indices and codewords when quantized."""

    z: np.ndarray
    indices: np.ndarray | None = None
    quantized: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        """What the decoder consumes: codewords when quantized, z otherwise."""
        return self.z if self.quantized is None else self.quantized

    def __len__(self) -> int:
        return int(self.z.shape[0])


@dataclass
class DecoderOutput:
    """Predicted frames (T, F) and decoder attention (T, N)."""

    frames: np.ndarray
    attention: np.ndarray

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


@dataclass
class Batch:
    """Zero-padded utterances."""

    tokens: np.ndarray  # (B, N) int64
    token_mask: np.ndarray  # (B, N) bool
    frames: np.ndarray  # (B, T, F)
    frame_mask: np.ndarray  # (B, T) bool

    @classmethod
    def from_arrays(cls, tokens: Sequence[np.ndarray], frames: Sequence[np.ndarray]) -> "Batch":
        if len(tokens) != len(frames) or not tokens:
            raise DimensionError("a batch needs one frame matrix per token sequence")
        n_bins = frames[0].shape[1]
        max_n = max(len(t) for t in tokens)
        max_t = max(f.shape[0] for f in frames)
        batch = cls(
            tokens=np.zeros((len(tokens), max_n), dtype=np.int64),
            token_mask=np.zeros((len(tokens), max_n), dtype=bool),
            frames=np.zeros((len(tokens), max_t, n_bins)),
            frame_mask=np.zeros((len(tokens), max_t), dtype=bool),
        )
        for b, (tok, frm) in enumerate(zip(tokens, frames)):
            if frm.shape[1] != n_bins:
                raise DimensionError(f"frame width {frm.shape[1]} != {n_bins} in batch row {b}")
            batch.tokens[b, : len(tok)] = tok
            batch.token_mask[b, : len(tok)] = True
            batch.frames[b, : frm.shape[0]] = frm
            batch.frame_mask[b, : frm.shape[0]] = True
        return batch

    @classmethod
    def from_utterances(cls, utterances: Sequence[Utterance]) -> "Batch":
        return cls.from_arrays([u.tokens for u in utterances], [u.frames for u in utterances])

    @property
    def size(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def token_lengths(self) -> np.ndarray:
        return self.token_mask.sum(axis=1)

    @property
    def frame_lengths(self) -> np.ndarray:
        return self.frame_mask.sum(axis=1)


@dataclass
class LossBreakdown:
    """Batch-mean loss terms of one forward pass."""

    total: float
    recon: float
    kl: float
    vq: float = 0.0
    indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class _DecoderState:
    h: Tensor
    c: Tensor
    ctx: Tensor
    alpha: Tensor


def kl_standard(post: PosteriorSequence) -> np.ndarray:
    """
    KL(q || N(0, I)) per latent row.

    Args:
        post: Posterior with strictly positive sigma

    Returns:
        Non-negative array of shape (N,)
    """
    if np.any(post.sigma <= 0):
        raise DomainError("posterior sigma must be positive")
    mu, sigma = post.mu, post.sigma
    return 0.5 * np.sum(mu * mu + sigma * sigma - 1.0 - 2.0 * np.log(sigma), axis=-1)


def reparam_sample(post: PosteriorSequence, rng: RngStream) -> LatentSequence:
    """z = mu + sigma * eps with eps ~ N(0, I)."""
    return LatentSequence(z=post.mu + post.sigma * rng.normal(post.mu.shape))


def elbo_loss(
    predicted: Tensor | np.ndarray,
    target: np.ndarray,
    kl: Tensor | np.ndarray,
    beta: float,
    frame_mask: np.ndarray | None = None,
) -> Tensor:
    """
    Reconstruction error plus beta-weighted KL, averaged over the batch.

    The reconstruction term of one utterance is the squared error summed over
    bins and averaged over its valid frames.

    Args:
        predicted: Frames, shape (T, F) or (B, T, F)
        target: Reference frames of the same shape
        kl: Per-latent KL values, already zero on padding; (N,) or (B, N)
        beta: KL weight
        frame_mask: Valid frames, (B, T); all frames when None

    Returns:
        Scalar loss node
    """
    predicted = tape.constant(predicted)
    kl = tape.constant(kl)
    target = np.asarray(target, dtype=np.float64)
    if predicted.shape != target.shape:
        raise DimensionError(f"predicted {predicted.shape} and target {target.shape} differ")
    if predicted.ndim == 2:
        predicted = tape.reshape(predicted, (1,) + predicted.shape)
        target = target[None]
        kl = tape.reshape(kl, (1, -1))
    batch, steps = predicted.shape[0], predicted.shape[1]
    mask = np.ones((batch, steps)) if frame_mask is None else np.asarray(frame_mask, dtype=np.float64)
    if mask.shape != (batch, steps):
        raise DimensionError(f"frame mask {mask.shape} does not match frames {(batch, steps)}")
    weights = mask / np.maximum(mask.sum(axis=1, keepdims=True), 1.0)
    recon = tape.sum(tape.square(predicted - target) * weights[:, :, None])
    return (recon + beta * tape.sum(kl)) * (1.0 / batch)


class QFVAEModel:
    """Fine-grained (optionally quantized) or global-latent VAE over prosody.

    Parameters live in a :class:`ParameterSet`; the model object only holds
    hyperparameters and is safe to share between threads.
    """

    def __init__(self, config: ModelConfig, vocab_size: int, n_bins: int) -> None:
        self.config = config
        self.vocab_size = vocab_size
        self.n_bins = n_bins

    @property
    def latent_dim(self) -> int:
        return self.config.effective_latent_dim

    @property
    def memory_dim(self) -> int:
        return self.config.encoding_dim + self.latent_dim

    @property
    def is_global(self) -> bool:
        return self.config.latent_mode is LatentMode.GLOBAL

    @property
    def quantized(self) -> bool:
        return self.config.quantize

    def init_params(self, rng: RngStream) -> ParameterSet:
        """Fresh parameters; deterministic given the stream."""
        cfg = self.config
        scale = cfg.init_scale
        half = cfg.encoding_dim // 2
        params = ParameterSet()
        params["enc.embed"] = rng.split(0).normal((self.vocab_size, cfg.token_embed_dim)) * scale
        add_rnn(params, "enc.fwd", cfg.token_embed_dim, half, rng.split(1))
        add_rnn(params, "enc.bwd", cfg.token_embed_dim, half, rng.split(2))
        params["ref.query.w"] = glorot(rng.split(3), cfg.encoding_dim, cfg.attention_dim)
        params["ref.key.w"] = glorot(rng.split(4), self.n_bins, cfg.attention_dim)
        add_linear(params, "ref.value", self.n_bins, cfg.reference_dim, rng.split(5))
        add_linear(params, "post.mu", cfg.reference_dim, self.latent_dim, rng.split(6), scale)
        add_linear(params, "post.logsig", cfg.reference_dim, self.latent_dim, rng.split(7), scale)
        if self.quantized:
            codebook = init_codebook(cfg.codebook_size, self.latent_dim, rng.split(8))
            params["vq.codebook"] = codebook.embeddings
        add_linear(params, "dec.prenet", self.n_bins, cfg.prenet_dim, rng.split(9))
        add_lstm(
            params, "dec.lstm", cfg.prenet_dim + self.memory_dim, cfg.decoder_hidden, rng.split(10)
        )
        params["dec.query.w"] = glorot(rng.split(11), cfg.decoder_hidden, cfg.attention_dim)
        params["dec.key.w"] = glorot(rng.split(12), self.memory_dim, cfg.attention_dim)
        add_linear(
            params, "dec.gate", cfg.decoder_hidden, 1, rng.split(13), scale, bias=cfg.advance_bias
        )
        add_linear(params, "dec.out", cfg.decoder_hidden + self.memory_dim, self.n_bins, rng.split(14))
        logger.debug("Initialized %d parameters in %d blocks", params.size, len(params))
        return params

    def codebook(self, params: ParameterSet) -> Codebook | None:
        return Codebook(params["vq.codebook"]) if self.quantized else None

    def stage1_params(self, params: ParameterSet) -> ParameterSet:
        """The parameters this model owns, in registration order."""
        return ParameterSet({k: v for k, v in params.items() if k.split(".")[0] in _STAGE1_GROUPS})

    # Graph builders over padded batches

    def _check_tokens(self, tokens: np.ndarray, mask: np.ndarray) -> None:
        valid = tokens[mask]
        if valid.size and (valid.min() < 0 or valid.max() >= self.vocab_size):
            raise DomainError(f"token id outside vocabulary [0, {self.vocab_size})")

    def _encode(self, p: Params, tokens: np.ndarray, mask: np.ndarray) -> Tensor:
        self._check_tokens(tokens, mask)
        embedded = tape.take_rows(p["enc.embed"], tokens)
        return layers.bidirectional(embedded, p, "enc", mask.sum(axis=1))

    def _align(
        self, p: Params, encodings: Tensor, frames: np.ndarray, frame_mask: np.ndarray
    ) -> tuple[Tensor, Tensor]:
        if frames.shape[1] == 0:
            raise DomainError("cannot align against an empty frame matrix")
        frames_t = tape.constant(frames)
        query = tape.linear(encodings, p["ref.query.w"])
        key = tape.linear(frames_t, p["ref.key.w"])
        logits = tape.matmul(query, tape.swap_last(key)) * (1.0 / np.sqrt(self.config.attention_dim))
        weights = tape.softmax(logits + layers.mask_bias(frame_mask)[:, None, :], axis=-1)
        return tape.matmul(weights, layers.dense(frames_t, p, "ref.value")), weights

    def _posterior(self, p: Params, aligned: Tensor, token_mask: np.ndarray) -> tuple[Tensor, Tensor]:
        if self.is_global:
            counts = np.maximum(token_mask.sum(axis=1, keepdims=True), 1)
            weights = token_mask / counts
            aligned = tape.sum(aligned * weights[:, :, None], axis=1)
        mu = layers.dense(aligned, p, "post.mu")
        log_sigma = tape.clip(layers.dense(aligned, p, "post.logsig"), LOG_SIGMA_MIN, LOG_SIGMA_MAX)
        return mu, log_sigma

    def _broadcast_latent(self, latent: Tensor, num_tokens: int) -> Tensor:
        """Per-token latent memory: global latents are repeated over tokens."""
        if not self.is_global:
            return latent
        rows = tape.reshape(latent, (latent.shape[0], 1, latent.shape[-1]))
        return rows * np.ones((1, num_tokens, 1))

    def _decoder_memory(self, p: Params, encodings: Tensor, latent: Tensor) -> tuple[Tensor, Tensor]:
        memory = tape.concat([encodings, self._broadcast_latent(latent, encodings.shape[1])], axis=-1)
        return memory, tape.linear(memory, p["dec.key.w"])

    def _initial_state(self, batch: int, num_tokens: int) -> _DecoderState:
        alpha = np.zeros((batch, num_tokens))
        alpha[:, 0] = 1.0
        return _DecoderState(
            h=tape.constant(np.zeros((batch, self.config.decoder_hidden))),
            c=tape.constant(np.zeros((batch, self.config.decoder_hidden))),
            ctx=tape.constant(np.zeros((batch, self.memory_dim))),
            alpha=tape.constant(alpha),
        )

    def _decoder_step(
        self,
        p: Params,
        state: _DecoderState,
        previous: Tensor | np.ndarray,
        memory: Tensor,
        keys: Tensor,
        token_bias: np.ndarray,
    ) -> tuple[_DecoderState, Tensor, Tensor]:
        """One output frame. Returns (state, frame, advance probability)."""
        batch = keys.shape[0]
        attention_dim = keys.shape[-1]
        x = tape.tanh(layers.dense(previous, p, "dec.prenet"))
        h, c = layers.lstm_step(tape.concat([x, state.ctx], axis=-1), state.h, state.c, p, "dec.lstm")
        query = tape.reshape(tape.linear(h, p["dec.query.w"]), (batch, 1, attention_dim))
        content = tape.sum(keys * query, axis=-1) * (1.0 / np.sqrt(attention_dim))
        advance = tape.sigmoid(layers.dense(h, p, "dec.gate"))
        prior = (1.0 - advance) * state.alpha + advance * tape.shift_right(state.alpha)
        alpha = tape.softmax(content + tape.log(prior + PRIOR_FLOOR) + token_bias, axis=-1)
        ctx = layers.weighted_sum(alpha, memory)
        frame = layers.dense(tape.concat([h, ctx], axis=-1), p, "dec.out")
        return _DecoderState(h=h, c=c, ctx=ctx, alpha=alpha), frame, advance

    def _decode_teacher_forced(
        self, p: Params, memory: Tensor, keys: Tensor, token_mask: np.ndarray, frames: np.ndarray
    ) -> tuple[Tensor, Tensor]:
        batch, steps = frames.shape[0], frames.shape[1]
        token_bias = layers.mask_bias(token_mask)
        state = self._initial_state(batch, token_mask.shape[1])
        previous = np.zeros((batch, frames.shape[2]))
        outputs, attention = [], []
        for t in range(steps):
            state, frame, _ = self._decoder_step(p, state, previous, memory, keys, token_bias)
            outputs.append(frame)
            attention.append(state.alpha)
            previous = frames[:, t, :]
        return tape.stack(outputs, axis=1), tape.stack(attention, axis=1)

    def _decode_free_running(
        self, p: Params, memory: Tensor, keys: Tensor
    ) -> tuple[np.ndarray, np.ndarray]:
        num_tokens = memory.shape[1]
        token_bias = np.zeros((1, num_tokens))
        state = self._initial_state(1, num_tokens)
        previous: Tensor | np.ndarray = np.zeros((1, self.n_bins))
        exited = 0.0
        outputs, attention = [], []
        for _ in range(self.config.max_decode_frames):
            last = float(state.alpha.value[0, -1])
            state, frame, advance = self._decoder_step(p, state, previous, memory, keys, token_bias)
            outputs.append(frame.value[0])
            attention.append(state.alpha.value[0])
            previous = frame
            exited += float(advance.value[0, 0]) * last
            if exited >= DECODE_EXIT_MASS:
                break
        return np.stack(outputs), np.stack(attention)

    def _latent_rows(self, z: Tensor, token_mask: np.ndarray) -> np.ndarray:
        return token_mask if not self.is_global else np.ones(z.shape[:-1], dtype=bool)

    # Objectives

    def loss_and_grads(
        self, params: ParameterSet, batch: Batch, noise: np.ndarray
    ) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
        """
        Training objective and its gradient with respect to every parameter.

        Args:
            params: Current parameters
            batch: Padded utterances
            noise: Standard normal draws, shape of the posterior mean

        Returns:
            (loss terms, gradients by parameter name)
        """
        p = params.tensors()
        encodings = self._encode(p, batch.tokens, batch.token_mask)
        aligned, _ = self._align(p, encodings, batch.frames, batch.frame_mask)
        mu, log_sigma = self._posterior(p, aligned, batch.token_mask)
        if noise.shape != mu.shape:
            raise DimensionError(f"noise {noise.shape} does not match posterior {mu.shape}")
        z = mu + tape.exp(log_sigma) * noise
        kl = layers.standard_kl(mu, log_sigma)
        if not self.is_global:
            kl = kl * batch.token_mask

        latent, vq_node, indices = z, None, np.zeros(0, dtype=np.int64)
        if self.quantized:
            vq_node, assignment, _ = vq_objective(
                z, p["vq.codebook"], batch.token_mask, self.config.gamma, scale=1.0 / batch.size
            )
            codewords = np.zeros_like(z.value)
            codewords[batch.token_mask] = assignment.quantized
            latent = quantize_node(z, codewords)
            indices = assignment.indices

        memory, keys = self._decoder_memory(p, encodings, latent)
        predicted, _ = self._decode_teacher_forced(p, memory, keys, batch.token_mask, batch.frames)
        recon = elbo_loss(predicted, batch.frames, np.zeros(kl.shape), 0.0, batch.frame_mask)
        total = recon + self.config.beta * tape.sum(kl) * (1.0 / batch.size)
        if vq_node is not None:
            total = total + vq_node
        total.backward()
        breakdown = LossBreakdown(
            total=total.item(),
            recon=recon.item(),
            kl=float(np.sum(kl.value)) / batch.size,
            vq=0.0 if vq_node is None else vq_node.item(),
            indices=indices,
        )
        return breakdown, collect_grads(params, p)

    def recon_with_latents(
        self, params: ParameterSet, batch: Batch, latents: np.ndarray, quantize: bool
    ) -> tuple[float, np.ndarray]:
        """
        Reconstruction loss for given latents and its gradient with respect to them.

        With `quantize`, the decoder consumes the nearest codewords and the
        gradient is carried back to `latents` by the straight-through rule.

        Returns:
            (reconstruction loss, d loss / d latents)
        """
        p = {k: tape.constant(v) for k, v in params.items()}
        z = tape.parameter(np.array(latents, dtype=np.float64))
        latent = z
        if quantize:
            codebook = self.codebook(params)
            if codebook is None:
                raise DomainError("quantized reconstruction needs a codebook")
            rows = self._latent_rows(z, batch.token_mask)
            codewords = np.zeros_like(z.value)
            codewords[rows] = quantize_all(codebook, z.value[rows]).quantized
            latent = quantize_node(z, codewords)
        encodings = self._encode(p, batch.tokens, batch.token_mask)
        memory, keys = self._decoder_memory(p, encodings, latent)
        predicted, _ = self._decode_teacher_forced(p, memory, keys, batch.token_mask, batch.frames)
        no_kl = np.zeros(batch.token_mask.shape)
        recon = elbo_loss(predicted, batch.frames, no_kl, 0.0, batch.frame_mask)
        recon.backward()
        grad = np.zeros_like(z.value) if z.grad is None else z.grad
        return recon.item(), grad

    def draw_noise(self, batch: Batch, rng: RngStream) -> np.ndarray:
        """Standard normal draws shaped like the batch's posterior mean."""
        if self.is_global:
            return rng.normal((batch.size, self.latent_dim))
        return rng.normal((batch.size, batch.tokens.shape[1], self.latent_dim))

    # Single-utterance inference

    def encode_tokens(self, params: ParameterSet, tokens: np.ndarray) -> TokenEncoding:
        """Embedding lookup followed by the bidirectional recurrent pass."""
        tokens = np.asarray(tokens, dtype=np.int64)
        if tokens.ndim != 1 or tokens.size == 0:
            raise DimensionError("tokens must be a non-empty 1-D sequence")
        p = _constants(params)
        encoded = self._encode(p, tokens[None], np.ones((1, tokens.size), dtype=bool))
        return TokenEncoding(vectors=encoded.value[0])

    def align_reference(
        self, params: ParameterSet, encoding: TokenEncoding, frames: np.ndarray
    ) -> ReferenceAlignment:
        """Scaled dot-product attention from every token to the reference frames."""
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] == 0:
            raise DomainError("reference frames must be a non-empty T x F matrix")
        if frames.shape[1] != self.n_bins:
            raise DimensionError(f"reference has {frames.shape[1]} bins, model expects {self.n_bins}")
        p = _constants(params)
        mask = np.ones((1, frames.shape[0]), dtype=bool)
        aligned, weights = self._align(p, tape.constant(encoding.vectors[None]), frames[None], mask)
        return ReferenceAlignment(vectors=aligned.value[0], weights=weights.value[0])

    def posterior(self, params: ParameterSet, aligned: np.ndarray) -> PosteriorSequence:
        """Gaussian heads over the aligned vectors; global mode pools them first."""
        aligned = np.asarray(aligned, dtype=np.float64)
        p = _constants(params)
        mask = np.ones((1, aligned.shape[0]), dtype=bool)
        mu, log_sigma = self._posterior(p, tape.constant(aligned[None]), mask)
        mu_v, log_sigma_v = mu.value, log_sigma.value
        if not self.is_global:
            mu_v, log_sigma_v = mu_v[0], log_sigma_v[0]
        return PosteriorSequence(mu=mu_v, sigma=np.exp(log_sigma_v))

    def infer_posterior(
        self, params: ParameterSet, utterance: Utterance
    ) -> tuple[TokenEncoding, PosteriorSequence]:
        """Token encoding and posterior of an utterance against its own frames."""
        encoding = self.encode_tokens(params, utterance.tokens)
        alignment = self.align_reference(params, encoding, utterance.frames)
        return encoding, self.posterior(params, alignment.vectors)

    def quantize_latents(self, params: ParameterSet, latents: LatentSequence) -> LatentSequence:
        """Attach class indices and codewords; a no-op without a codebook."""
        codebook = self.codebook(params)
        if codebook is None:
            return latents
        assignment = quantize_all(codebook, latents.z)
        return LatentSequence(z=latents.z, indices=assignment.indices, quantized=assignment.quantized)

    def decode(
        self,
        params: ParameterSet,
        encoding: TokenEncoding,
        latents: LatentSequence,
        teacher_frames: np.ndarray | None = None,
    ) -> DecoderOutput:
        """
        Predict frames from token encodings and latents.

        Args:
            params: Model parameters
            encoding: Token encoding, N rows
            latents: N latent rows (one row in global mode)
            teacher_frames: Reference frames for teacher forcing; free-running when None

        Returns:
            DecoderOutput with row-stochastic attention
        """
        expected_rows = 1 if self.is_global else encoding.num_tokens
        values = np.asarray(latents.values, dtype=np.float64)
        if values.shape != (expected_rows, self.latent_dim):
            raise DimensionError(
                f"latents {values.shape} do not match {expected_rows} rows of dimension {self.latent_dim}"
            )
        p = _constants(params)
        latent = tape.constant(values[0:1] if self.is_global else values[None])
        memory, keys = self._decoder_memory(p, tape.constant(encoding.vectors[None]), latent)
        if teacher_frames is None:
            frames, attention = self._decode_free_running(p, memory, keys)
            return DecoderOutput(frames=frames, attention=attention)
        teacher_frames = np.asarray(teacher_frames, dtype=np.float64)
        if teacher_frames.ndim != 2 or teacher_frames.shape[1] != self.n_bins:
            raise DimensionError(f"teacher frames {teacher_frames.shape} must be T x {self.n_bins}")
        mask = np.ones((1, encoding.num_tokens), dtype=bool)
        predicted, attention = self._decode_teacher_forced(p, memory, keys, mask, teacher_frames[None])
        return DecoderOutput(frames=predicted.value[0], attention=attention.value[0])

    def reconstruct(
        self, params: ParameterSet, utterance: Utterance
    ) -> tuple[DecoderOutput, LatentSequence]:
        """Copy synthesis: decode the posterior means against the reference frames."""
        encoding, post = self.infer_posterior(params, utterance)
        latents = self.quantize_latents(params, LatentSequence(z=post.mu))
        return self.decode(params, encoding, latents, teacher_frames=utterance.frames), latents


_STAGE1_GROUPS = {"enc", "ref", "post", "vq", "dec"}


def _constants(params: ParameterSet) -> Params:
    return {name: tape.constant(value) for name, value in params.items()}
