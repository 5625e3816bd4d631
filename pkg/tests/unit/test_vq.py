"""Tests for vector quantization."""

import numpy as np
import pytest

from qfvae.core.exceptions import DimensionError, DomainError
from qfvae.model.vq import (
    INIT_RANGE,
    Codebook,
    codebook_perplexity,
    init_codebook,
    quantize,
    quantize_all,
    quantize_node,
    vq_loss,
    vq_objective,
)
from qfvae.numerics import tape
from qfvae.numerics.rng import RngStream


def _brute_force(embeddings: np.ndarray, z: np.ndarray) -> int:
    best, best_dist = 0, np.inf
    for k, row in enumerate(embeddings):
        dist = float(np.sum((z - row) ** 2))
        if dist < best_dist:
            best, best_dist = k, dist
    return best


class TestQuantize:
    """Tests for nearest-neighbour assignment."""

    def test_matches_brute_force(self):
        root = RngStream(42)
        for trial in range(1000):
            rng = root.split(trial)
            size = int(rng.integers(1, 129))
            dim = int(rng.integers(1, 6))
            embeddings = rng.normal((size, dim))
            if trial % 4 == 0 and size > 1:
                # duplicate a row so ties occur
                src, dst = sorted(int(i) for i in rng.integers(0, size, 2))
                embeddings[max(dst, src)] = embeddings[min(dst, src)]
                z = embeddings[min(dst, src)] + 1e-3 * rng.normal(dim)
            else:
                z = rng.normal(dim)
            index, vector = quantize(Codebook(embeddings), z)
            assert index == _brute_force(embeddings, z)
            assert np.array_equal(vector, embeddings[index])

    def test_exact_tie_goes_to_smallest_index(self):
        book = Codebook(np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]]))
        assert quantize(book, np.array([0.0, 0.0]))[0] == 0
        assert quantize(book, np.array([1.0, 0.0]))[0] == 0

    def test_single_entry_codebook(self):
        book = Codebook(np.array([[0.5, 0.5]]))
        assignment = quantize_all(book, RngStream(0).normal((5, 2)))
        assert np.array_equal(assignment.indices, np.zeros(5))

    def test_quantize_all_matches_single(self):
        rng = RngStream(1)
        book = Codebook(rng.normal((8, 3)))
        latents = rng.normal((20, 3))
        assignment = quantize_all(book, latents)
        assert [quantize(book, z)[0] for z in latents] == assignment.indices.tolist()
        assert np.array_equal(assignment.quantized, book.embeddings[assignment.indices])

    def test_empty_batch(self):
        assignment = quantize_all(Codebook(np.ones((3, 2))), np.zeros((0, 2)))
        assert assignment.indices.shape == (0,)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            quantize(Codebook(np.ones((3, 2))), np.zeros(3))
        with pytest.raises(DimensionError):
            quantize_all(Codebook(np.ones((3, 2))), np.zeros((4, 3)))

    def test_codebook_validation(self):
        with pytest.raises(DimensionError):
            Codebook(np.zeros((0, 2)))
        with pytest.raises(DomainError):
            Codebook(np.array([[np.nan, 0.0]]))


class TestLosses:
    """Tests for the separated quantization and commitment terms."""

    def _setup(self):
        rng = RngStream(5)
        book = Codebook(rng.normal((4, 3)))
        latents = rng.normal((6, 3))
        return book, latents, quantize_all(book, latents)

    def test_zero_when_latents_on_codebook(self):
        book = Codebook(RngStream(0).normal((4, 2)))
        latents = book.embeddings[[0, 3, 3]]
        losses = vq_loss(book, latents, quantize_all(book, latents), gamma=0.25)
        assert losses.total == 0.0
        assert not np.any(losses.grad_codebook)

    def test_commitment_is_gamma_times_quantization(self):
        book, latents, assignment = self._setup()
        losses = vq_loss(book, latents, assignment, gamma=0.25)
        assert losses.commitment == pytest.approx(0.25 * losses.quantization)

    def test_codebook_gradient_matches_quantization_term(self):
        book, latents, assignment = self._setup()
        losses = vq_loss(book, latents, assignment, gamma=0.25)
        eps = 1e-6
        for k in range(book.size):
            for d in range(book.dim):
                plus, minus = book.embeddings.copy(), book.embeddings.copy()
                plus[k, d] += eps
                minus[k, d] -= eps
                f_plus = vq_loss(Codebook(plus), latents, assignment, 0.25).quantization
                f_minus = vq_loss(Codebook(minus), latents, assignment, 0.25).quantization
                assert losses.grad_codebook[k, d] == pytest.approx((f_plus - f_minus) / (2 * eps), abs=1e-6)

    def test_stop_gradient_contract(self):
        rng = RngStream(6)
        z = tape.parameter(rng.normal((2, 3, 2)))
        codebook = tape.parameter(rng.normal((4, 2)))
        valid = np.array([[True, True, False], [True, False, False]])

        loss, _, _ = vq_objective(z, codebook, valid, gamma=0.0)
        loss.backward()
        assert np.all(np.abs(z.grad) < 1e-8)

        z.grad = codebook.grad = None
        book = Codebook(codebook.value)
        flat = z.value[valid]
        assignment = quantize_all(book, flat)
        commitment_only = vq_loss(book, flat, assignment, gamma=1.0)
        assert np.array_equal(commitment_only.grad_latents, 2.0 * (flat - book.embeddings[assignment.indices]))
        # the commitment gradient never reaches the codebook
        loss, _, _ = vq_objective(z, codebook, valid, gamma=1.0)
        loss.backward()
        expected = np.zeros_like(codebook.value)
        np.add.at(expected, assignment.indices, -2.0 * (flat - book.embeddings[assignment.indices]))
        assert np.allclose(codebook.grad, expected, atol=1e-12)

    def test_single_token_values(self):
        book = Codebook(np.array([[0.0, 0.0]]))
        z = np.array([[1.0, 0.0]])
        losses = vq_loss(book, z, quantize_all(book, z), gamma=0.25)
        assert losses.quantization == pytest.approx(1.0)
        assert losses.commitment == pytest.approx(0.25)
        assert np.allclose(losses.grad_codebook, [[-2.0, 0.0]])
        assert np.allclose(losses.grad_latents, [[0.5, 0.0]])

    def test_zero_gamma_has_no_commitment(self):
        book, latents, assignment = self._setup()
        losses = vq_loss(book, latents, assignment, gamma=0.0)
        assert losses.commitment == 0.0
        assert not np.any(losses.grad_latents)

    def test_codebook_step_moves_toward_latent(self):
        rng = RngStream(9)
        for trial in range(50):
            draw = rng.split(trial)
            book = Codebook(draw.normal((4, 2)))
            z = draw.normal((1, 2))
            assignment = quantize_all(book, z)
            k = int(assignment.indices[0])
            losses = vq_loss(book, z, assignment, gamma=0.25)
            step = -0.1 * losses.grad_codebook[k]
            assert float(step @ (z[0] - book.embeddings[k])) > 0.0
            moved = book.embeddings[k] + step
            assert np.sum((z[0] - moved) ** 2) < np.sum((z[0] - book.embeddings[k]) ** 2)

    @pytest.mark.parametrize("gamma", [0.0, 0.25])
    def test_latent_gradient_is_commitment_only(self, gamma):
        # finite differences of gamma * ||z - sg[e]||^2 with the codebook held fixed
        rng = RngStream(10)
        z = tape.parameter(rng.normal((1, 3, 2)))
        codebook = tape.parameter(rng.normal((4, 2)))
        valid = np.ones((1, 3), dtype=bool)
        loss, assignment, _ = vq_objective(z, codebook, valid, gamma=gamma)
        loss.backward()
        fixed = codebook.value[assignment.indices]

        def commitment(latents: np.ndarray) -> float:
            return gamma * float(np.sum((latents - fixed) ** 2))

        eps = 1e-5
        numeric = np.zeros_like(z.value)
        for index in np.ndindex(*z.value.shape):
            plus, minus = z.value.copy(), z.value.copy()
            plus[index] += eps
            minus[index] -= eps
            numeric[index] = (commitment(plus[0]) - commitment(minus[0])) / (2 * eps)
        assert np.allclose(z.grad, numeric, atol=1e-8)
        if gamma == 0.0:
            assert np.all(np.abs(z.grad) < 1e-8)

    def test_padding_rows_get_no_gradient(self):
        rng = RngStream(7)
        z = tape.parameter(rng.normal((1, 4, 2)))
        codebook = tape.parameter(rng.normal((3, 2)))
        valid = np.array([[True, True, False, False]])
        loss, assignment, _ = vq_objective(z, codebook, valid, gamma=0.25, scale=0.5)
        loss.backward()
        assert assignment.indices.size == 2
        assert not np.any(z.grad[0, 2:])

    def test_rejects_negative_gamma(self):
        book, latents, assignment = self._setup()
        with pytest.raises(DomainError):
            vq_loss(book, latents, assignment, gamma=-0.1)


class TestStraightThrough:
    """Tests for the straight-through estimator."""

    def test_gradient_copied_unchanged(self):
        rng = RngStream(8)
        z = tape.parameter(rng.normal((3, 2)))
        book = Codebook(rng.normal((4, 2)))
        assignment = quantize_all(book, z.value)
        weights = rng.normal((3, 2))
        tape.sum(quantize_node(z, assignment.quantized) * weights).backward()
        assert np.array_equal(z.grad, weights)


class TestCodebook:
    """Tests for initialization and usage statistics."""

    def test_random_init_range(self):
        book = init_codebook(32, 3, RngStream(0))
        assert book.embeddings.shape == (32, 3)
        assert np.all(np.abs(book.embeddings) <= INIT_RANGE)

    def test_init_from_samples_uses_distinct_rows(self):
        samples = np.arange(20, dtype=np.float64).reshape(10, 2)
        book = init_codebook(4, 2, RngStream(1), samples)
        rows = {tuple(r) for r in book.embeddings}
        assert len(rows) == 4
        assert rows <= {tuple(r) for r in samples}

    def test_init_needs_enough_samples(self):
        with pytest.raises(DomainError):
            init_codebook(8, 2, RngStream(0), np.zeros((4, 2)))

    def test_perplexity(self):
        assert codebook_perplexity([0, 1, 2, 3], 4) == pytest.approx(4.0)
        assert codebook_perplexity([2, 2, 2], 4) == pytest.approx(1.0)
        assert 1.0 < codebook_perplexity([0, 0, 1], 4) < 2.0

    def test_perplexity_domain(self):
        with pytest.raises(DomainError):
            codebook_perplexity([], 4)
        with pytest.raises(DomainError):
            codebook_perplexity([4], 4)
