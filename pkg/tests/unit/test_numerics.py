"""Tests for the tape, gradient checking, optimizer and random streams."""

import json

import numpy as np
import pytest

from qfvae.core.exceptions import DimensionError, DomainError, EvaluationError
from qfvae.numerics import tape
from qfvae.numerics.functional import (
    check_probabilities,
    log_softmax,
    sample_categorical,
    sample_gaussian,
    softmax,
)
from qfvae.numerics.gradcheck import (
    check_parameter_set,
    grad_check,
    relative_error,
    sample_coords,
)
from qfvae.numerics.optim import Adam, StepDecay, clip_by_global_norm, global_norm
from qfvae.numerics.params import ParameterSet, check_same_layout, collect_grads
from qfvae.numerics.rng import RngStream


def _scalar_grad(build, theta: np.ndarray) -> tuple[float, np.ndarray]:
    leaf = tape.parameter(theta)
    out = build(leaf)
    out.backward()
    grad = leaf.grad if leaf.grad is not None else np.zeros_like(theta)
    return out.item(), grad


class TestRngStream:
    """Tests for seeded streams."""

    def test_same_seed_same_draws(self):
        a, b = RngStream(7), RngStream(7)
        assert np.array_equal(a.normal(16), b.normal(16))

    def test_split_is_deterministic_and_distinct(self):
        root = RngStream(7)
        assert np.array_equal(root.split(3).normal(8), RngStream(7).split(3).normal(8))
        assert not np.array_equal(root.split(3).normal(8), root.split(4).normal(8))

    def test_split_does_not_advance_parent(self):
        a, b = RngStream(11), RngStream(11)
        a.split(0).normal(100)
        assert np.array_equal(a.normal(4), b.normal(4))

    def test_state_round_trip_through_json(self):
        stream = RngStream(5)
        stream.normal(3)
        state = json.loads(json.dumps(stream.state()))
        restored = RngStream.from_state(state)
        assert np.array_equal(stream.normal(10), restored.normal(10))

    def test_rejects_out_of_range_seed(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(2**64)

    def test_accepts_largest_seed(self):
        RngStream(2**64 - 1).split(0).normal(2)


class TestSampling:
    """Tests for plain-array sampling helpers."""

    def test_zero_stddev_returns_mean(self):
        mean = np.array([1.0, -2.0, 3.5])
        assert np.array_equal(sample_gaussian(RngStream(0), mean, np.zeros(3)), mean)

    def test_gaussian_shape_mismatch(self):
        with pytest.raises(DimensionError):
            sample_gaussian(RngStream(0), np.zeros(3), np.ones(2))

    def test_gaussian_negative_stddev(self):
        with pytest.raises(DomainError):
            sample_gaussian(RngStream(0), np.zeros(2), np.array([1.0, -1.0]))

    def test_gaussian_moments(self):
        draws = np.array([sample_gaussian(RngStream(0).split(i), np.array([2.0]), np.array([0.5]))[0] for i in range(4000)])
        assert abs(draws.mean() - 2.0) < 0.05
        assert abs(draws.std() - 0.5) < 0.05

    def test_categorical_never_picks_zero_mass(self):
        rng = RngStream(3)
        probs = np.array([0.0, 0.5, 0.0, 0.5])
        picks = {sample_categorical(rng, probs) for _ in range(500)}
        assert picks <= {1, 3}

    def test_categorical_frequencies(self):
        rng = RngStream(9)
        probs = np.array([0.2, 0.3, 0.5])
        counts = np.bincount([sample_categorical(rng, probs) for _ in range(6000)], minlength=3)
        assert np.allclose(counts / counts.sum(), probs, atol=0.03)

    def test_categorical_rejects_bad_vectors(self):
        with pytest.raises(DomainError):
            check_probabilities(np.array([0.5, 0.6]))
        with pytest.raises(DomainError):
            check_probabilities(np.array([1.5, -0.5]))
        with pytest.raises(DimensionError):
            check_probabilities(np.array([]))

    def test_softmax_is_stable(self):
        logits = np.array([1000.0, 1001.0, 999.0])
        probs = softmax(logits)
        assert np.all(np.isfinite(probs))
        assert probs.sum() == pytest.approx(1.0)
        assert np.allclose(log_softmax(logits), np.log(probs))


class TestTape:
    """Tests for tape gradients against central differences."""

    def test_broadcast_arithmetic(self):
        b = np.array([0.3, -0.7, 1.1])

        def build(x):
            return tape.sum(tape.square(x * b + 2.0 - x) * 0.5)

        report = grad_check(lambda t: _scalar_grad(build, t), RngStream(0).normal((2, 3)))
        assert report.passed()

    def test_ndarray_on_left_dispatches_to_tensor(self):
        x = tape.parameter(np.ones(3))
        out = np.array([1.0, 2.0, 3.0]) * x
        assert isinstance(out, tape.Tensor)
        tape.sum(out).backward()
        assert np.array_equal(x.grad, [1.0, 2.0, 3.0])

    def test_softmax_and_log_softmax(self):
        w = RngStream(1).normal((3, 4))

        def build(x):
            return tape.sum(tape.softmax(x, axis=-1) * w) + tape.sum(tape.log_softmax(x, axis=0) * w)

        report = grad_check(lambda t: _scalar_grad(build, t), RngStream(2).normal((3, 4)))
        assert report.passed()

    def test_shape_ops(self):
        w = RngStream(3).normal((4, 2))

        def build(x):
            parts = tape.concat([x[:, :1], tape.shift_right(x)[:, 1:]], axis=-1)
            stacked = tape.stack([parts, tape.swap_last(tape.reshape(x, (2, 4)))], axis=0)
            return tape.sum(tape.tanh(stacked) * w) + tape.sum(tape.expand_dims(x, 0) * 0.1)

        report = grad_check(lambda t: _scalar_grad(build, t), RngStream(4).normal((4, 2)))
        assert report.passed()

    def test_take_rows_accumulates_repeats(self):
        table = tape.parameter(np.zeros((4, 2)))
        tape.sum(tape.take_rows(table, np.array([[1, 1], [3, 1]]))).backward()
        assert np.array_equal(table.grad[:, 0], [0.0, 3.0, 0.0, 1.0])

    def test_permute_steps(self):
        perm = np.array([[2, 0, 1], [0, 2, 1]])
        w = RngStream(5).normal((2, 3, 2))

        def build(x):
            return tape.sum(tape.square(tape.permute_steps(x, perm)) * w)

        report = grad_check(lambda t: _scalar_grad(build, t), RngStream(6).normal((2, 3, 2)))
        assert report.passed()

    def test_clip_gradient_zero_outside(self):
        x = tape.parameter(np.array([-2.0, 0.5, 3.0]))
        tape.sum(tape.clip(x, -1.0, 1.0)).backward()
        assert np.array_equal(x.grad, [0.0, 1.0, 0.0])

    def test_stop_gradient(self):
        x = tape.parameter(np.array([1.0, 2.0]))
        tape.sum(x * tape.stop_gradient(x)).backward()
        assert np.array_equal(x.grad, [1.0, 2.0])

    def test_linear_weight_and_input(self):
        rng = RngStream(7)
        x0, w0, b0 = rng.normal((2, 3, 4)), rng.normal((4, 5)), rng.normal(5)
        target = rng.normal((2, 3, 5))

        def by_weight(w):
            return tape.sum(tape.square(tape.linear(tape.constant(x0), w, tape.constant(b0)) - target))

        def by_input(x):
            return tape.sum(tape.square(tape.linear(x, tape.constant(w0), tape.constant(b0)) - target))

        assert grad_check(lambda t: _scalar_grad(by_weight, t), w0).passed()
        assert grad_check(lambda t: _scalar_grad(by_input, t), x0).passed()

    def test_lstm_cell(self):
        rng = RngStream(8)
        hidden, n_in = 3, 2
        x0, h0, c0 = rng.normal((2, n_in)), rng.normal((2, hidden)), rng.normal((2, hidden))
        w0, b0 = rng.normal((n_in + hidden, 4 * hidden)) * 0.5, rng.normal(4 * hidden) * 0.5
        mix = rng.normal((2, 2 * hidden))

        def by_weight(w):
            out = tape.lstm_cell(tape.constant(x0), tape.constant(h0), tape.constant(c0), w, tape.constant(b0))
            return tape.sum(out * mix)

        def by_cell(c):
            out = tape.lstm_cell(tape.constant(x0), tape.constant(h0), c, tape.constant(w0), tape.constant(b0))
            return tape.sum(out * mix)

        assert grad_check(lambda t: _scalar_grad(by_weight, t), w0).passed()
        assert grad_check(lambda t: _scalar_grad(by_cell, t), c0).passed()

    def test_rnn_cell_over_time(self):
        rng = RngStream(9)
        xs = rng.normal((4, 1, 2))
        w0, b0 = rng.normal((5, 3)) * 0.5, np.zeros(3)

        def build(w):
            h = tape.constant(np.zeros((1, 3)))
            total = tape.constant(0.0)
            for x in xs:
                h = tape.rnn_cell(tape.constant(x), h, w, tape.constant(b0))
                total = total + tape.sum(h)
            return total

        assert grad_check(lambda t: _scalar_grad(build, t), w0).passed()


class TestGradCheck:
    """Tests for the checker itself."""

    def test_detects_wrong_gradient(self):
        report = grad_check(lambda t: (float(np.sum(t**2)), 3.0 * t), np.array([1.0, 2.0]))
        assert not report.passed(1e-2)
        assert report.max_rel_error == pytest.approx(1.0 / 3.0, rel=1e-4)

    def test_relative_error_floor(self):
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1e-12, 0.0) < 1e-3

    def test_rejects_non_positive_eps(self):
        with pytest.raises(DomainError):
            grad_check(lambda t: (0.0, t), np.zeros(1), eps=0.0)

    def test_non_finite_loss(self):
        with pytest.raises(EvaluationError):
            grad_check(lambda t: (float("nan"), t), np.zeros(2))

    def test_sample_coords_prefers_strong(self):
        grad = np.array([[0.0, 5.0], [1e-9, 2.0]])
        coords = sample_coords(grad, 2, RngStream(0), min_grad=1e-3)
        assert sorted(coords) == [(0, 1), (1, 1)]

    def test_check_parameter_set(self):
        params = ParameterSet({"a": np.array([1.0, -2.0]), "b": np.array([[0.5]])})

        def objective(p):
            leaves = p.tensors()
            loss = tape.sum(tape.square(leaves["a"])) * tape.sum(leaves["b"])
            loss.backward()
            return loss.item(), collect_grads(p, leaves)

        reports = check_parameter_set(objective, params, per_group=None)
        assert [r.name for r in reports] == ["a", "b"]
        assert all(r.passed() for r in reports)


class TestOptim:
    """Tests for Adam, clipping and decay."""

    def test_clip_by_global_norm(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        clipped, norm = clip_by_global_norm(grads, 1.0)
        assert norm == pytest.approx(5.0)
        assert global_norm(clipped) == pytest.approx(1.0)
        same, _ = clip_by_global_norm(grads, 10.0)
        assert same is grads

    def test_step_decay(self):
        schedule = StepDecay(base=1e-3, every=10, rate=0.5)
        assert schedule(9) == pytest.approx(1e-3)
        assert schedule(10) == pytest.approx(5e-4)
        assert schedule(25) == pytest.approx(2.5e-4)

    def test_adam_minimizes_quadratic(self):
        params = ParameterSet({"x": np.array([3.0, -2.0])})
        adam = Adam(StepDecay(0.1, 1000, 1.0), clip_norm=10.0)
        for _ in range(400):
            adam.apply(params, {"x": 2.0 * params["x"]})
        assert np.allclose(params["x"], 0.0, atol=5e-2)

    def test_adam_state_round_trip(self):
        params = ParameterSet({"x": np.array([1.0])})
        adam = Adam(StepDecay(0.1, 1000, 1.0), clip_norm=10.0)
        adam.apply(params, {"x": np.array([0.5])})
        restored = Adam(StepDecay(0.1, 1000, 1.0), clip_norm=10.0)
        restored.load_state_arrays(adam.state_arrays(), adam.step)
        a, b = params.copy(), params.copy()
        adam.apply(a, {"x": np.array([0.2])})
        restored.apply(b, {"x": np.array([0.2])})
        assert a.equals(b)


class TestParameterSet:
    """Tests for named parameter blocks."""

    def test_checksum_tracks_values(self):
        a = ParameterSet({"w": np.ones((2, 2))})
        b = a.copy()
        assert a.checksum() == b.checksum()
        b["w"][0, 0] = 2.0
        assert a.checksum() != b.checksum()
        assert not a.equals(b)

    def test_subset_and_layout(self):
        p = ParameterSet({"enc.w": np.zeros(2), "dec.w": np.zeros(3)})
        assert p.subset("dec.").names() == ["dec.w"]
        with pytest.raises(DimensionError):
            check_same_layout(p, ParameterSet({"enc.w": np.zeros(2), "dec.w": np.zeros(4)}))
