"""Central finite-difference gradient checking."""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from qfvae.core.constants import GRAD_CHECK_FLOOR
from qfvae.core.exceptions import DomainError, EvaluationError
from qfvae.numerics.params import ParameterSet
from qfvae.numerics.rng import RngStream

LossAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]
Objective = Callable[[ParameterSet], tuple[float, dict[str, np.ndarray]]]


@dataclass
class GradReport:
    """Worst coordinate found by a gradient check."""

    name: str
    max_rel_error: float
    analytic: float
    numeric: float
    index: tuple[int, ...]
    checked: int

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_rel_error < tolerance


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| / max(|a|, |n|, floor)."""
    denom = max(abs(analytic), abs(numeric), GRAD_CHECK_FLOOR)
    return abs(analytic - numeric) / denom


def _finite(value: float, where: str) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise EvaluationError(f"Non-finite loss {value} {where}")
    return value


def grad_check(
    loss_fn: LossAndGrad,
    params: np.ndarray,
    eps: float = 1e-5,
    coords: list[tuple[int, ...]] | None = None,
    name: str = "params",
) -> GradReport:
    """
    Compare an analytic gradient against central differences.

    Args:
        loss_fn: Maps a parameter array to (loss, gradient of the same shape)
        params: Point to check at; not modified
        eps: Perturbation size
        coords: Coordinates to check (all when None)
        name: Label for the report

    Returns:
        GradReport for the coordinate with the largest relative error
    """
    if eps <= 0:
        raise DomainError("eps must be positive")
    theta = np.array(params, dtype=np.float64)
    loss, analytic = loss_fn(theta.copy())
    _finite(loss, "at the check point")
    analytic = np.asarray(analytic, dtype=np.float64).reshape(theta.shape)
    if coords is None:
        coords = [tuple(int(i) for i in idx) for idx in np.ndindex(theta.shape)]

    worst = GradReport(name=name, max_rel_error=0.0, analytic=0.0, numeric=0.0, index=(), checked=0)
    for idx in coords:
        plus = theta.copy()
        plus[idx] += eps
        minus = theta.copy()
        minus[idx] -= eps
        f_plus = _finite(loss_fn(plus)[0], f"at {name}{list(idx)} + eps")
        f_minus = _finite(loss_fn(minus)[0], f"at {name}{list(idx)} - eps")
        numeric = (f_plus - f_minus) / (2.0 * eps)
        err = relative_error(float(analytic[idx]), numeric)
        worst.checked += 1
        if err >= worst.max_rel_error:
            worst.max_rel_error = err
            worst.analytic = float(analytic[idx])
            worst.numeric = numeric
            worst.index = idx
    return worst


def sample_coords(
    grad: np.ndarray, count: int, rng: RngStream, min_grad: float = 0.0
) -> list[tuple[int, ...]]:
    """
    Up to `count` distinct coordinates, drawn without replacement.

    Coordinates whose analytic gradient is below `min_grad` in magnitude are
    used only when too few others exist; the largest of them come first.
    """
    flat_grad = np.abs(np.asarray(grad, dtype=np.float64)).ravel()
    order = rng.permutation(flat_grad.size)
    strong = [int(i) for i in order if flat_grad[i] >= min_grad]
    weak = sorted((int(i) for i in order if flat_grad[i] < min_grad), key=lambda i: -flat_grad[i])
    chosen = sorted((strong + weak)[:count])
    return [tuple(int(i) for i in np.unravel_index(f, grad.shape)) for f in chosen]


def check_parameter_set(
    objective: Objective,
    params: ParameterSet,
    eps: float = 1e-5,
    names: list[str] | None = None,
    per_group: int | None = 8,
    rng: RngStream | None = None,
    min_grad: float = 1e-5,
) -> list[GradReport]:
    """
    Run :func:`grad_check` on each named parameter group.

    Args:
        objective: Maps a full parameter set to (loss, gradients by name)
        params: Point to check at; not modified
        eps: Perturbation size
        names: Groups to check (all when None)
        per_group: Coordinates sampled per group (every coordinate when None)
        rng: Stream used to sample coordinates
        min_grad: Sampled coordinates prefer analytic gradients at least this large

    Returns:
        One report per checked group
    """
    rng = rng or RngStream(0)
    _, base_grads = objective(params.copy())
    reports: list[GradReport] = []
    for name in names or params.names():

        def loss_fn(theta: np.ndarray, name: str = name) -> tuple[float, np.ndarray]:
            trial = params.copy()
            trial[name] = theta
            loss, grads = objective(trial)
            return loss, grads[name]

        coords = None
        if per_group is not None:
            coords = sample_coords(base_grads[name], per_group, rng, min_grad)
        reports.append(grad_check(loss_fn, params[name], eps, coords, name=name))
    return reports
