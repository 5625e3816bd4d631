"""Adam with global-norm clipping and a step-decay schedule."""

from dataclasses import dataclass, field

import numpy as np

from qfvae.numerics.params import ParameterSet


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(
    grads: dict[str, np.ndarray], max_norm: float
) -> tuple[dict[str, np.ndarray], float]:
    """Scale all gradients together so their joint L2 norm is at most `max_norm`.

    Returns the clipped gradients and the norm before clipping.
    """
    norm = global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


@dataclass
class StepDecay:
    """Step size multiplied by `rate` every `every` steps."""

    base: float
    every: int
    rate: float

    def __call__(self, step: int) -> float:
        return self.base * self.rate ** (step // self.every)


@dataclass
class Adam:
    """Adam optimizer keeping first and second moments per parameter block."""

    schedule: StepDecay
    clip_norm: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def apply(self, params: ParameterSet, grads: dict[str, np.ndarray]) -> float:
        """
        Take one step in place.

        Args:
            params: Parameters to update
            grads: Gradients by parameter name; names absent here are left alone

        Returns:
            Gradient norm before clipping
        """
        grads, norm = clip_by_global_norm(grads, self.clip_norm)
        lr = self.schedule(self.step)
        self.step += 1
        t = self.step
        for name, g in grads.items():
            m = self.m.get(name)
            v = self.v.get(name)
            if m is None or v is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            params[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return norm

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Moments as named blocks for checkpointing."""
        out: dict[str, np.ndarray] = {}
        for name in self.m:
            out[f"adam.m.{name}"] = self.m[name]
            out[f"adam.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, blocks: dict[str, np.ndarray], step: int) -> None:
        """Restore moments written by :meth:`state_arrays`."""
        self.step = step
        self.m = {k[len("adam.m.") :]: v.copy() for k, v in blocks.items() if k.startswith("adam.m.")}
        self.v = {k[len("adam.v.") :]: v.copy() for k, v in blocks.items() if k.startswith("adam.v.")}
