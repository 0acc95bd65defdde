"""Adam optimizer over named parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import RangeError, ShapeError


@dataclass
class AdamState:
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, tensors: dict[str, np.ndarray], **kw) -> "AdamState":
        return cls({k: np.zeros_like(v) for k, v in tensors.items()},
                   {k: np.zeros_like(v) for k, v in tensors.items()}, 0, **kw)


def adam_step(tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, learning_rate: float):
    """One bias-corrected Adam update. ``tensors`` and ``state`` are updated in place and returned."""
    if not learning_rate > 0:
        raise RangeError(f"learning rate must be positive, got {learning_rate}")
    if not state.first_moment:
        fresh = AdamState.for_params(tensors, beta1=state.beta1, beta2=state.beta2, eps=state.eps)
        state.first_moment, state.second_moment = fresh.first_moment, fresh.second_moment
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step_count
    bc2 = 1.0 - b2 ** state.step_count
    for name, theta in tensors.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {theta.shape}")
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        theta -= learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return tensors, state
