"""Adam with bias correction and decoupled weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingGradient, ShapeMismatch
from .tensor import Tensor

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.98
ADAM_EPS = 1e-9


@dataclass
class AdamState:
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(0, [np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(
    params: list[Tensor],
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
    weight_decay: float = 0.0,
) -> None:
    """Update ``params`` in place and zero their gradients.

    Weight decay shrinks each parameter by ``lr * weight_decay`` before the
    Adam delta is applied, independent of the gradient moments.
    """
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ShapeMismatch(f"optimizer state tracks {len(state.m)} tensors, got {len(params)}")
    for i, p in enumerate(params):
        if p.grad is None:
            raise MissingGradient(f"parameter {i} (shape {p.shape}) has no gradient")
        if state.m[i].shape != p.shape:
            raise ShapeMismatch(f"optimizer moment {i} shape {state.m[i].shape} != {p.shape}")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p, m, v in zip(params, state.m, state.v):
        g = p.grad
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        if weight_decay:
            p.data -= lr * weight_decay * p.data
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        p.grad = None


def clip_grad_norm(params: list[Tensor], max_norm: float) -> float:
    """Rescale gradients so their global L2 norm is at most ``max_norm``; return the pre-clip norm."""
    total = float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params if p.grad is not None)))
    if total > max_norm and total > 0.0:
        factor = max_norm / total
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return total
