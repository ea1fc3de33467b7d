"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def grad_check(builder: Callable[..., Tensor], inputs: Sequence[Tensor], h: float = 1e-5) -> float:
    """Max relative error between backprop and central differences over all input elements.

    ``builder(*inputs)`` must return a scalar tensor and be deterministic; it is
    re-run twice per input element.
    """
    if h <= 0:
        raise ValueError("step size must be positive")
    for x in inputs:
        x.requires_grad = True
        x.grad = None
    loss = builder(*inputs)
    if loss.requires_grad:
        backward(loss)
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs]

    worst = 0.0
    for x, ga in zip(inputs, analytic):
        flat = x.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = builder(*inputs).data.item()
            flat[i] = orig - h
            f_minus = builder(*inputs).data.item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = gflat[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    for x in inputs:
        x.grad = None
    return worst
