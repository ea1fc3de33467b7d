"""Learnable time embedding: one linear component plus ``k`` sine components.

``t2v(tau)[0] = omega_0 * tau + phi_0`` and
``t2v(tau)[i] = sin(omega_i * tau + phi_i)`` for ``1 <= i <= k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, as_tensor, concat, mul, sin
from .errors import LengthMismatch


@dataclass
class Time2VecParams:
    omega: Tensor  # (k+1,)
    phi: Tensor  # (k+1,)

    @property
    def k(self) -> int:
        return self.omega.shape[0] - 1


def init_time2vec(k: int, rng: np.random.Generator, fps: float = 60.0, window: int = 30) -> Time2VecParams:
    """Frequencies uniform in ``[0, 2*pi*fps/window]``; phases uniform in ``[0, 2*pi]``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    omega = rng.uniform(0.0, 2.0 * math.pi * fps / window, k + 1)
    phi = rng.uniform(0.0, 2.0 * math.pi, k + 1)
    return Time2VecParams(Tensor(omega, requires_grad=True), Tensor(phi, requires_grad=True))


def time2vec_forward(tau, params: Time2VecParams) -> Tensor:
    """Embed times ``tau`` of shape (..., T) into (..., T, k+1)."""
    tau = as_tensor(tau)
    if params.k < 1:
        raise ValueError("k must be >= 1")
    col = Tensor(tau.data[..., None])
    lin = add(mul(col, params.omega), params.phi)
    return concat([lin[..., :1], sin(lin[..., 1:])], axis=-1)


def attach_time(features, embedding) -> Tensor:
    """Append the time embedding after the feature columns of each row."""
    features, embedding = as_tensor(features), as_tensor(embedding)
    if features.shape[:-1] != embedding.shape[:-1]:
        raise LengthMismatch(f"features {features.shape} and embedding {embedding.shape} differ in length")
    return concat([features, embedding], axis=-1)
