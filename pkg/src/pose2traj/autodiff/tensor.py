"""Define-by-run reverse-mode automatic differentiation over numpy arrays.

Every differentiable operation goes through :func:`forward_primitive`, which
looks the primitive up in a registry. A registry entry computes the forward
value and returns a closure mapping the output gradient onto one gradient per
input. Tensors are float64 throughout; leading axes broadcast like numpy so a
whole mini-batch flows through a single graph.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from ..errors import DisconnectedGraph, NonScalarLoss, ShapeMismatch, UnknownPrimitive

LAYER_NORM_EPS = 1e-5

_ids = itertools.count()

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """An n-d float64 array that can record the operations applied to it."""

    __slots__ = ("data", "requires_grad", "grad", "node_id", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node_id = next(_ids)
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # operator sugar; all of it routes through the primitive registry
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return slice_(self, index)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a: np.ndarray, b: np.ndarray, kind: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{kind}: cannot broadcast {a.shape} with {b.shape}") from None


# ---------------------------------------------------------------------------
# primitive registry: each entry is (inputs, **attrs) -> (value, backward_fn)
# ---------------------------------------------------------------------------

_PRIMITIVES: dict[str, Callable] = {}


def primitive(name: str):
    def register(fn):
        _PRIMITIVES[name] = fn
        return fn

    return register


def primitive_names() -> list[str]:
    return sorted(_PRIMITIVES)


@primitive("matmul")
def _matmul(a, b):
    """(..., n, k) @ (..., k, m); leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul: inner dims differ for {a.shape} @ {b.shape}")
    _broadcast_shape(a[..., :1, :1], b[..., :1, :1], "matmul")
    out = np.matmul(a, b)

    def back(g):
        ga = np.matmul(g, np.swapaxes(b, -1, -2))
        if b.ndim == 2 and a.ndim > 2:
            # shared weight: fold the batch axes into one GEMM instead of summing per-batch products
            gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = _unbroadcast(np.matmul(np.swapaxes(a, -1, -2), g), b.shape)
        return _unbroadcast(ga, a.shape), gb

    return out, back


@primitive("add")
def _add(a, b):
    _broadcast_shape(a, b, "add")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return a + b, back


@primitive("sub")
def _sub(a, b):
    _broadcast_shape(a, b, "sub")

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return a - b, back


@primitive("mul")
def _mul(a, b):
    _broadcast_shape(a, b, "mul")

    def back(g):
        return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

    return a * b, back


@primitive("scale")
def _scale(a, *, factor: float):
    return a * factor, lambda g: (g * factor,)


@primitive("concat")
def _concat(*xs, axis: int = -1):
    if not xs:
        raise ShapeMismatch("concat: no inputs")
    ax = axis % xs[0].ndim
    for x in xs[1:]:
        if x.ndim != xs[0].ndim or any(
            x.shape[i] != xs[0].shape[i] for i in range(x.ndim) if i != ax
        ):
            raise ShapeMismatch(f"concat: non-concat dims differ for {[x.shape for x in xs]}")
    out = np.concatenate(xs, axis=ax)
    bounds = np.cumsum([0] + [x.shape[ax] for x in xs])

    def back(g):
        return tuple(
            g[(slice(None),) * ax + (slice(lo, hi),)] for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return out, back


@primitive("slice")
def _slice(a, *, index):
    """Basic (non-fancy) indexing only, so output elements never alias."""
    try:
        out = a[index]
    except IndexError as exc:
        raise ShapeMismatch(f"slice: {exc}") from None

    def back(g):
        full = np.zeros_like(a)
        full[index] = g
        return (full,)

    return np.array(out), back


@primitive("transpose")
def _transpose(a, *, axes=None):
    if axes is None:
        if a.ndim < 2:
            raise ShapeMismatch("transpose: needs at least 2 axes")
        axes = tuple(range(a.ndim - 2)) + (a.ndim - 1, a.ndim - 2)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeMismatch(f"transpose: axes {axes} invalid for ndim {a.ndim}")
    inverse = tuple(np.argsort(axes))
    return np.transpose(a, axes), lambda g: (np.transpose(g, inverse),)


@primitive("reshape")
def _reshape(a, *, shape):
    try:
        out = a.reshape(shape)
    except ValueError:
        raise ShapeMismatch(f"reshape: {a.shape} -> {shape}") from None
    return out, lambda g: (g.reshape(a.shape),)


@primitive("sin")
def _sin(a):
    return np.sin(a), lambda g: (g * np.cos(a),)


@primitive("tanh")
def _tanh(a):
    out = np.tanh(a)
    return out, lambda g: (g * (1.0 - out * out),)


@primitive("sigmoid")
def _sigmoid(a):
    # tanh form never overflows
    out = 0.5 * (1.0 + np.tanh(0.5 * a))
    return out, lambda g: (g * out * (1.0 - out),)


@primitive("relu")
def _relu(a):
    keep = a > 0
    return np.where(keep, a, 0.0), lambda g: (g * keep,)


@primitive("exp")
def _exp(a):
    out = np.exp(a)
    return out, lambda g: (g * out,)


@primitive("square")
def _square(a):
    return a * a, lambda g: (2.0 * a * g,)


@primitive("softmax")
def _softmax(a):
    """Softmax over the last axis; ``-inf`` entries receive exactly zero weight."""
    shifted = a - a.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return out, back


@primitive("layer_norm")
def _layer_norm(x, gain, bias, *, eps: float = LAYER_NORM_EPS):
    """Normalize the last axis with population variance, then apply gain and bias."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeMismatch(f"layer_norm: gain/bias must be ({d},), got {gain.shape}, {bias.shape}")
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    out = xhat * gain + bias

    def back(g):
        gx_hat = g * gain
        gx = rstd * (
            gx_hat
            - gx_hat.mean(axis=-1, keepdims=True)
            - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(x.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return out, back


@primitive("dropout")
def _dropout(a, *, rate: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout; identity unless training with a positive rate."""
    if not training or rate == 0.0:
        return a.copy(), lambda g: (g,)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("dropout in training mode needs an explicit rng")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return a * keep, lambda g: (g * keep,)


@primitive("mean")
def _mean(a, *, axis=None):
    out = a.mean(axis=axis)
    n = a.size / max(out.size, 1)

    def back(g):
        g = np.asarray(g)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return np.asarray(out), back


@primitive("sum")
def _sum(a, *, axis=None):
    out = a.sum(axis=axis)

    def back(g):
        g = np.asarray(g)
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return np.asarray(out), back


@primitive("lstm")
def _lstm(x, w_ih, w_hh, b):
    """Single-layer LSTM scan over axis 1 of ``x`` (B, L, d); returns hidden states (B, L, H).

    Gate blocks along the 4H axis are ordered input, forget, cell, output.
    Zero initial state. Backward is hand-written truncation-free BPTT.
    """
    if x.ndim != 3 or w_ih.shape[0] != x.shape[-1] or w_hh.shape[0] * 4 != w_hh.shape[1]:
        raise ShapeMismatch(f"lstm: incompatible shapes x={x.shape} w_ih={w_ih.shape} w_hh={w_hh.shape}")
    if w_ih.shape[1] != w_hh.shape[1] or b.shape != (w_hh.shape[1],):
        raise ShapeMismatch("lstm: gate widths disagree")
    bsz, length, _ = x.shape
    hid = w_hh.shape[0]
    pre = x @ w_ih + b
    gates = np.empty((bsz, length, 4 * hid))
    cells = np.empty((bsz, length, hid))
    hs = np.empty((bsz, length, hid))
    h = np.zeros((bsz, hid))
    c = np.zeros((bsz, hid))
    for t in range(length):
        z = pre[:, t] + h @ w_hh
        g = gates[:, t]
        g[:, : 2 * hid] = 0.5 * (1.0 + np.tanh(0.5 * z[:, : 2 * hid]))
        g[:, 2 * hid : 3 * hid] = np.tanh(z[:, 2 * hid : 3 * hid])
        g[:, 3 * hid :] = 0.5 * (1.0 + np.tanh(0.5 * z[:, 3 * hid :]))
        c = g[:, hid : 2 * hid] * c + g[:, :hid] * g[:, 2 * hid : 3 * hid]
        h = g[:, 3 * hid :] * np.tanh(c)
        cells[:, t] = c
        hs[:, t] = h

    def back(gout):
        dz_all = np.empty_like(gates)
        dh_next = np.zeros((bsz, hid))
        dc_next = np.zeros((bsz, hid))
        for t in range(length - 1, -1, -1):
            g = gates[:, t]
            i_g, f_g, c_g, o_g = g[:, :hid], g[:, hid : 2 * hid], g[:, 2 * hid : 3 * hid], g[:, 3 * hid :]
            tc = np.tanh(cells[:, t])
            dh = gout[:, t] + dh_next
            dc = dc_next + dh * o_g * (1.0 - tc * tc)
            c_prev = cells[:, t - 1] if t > 0 else np.zeros((bsz, hid))
            dz = dz_all[:, t]
            dz[:, :hid] = dc * c_g * i_g * (1.0 - i_g)
            dz[:, hid : 2 * hid] = dc * c_prev * f_g * (1.0 - f_g)
            dz[:, 2 * hid : 3 * hid] = dc * i_g * (1.0 - c_g * c_g)
            dz[:, 3 * hid :] = dh * tc * o_g * (1.0 - o_g)
            dh_next = dz @ w_hh.T
            dc_next = dc * f_g
        flat_dz = dz_all.reshape(-1, 4 * hid)
        gx = dz_all @ w_ih.T
        gw_ih = x.reshape(-1, x.shape[-1]).T @ flat_dz
        h_prev = np.concatenate([np.zeros((bsz, 1, hid)), hs[:, :-1]], axis=1)
        gw_hh = h_prev.reshape(-1, hid).T @ flat_dz
        return gx, gw_ih, gw_hh, flat_dz.sum(axis=0)

    return hs, back


def forward_primitive(kind: str, inputs: Sequence, attrs: dict | None = None) -> Tensor:
    """Apply primitive ``kind`` to ``inputs`` and record a graph edge if needed."""
    try:
        fn = _PRIMITIVES[kind]
    except KeyError:
        raise UnknownPrimitive(kind) from None
    tensors = tuple(as_tensor(x) for x in inputs)
    value, back = fn(*(t.data for t in tensors), **(attrs or {}))
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(value, dtype=np.float64)
    out.grad = None
    out.node_id = next(_ids)
    out.op = kind
    out.requires_grad = any(t.requires_grad for t in tensors)
    if out.requires_grad:
        out._parents = tensors
        out._backward = back
    else:
        out._parents = ()
        out._backward = None
    return out


# thin functional wrappers ----------------------------------------------------


def matmul(a, b):
    return forward_primitive("matmul", (a, b))


def add(a, b):
    return forward_primitive("add", (a, b))


def sub(a, b):
    return forward_primitive("sub", (a, b))


def mul(a, b):
    return forward_primitive("mul", (a, b))


def scale(a, factor: float):
    return forward_primitive("scale", (a,), {"factor": float(factor)})


def concat(xs, axis: int = -1):
    return forward_primitive("concat", tuple(xs), {"axis": axis})


def slice_(a, index):
    return forward_primitive("slice", (a,), {"index": index})


def transpose(a, axes=None):
    return forward_primitive("transpose", (a,), {"axes": None if axes is None else tuple(axes)})


def reshape(a, shape):
    return forward_primitive("reshape", (a,), {"shape": tuple(shape)})


def sin(a):
    return forward_primitive("sin", (a,))


def tanh(a):
    return forward_primitive("tanh", (a,))


def sigmoid(a):
    return forward_primitive("sigmoid", (a,))


def relu(a):
    return forward_primitive("relu", (a,))


def exp(a):
    return forward_primitive("exp", (a,))


def square(a):
    return forward_primitive("square", (a,))


def softmax(a):
    return forward_primitive("softmax", (a,))


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS):
    return forward_primitive("layer_norm", (x, gain, bias), {"eps": eps})


def dropout(a, rate: float, rng: np.random.Generator | None = None, training: bool = False):
    return forward_primitive("dropout", (a,), {"rate": rate, "rng": rng, "training": training})


def lstm(x, w_ih, w_hh, b):
    return forward_primitive("lstm", (x, w_ih, w_hh, b))


def mean(a, axis=None):
    return forward_primitive("mean", (a,), {"axis": axis})


def sum_(a, axis=None):
    return forward_primitive("sum", (a,), {"axis": axis})


# ---------------------------------------------------------------------------


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in seen:
            continue
        seen.add(node.node_id)
        stack.append((node, True))
        for parent in reversed(node._parents):
            if parent.requires_grad and parent.node_id not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every tensor that requires grad and feeds ``loss``.

    Gradients accumulate (``+=``) into existing buffers, so callers zero leaf
    gradients between optimisation steps.
    """
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        raise DisconnectedGraph("loss does not depend on any tensor that requires grad")
    order = _topological_order(loss)
    pending: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    for node in reversed(order):
        g = pending.pop(node.node_id, None)
        if g is None:
            continue
        if node._backward is None:
            # leaf: own a private buffer so later accumulation never aliases
            if node.grad is None:
                node.grad = np.array(g, dtype=np.float64, copy=True).reshape(node.shape)
            else:
                node.grad += g
            continue
        node.grad = g if node.grad is None else node.grad + g
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if parent.node_id in pending:
                pending[parent.node_id] = pending[parent.node_id] + pg
            else:
                pending[parent.node_id] = pg
