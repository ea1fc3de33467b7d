"""Encoder-decoder Transformer with Time2Vec inputs and a recurrent smoothing head.

Shapes: every function accepts a leading batch axis ``B``. ``model_forward``
takes a single :class:`TrainingExample`; ``forward_batch`` takes stacked
arrays and is what training and inference use.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields

import numpy as np

from .autodiff import (
    Tensor,
    add,
    concat,
    dropout,
    layer_norm,
    lstm,
    matmul,
    relu,
    reshape,
    scale,
    softmax,
    transpose,
)
from .data.features import FEATURE_DIM, Family, centroid_columns
from .errors import InvalidConfig, ShapeMismatch
from .time2vec import Time2VecParams, attach_time, time2vec_forward

ModelParams = "OrderedDict[str, Tensor]"


@dataclass
class ModelConfig:
    family: str = "F4"
    d_model: int = 128
    n_heads: int = 8
    n_encoder_layers: int = 2
    n_decoder_layers: int = 1
    ffn_dim: int = 256
    k_time: int = 15
    dropout: float = 0.1
    use_decoder_mask: bool | None = None  # None: follow the family (F3/F4 masked)
    lstm_hidden: int = 128
    enc_len_frames: int = 30
    horizon_frames: int = 30
    seed: int = 0
    fps: float = 60.0
    target_player: int = 1
    use_smoother: bool = True
    residual_output: bool = True

    def __post_init__(self):
        self.family = Family(self.family).value
        if self.use_decoder_mask is None:
            self.use_decoder_mask = Family(self.family).uses_decoder_mask

    def validate(self) -> None:
        positive = ("d_model", "n_heads", "ffn_dim", "k_time", "lstm_hidden", "enc_len_frames", "horizon_frames")
        for name in positive:
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_encoder_layers < 1 or self.n_decoder_layers < 1:
            raise InvalidConfig("need at least one encoder and one decoder layer")
        if self.d_model % self.n_heads:
            raise InvalidConfig(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must lie in [0, 1)")
        if self.enc_len_frames < self.horizon_frames:
            raise InvalidConfig("enc_len_frames must be >= horizon_frames")
        if self.target_player not in (1, 2):
            raise InvalidConfig("target_player must be 1 or 2")

    @property
    def feature_dim(self) -> int:
        return FEATURE_DIM[Family(self.family)]

    @property
    def enc_input_dim(self) -> int:
        return self.feature_dim + self.k_time + 1

    @property
    def dec_input_dim(self) -> int:
        return 2 + self.k_time + 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


# --- parameters --------------------------------------------------------------


def _attn_shapes(prefix: str, d: int) -> list[tuple[str, tuple[int, ...]]]:
    # no key bias: it adds the same q.b_k to every score in a softmax row, so it can never matter
    out = []
    for n in ("q", "k", "v", "o"):
        out.append((f"{prefix}.w{n}", (d, d)))
        if n != "k":
            out.append((f"{prefix}.b{n}", (d,)))
    return out


def _norm_shapes(prefix: str, d: int):
    return [(f"{prefix}.gain", (d,)), (f"{prefix}.bias", (d,))]


def _ffn_shapes(prefix: str, d: int, f: int):
    return [(f"{prefix}.w1", (d, f)), (f"{prefix}.b1", (f,)), (f"{prefix}.w2", (f, d)), (f"{prefix}.b2", (d,))]


def param_shapes(config: ModelConfig) -> "OrderedDict[str, tuple[int, ...]]":
    """Name and shape of every learnable tensor, in initialization order."""
    d, k, f, hid = config.d_model, config.k_time, config.ffn_dim, config.lstm_hidden
    shapes = [
        ("enc_t2v.omega", (k + 1,)),
        ("enc_t2v.phi", (k + 1,)),
        ("dec_t2v.omega", (k + 1,)),
        ("dec_t2v.phi", (k + 1,)),
        ("enc_in.w", (config.enc_input_dim, d)),
        ("enc_in.b", (d,)),
        ("dec_in.w", (config.dec_input_dim, d)),
        ("dec_in.b", (d,)),
    ]
    for i in range(config.n_encoder_layers):
        shapes += _attn_shapes(f"enc{i}.attn", d) + _norm_shapes(f"enc{i}.norm1", d)
        shapes += _ffn_shapes(f"enc{i}.ffn", d, f) + _norm_shapes(f"enc{i}.norm2", d)
    for i in range(config.n_decoder_layers):
        shapes += _attn_shapes(f"dec{i}.self_attn", d) + _norm_shapes(f"dec{i}.norm1", d)
        shapes += _attn_shapes(f"dec{i}.cross_attn", d) + _norm_shapes(f"dec{i}.norm2", d)
        shapes += _ffn_shapes(f"dec{i}.ffn", d, f) + _norm_shapes(f"dec{i}.norm3", d)
    if config.use_smoother:
        shapes += [("lstm.w_ih", (d, 4 * hid)), ("lstm.w_hh", (hid, 4 * hid)), ("lstm.b", (4 * hid,))]
        shapes += [("out.w", (hid, 2)), ("out.b", (2,))]
    else:
        shapes += [("out.w", (d, 2)), ("out.b", (2,))]
    return OrderedDict(shapes)


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


def init_params(config: ModelConfig) -> "OrderedDict[str, Tensor]":
    """Xavier-uniform weights, zero biases, unit norm gains, LSTM forget bias 1."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    two_pi = 2.0 * math.pi
    params: OrderedDict[str, Tensor] = OrderedDict()
    for name, shape in param_shapes(config).items():
        leaf = name.rsplit(".", 1)[1]
        if leaf == "omega":
            value = rng.uniform(0.0, two_pi * config.fps / config.enc_len_frames, shape)
        elif leaf == "phi":
            value = rng.uniform(0.0, two_pi, shape)
        elif leaf == "gain":
            value = np.ones(shape)
        elif len(shape) == 2:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            value = rng.uniform(-limit, limit, shape)
        else:
            value = np.zeros(shape)
            if name == "lstm.b":
                hid = shape[0] // 4
                value[hid : 2 * hid] = 1.0
        params[name] = Tensor(value, requires_grad=True)
    return params


# --- building blocks ---------------------------------------------------------


def causal_mask(length: int) -> np.ndarray:
    """Additive mask: 0 where key j <= query i, ``-inf`` elsewhere."""
    if length < 1:
        raise ValueError("mask length must be >= 1")
    allowed = np.tril(np.ones((length, length), dtype=bool))
    return np.where(allowed, 0.0, -np.inf)


def _linear(x, w, b):
    return add(matmul(x, w), b)


def multi_head_attention(q, k, v, params, prefix: str, n_heads: int, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention over ``n_heads`` heads, then the output projection.

    Inputs are (T, d) or (B, T, d); ``mask`` is an additive (Tq, Tk) array.
    """
    squeeze = q.ndim == 2
    if squeeze:
        q, k, v = (reshape(t, (1,) + t.shape) for t in (q, k, v))
    d = params[f"{prefix}.wq"].shape[0]
    if q.shape[-1] != d or k.shape[-1] != d or v.shape[-1] != d:
        raise ShapeMismatch(f"attention widths must equal d_model={d}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch("keys and values must have the same length")
    bsz, tq, tk = q.shape[0], q.shape[1], k.shape[1]
    if mask is not None and mask.shape != (tq, tk):
        raise ShapeMismatch(f"mask shape {mask.shape} != ({tq}, {tk})")
    hd = d // n_heads

    def heads(x, n, t):
        y = matmul(x, params[f"{prefix}.w{n}"])
        if f"{prefix}.b{n}" in params:
            y = add(y, params[f"{prefix}.b{n}"])
        return transpose(reshape(y, (bsz, t, n_heads, hd)), (0, 2, 1, 3))

    qh, kh, vh = heads(q, "q", tq), heads(k, "k", tk), heads(v, "v", tk)
    scores = scale(matmul(qh, transpose(kh)), 1.0 / math.sqrt(hd))
    if mask is not None:
        scores = add(scores, Tensor(mask))
    ctx = matmul(softmax(scores), vh)
    ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (bsz, tq, d))
    out = _linear(ctx, params[f"{prefix}.wo"], params[f"{prefix}.bo"])
    if squeeze:
        out = reshape(out, (tq, d))
    return out


def _feed_forward(x, params, prefix):
    h = relu(_linear(x, params[f"{prefix}.w1"], params[f"{prefix}.b1"]))
    return _linear(h, params[f"{prefix}.w2"], params[f"{prefix}.b2"])


def _residual_norm(x, sub, params, norm: str, config: ModelConfig, training: bool, rng):
    sub = dropout(sub, config.dropout, rng, training)
    return layer_norm(add(x, sub), params[f"{norm}.gain"], params[f"{norm}.bias"])


def _t2v(params, which: str) -> Time2VecParams:
    return Time2VecParams(params[f"{which}_t2v.omega"], params[f"{which}_t2v.phi"])


def encoder_forward(enc_in, params, config: ModelConfig, training: bool = False, rng=None) -> Tensor:
    """Project time-augmented encoder rows to d_model, then post-norm self-attention layers."""
    if enc_in.shape[-2] == 0:
        raise ShapeMismatch("encoder input has no frames")
    if enc_in.shape[-1] != config.enc_input_dim:
        raise ShapeMismatch(f"encoder input width {enc_in.shape[-1]} != {config.enc_input_dim}")
    x = _linear(enc_in, params["enc_in.w"], params["enc_in.b"])
    for i in range(config.n_encoder_layers):
        a = multi_head_attention(x, x, x, params, f"enc{i}.attn", config.n_heads)
        x = _residual_norm(x, a, params, f"enc{i}.norm1", config, training, rng)
        f = _feed_forward(x, params, f"enc{i}.ffn")
        x = _residual_norm(x, f, params, f"enc{i}.norm2", config, training, rng)
    return x


def decoder_forward(dec_in, memory, params, config: ModelConfig, training: bool = False, rng=None) -> Tensor:
    """Self-attention (causal iff ``use_decoder_mask``), cross-attention on ``memory``, FFN."""
    if dec_in.shape[-1] != config.dec_input_dim:
        raise ShapeMismatch(f"decoder input width {dec_in.shape[-1]} != {config.dec_input_dim}")
    if memory.shape[-1] != config.d_model:
        raise ShapeMismatch(f"memory width {memory.shape[-1]} != d_model={config.d_model}")
    length = dec_in.shape[-2]
    mask = causal_mask(length) if config.use_decoder_mask else None
    y = _linear(dec_in, params["dec_in.w"], params["dec_in.b"])
    for i in range(config.n_decoder_layers):
        s = multi_head_attention(y, y, y, params, f"dec{i}.self_attn", config.n_heads, mask)
        y = _residual_norm(y, s, params, f"dec{i}.norm1", config, training, rng)
        c = multi_head_attention(y, memory, memory, params, f"dec{i}.cross_attn", config.n_heads)
        y = _residual_norm(y, c, params, f"dec{i}.norm2", config, training, rng)
        f = _feed_forward(y, params, f"dec{i}.ffn")
        y = _residual_norm(y, f, params, f"dec{i}.norm3", config, training, rng)
    return y


def smooth_and_project(hidden, params) -> Tensor:
    """Run a single-layer LSTM left to right over ``hidden`` and project each state to (x, y).

    Without LSTM parameters (``use_smoother=False``) the decoder states are
    projected directly.
    """
    if "lstm.w_ih" not in params:
        return _linear(hidden, params["out.w"], params["out.b"])
    squeeze = hidden.ndim == 2
    if squeeze:
        hidden = reshape(hidden, (1,) + hidden.shape)
    length = hidden.shape[1]
    seq = lstm(hidden, params["lstm.w_ih"], params["lstm.w_hh"], params["lstm.b"])
    out = _linear(seq, params["out.w"], params["out.b"])
    if squeeze:
        out = reshape(out, (length, 2))
    return out


def encode(params, config: ModelConfig, enc_in: np.ndarray, enc_times: np.ndarray, training=False, rng=None):
    """Encoder memory (B, T_enc, d_model) for raw (B, T_enc, feature_dim) features."""
    if enc_in.ndim != 3:
        raise ShapeMismatch("encoder input must be (B, T, D)")
    if enc_in.shape[-1] != config.feature_dim:
        raise ShapeMismatch(f"{config.family} expects {config.feature_dim} encoder features, got {enc_in.shape[-1]}")
    enc = attach_time(Tensor(enc_in), time2vec_forward(enc_times, _t2v(params, "enc")))
    return encoder_forward(enc, params, config, training, rng)


def decode(
    params,
    config: ModelConfig,
    memory: Tensor,
    last_centroid: np.ndarray,
    dec_in: np.ndarray,
    dec_times: np.ndarray,
    training=False,
    rng=None,
) -> Tensor:
    """Predictions (B, L_d, 2) from encoder memory and decoder centroid rows.

    ``last_centroid`` (B, 1, 2) is the target player's position at time t; with
    ``residual_output`` the head predicts offsets from it.
    """
    if dec_in.ndim != 3 or dec_in.shape[-1] != 2:
        raise ShapeMismatch("decoder input rows must be (B, L, 2) centroids")
    dec = attach_time(Tensor(dec_in), time2vec_forward(dec_times, _t2v(params, "dec")))
    hidden = decoder_forward(dec, memory, params, config, training, rng)
    out = smooth_and_project(hidden, params)
    if config.residual_output:
        out = add(out, Tensor(last_centroid))
    return out


def last_centroid(config: ModelConfig, enc_in: np.ndarray) -> np.ndarray:
    cx, cy = centroid_columns(config.family, config.target_player)
    return enc_in[:, -1:, [cx, cy]]


def forward_batch(
    params,
    config: ModelConfig,
    enc_in: np.ndarray,
    enc_times: np.ndarray,
    dec_in: np.ndarray,
    dec_times: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Batched forward pass; arrays carry a leading batch axis. Returns (B, L_d, 2)."""
    memory = encode(params, config, enc_in, enc_times, training, rng)
    return decode(params, config, memory, last_centroid(config, enc_in), dec_in, dec_times, training, rng)


def model_forward(example, params, config: ModelConfig, training: bool = False, rng=None) -> Tensor:
    """Predictions (L_d x 2, normalized coordinates) for one window."""
    out = forward_batch(
        params,
        config,
        example.enc_in[None],
        example.enc_times[None],
        example.dec_in[None],
        example.dec_times[None],
        training,
        rng,
    )
    return reshape(out, out.shape[1:])
