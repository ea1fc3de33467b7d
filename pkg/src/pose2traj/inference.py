"""Trajectory prediction when future decoder inputs are unknown.

Decoder slot ``i`` holds the centroid at time ``t - c + i`` with
``c = ceil(h/2)``. Slots ``0..c`` are observed. Slot ``c + j`` is the
model's own output row ``j`` (the prediction for time ``t + j``). With the
causal decoder mask, output row ``j`` only sees slots ``<= j < c + j``, so
generating rows left to right fills every slot before anything reads it.
Without the mask the unknown slots start as copies of the last observed
centroid and are refreshed from the outputs over ``c`` full decoding passes.
"""

from __future__ import annotations

import warnings
from collections import OrderedDict

import numpy as np

from .autodiff import Tensor
from .data.features import FeatureSeries, centroid_columns, lead_frames
from .errors import HistoryTooShort
from .model import ModelConfig, decode, encode, last_centroid

AUTOREGRESSIVE = "autoregressive"
TEACHER_FORCED = "teacher_forced"


class HorizonExceedsTrained(UserWarning):
    """Requested horizon is longer than the one the model was trained on."""


def as_tensors(params) -> "OrderedDict[str, Tensor]":
    return OrderedDict((k, v if isinstance(v, Tensor) else Tensor(v)) for k, v in params.items())


def predict_batch(
    params,
    config: ModelConfig,
    enc_in: np.ndarray,
    enc_times: np.ndarray,
    dec_in: np.ndarray,
    dec_times: np.ndarray,
    horizon: int,
    mode: str = AUTOREGRESSIVE,
    init: str = "last",
) -> np.ndarray:
    """Predictions (B, h+1, 2) in normalized coordinates.

    ``dec_in`` (B, h+1, 2) only needs rows ``0..c`` filled in autoregressive
    mode; later rows are overwritten. In teacher-forced mode it is used as is.
    ``init`` ("last" or "zeros") sets the placeholder for unknown slots.
    """
    params = as_tensors(params)
    c = lead_frames(horizon)
    length = horizon + 1
    if dec_in.shape[1] != length or dec_times.shape[1] != length:
        raise ValueError(f"decoder arrays must have {length} rows for horizon {horizon}")
    memory = encode(params, config, enc_in, enc_times)
    anchor = last_centroid(config, enc_in)

    def run(dec):
        return decode(params, config, memory, anchor, dec, dec_times).data

    if mode == TEACHER_FORCED:
        return run(dec_in)
    if mode != AUTOREGRESSIVE:
        raise ValueError(f"unknown mode {mode!r}")

    dec = np.array(dec_in, dtype=np.float64, copy=True)
    n_future = length - (c + 1)
    if init == "last":
        dec[:, c + 1 :] = dec[:, c : c + 1]
    elif init == "zeros":
        dec[:, c + 1 :] = 0.0
    else:
        raise ValueError(f"unknown init {init!r}")
    if config.use_decoder_mask:
        for j in range(1, n_future + 1):
            dec[:, c + j] = run(dec)[:, j]
    else:
        for _ in range(c):
            dec[:, c + 1 :] = run(dec)[:, 1 : n_future + 1]
    return run(dec)


def decoder_times(frame_indices: np.ndarray, fps: float, enc_len: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Encoder and decoder time vectors (seconds from the encoder window's first frame)."""
    c = lead_frames(horizon)
    enc_frames = frame_indices[-enc_len:]
    origin = enc_frames[0]
    last = frame_indices[-1]
    dec_frames = last + np.arange(-c, horizon - c + 1)
    return (enc_frames - origin) / fps, (dec_frames - origin) / fps


def predict_trajectory(checkpoint, history: FeatureSeries, horizon: int, mode: str = AUTOREGRESSIVE) -> np.ndarray:
    """Predicted (h+1) x 2 normalized centroids for times ``t .. t+h``, t = last history frame.

    ``history`` needs at least ``max(enc_len, ceil(h/2) + 1)`` frames; the
    encoder sees the last ``enc_len`` of them. Multiply by ``history.scale``
    (see :func:`~pose2traj.data.features.denormalize`) for pixels.
    """
    config = checkpoint.model_config
    enc_len = config.enc_len_frames
    c = lead_frames(horizon)
    need = max(enc_len, c + 1)
    if len(history) < need:
        raise HistoryTooShort(f"need {need} history frames for enc_len={enc_len}, horizon={horizon}; got {len(history)}")
    if history.feature_dim != config.feature_dim:
        raise HistoryTooShort(f"history has {history.feature_dim} features, model expects {config.feature_dim}")
    if horizon > config.horizon_frames:
        warnings.warn(
            f"horizon {horizon} exceeds the trained horizon {config.horizon_frames}; output is out of distribution",
            HorizonExceedsTrained,
            stacklevel=2,
        )
    if mode != AUTOREGRESSIVE:
        raise ValueError("history-only prediction is always autoregressive")
    cx, cy = centroid_columns(config.family, config.target_player)
    enc_times, dec_times = decoder_times(history.frame_indices, history.frames_per_second, enc_len, horizon)
    dec = np.zeros((horizon + 1, 2))
    dec[: c + 1] = history.matrix[-(c + 1) :, [cx, cy]]
    out = predict_batch(
        checkpoint.params,
        config,
        history.matrix[-enc_len:][None],
        enc_times[None],
        dec[None],
        dec_times[None],
        horizon,
    )
    return out[0]


def forecast(checkpoint, recording, at_frame: int | None = None, horizon: int | None = None):
    """Pixel-space trajectory for the target player from a raw recording.

    ``at_frame`` is a frame index (default: the last frame); only frames up to
    and including it are read. Returns ``(frame_indices, points_px)`` with
    ``h + 1`` rows covering ``t .. t+h``.
    """
    from .data.features import build_feature_series, denormalize

    config = checkpoint.model_config
    horizon = config.horizon_frames if horizon is None else horizon
    records = list(recording)
    if at_frame is not None:
        records = [r for r in records if r.frame_index <= at_frame]
        if not records or records[-1].frame_index != at_frame:
            raise HistoryTooShort(f"frame {at_frame} is not in the recording")
    need = max(config.enc_len_frames, lead_frames(horizon) + 1)
    if len(records) < need:
        raise HistoryTooShort(f"need {need} frames up to the anchor, have {len(records)}")
    series = build_feature_series(records[-need:], config.family, recording.frame_size, recording.fps)
    pred = predict_trajectory(checkpoint, series, horizon)
    t = records[-1].frame_index
    return np.arange(t, t + horizon + 1), denormalize(pred, series.scale)
