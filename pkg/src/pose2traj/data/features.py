"""Model-family feature matrices and teacher-forcing windows.

Column layout (absent blocks dropped per family)::

    [C1.x, C1.y, J1 (17 interleaved x,y), C2.x, C2.y, J2 (17 x,y), B.x, B.y]

F1 keeps only the two centroids (4 columns), F2 and F3 add both joint sets
(72), F4 appends the ball (74). x is divided by frame width and y by frame
height, so every value lies in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InputError, MissingBall, MissingJoint, SeriesTooShort
from .records import DEFAULT_FPS, N_JOINTS, Recording


class Family(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F4 = "F4"

    @property
    def uses_joints(self) -> bool:
        return self is not Family.F1

    @property
    def uses_ball(self) -> bool:
        return self is Family.F4

    @property
    def uses_decoder_mask(self) -> bool:
        return self in (Family.F3, Family.F4)


FEATURE_DIM = {Family.F1: 4, Family.F2: 72, Family.F3: 72, Family.F4: 74}


def feature_dim(family) -> int:
    return FEATURE_DIM[Family(family)]


def centroid_columns(family, player: int) -> tuple[int, int]:
    """Column indices of ``player``'s centroid x, y for ``family``."""
    if player not in (1, 2):
        raise ValueError("player must be 1 or 2")
    family = Family(family)
    block = 2 + (2 * N_JOINTS if family.uses_joints else 0)
    off = 0 if player == 1 else block
    return off, off + 1


@dataclass
class FeatureSeries:
    family: Family
    matrix: np.ndarray  # T x feature_dim, normalized
    scale: tuple[float, float]  # (width_px, height_px)
    frames_per_second: float = DEFAULT_FPS
    frame_indices: np.ndarray | None = None

    def __post_init__(self):
        self.family = Family(self.family)
        if self.matrix.ndim != 2 or self.matrix.shape[1] != FEATURE_DIM[self.family]:
            raise InputError(
                f"{self.family.value} expects {FEATURE_DIM[self.family]} columns, got {self.matrix.shape}"
            )
        if self.frame_indices is None:
            self.frame_indices = np.arange(len(self.matrix))

    @property
    def feature_dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.matrix)

    def centroid(self, player: int) -> np.ndarray:
        cx, cy = centroid_columns(self.family, player)
        return self.matrix[:, [cx, cy]]

    def tail(self, n: int, end: int | None = None) -> "FeatureSeries":
        end = len(self) if end is None else end
        if end - n < 0:
            raise SeriesTooShort(f"need {n} frames before position {end}, have {end}")
        return FeatureSeries(
            self.family, self.matrix[end - n : end], self.scale, self.frames_per_second, self.frame_indices[end - n : end]
        )


def normalize(points: np.ndarray, scale) -> np.ndarray:
    """Pixels to unit coordinates; the last axis alternates x, y."""
    factors = np.resize(np.array([1.0 / scale[0], 1.0 / scale[1]]), points.shape[-1])
    return points * factors


def denormalize(points: np.ndarray, scale) -> np.ndarray:
    factors = np.resize(np.array([float(scale[0]), float(scale[1])]), points.shape[-1])
    return points * factors


def build_feature_series(records, family, frame_size=None, fps: float | None = None) -> FeatureSeries:
    """Assemble the normalized ``T x feature_dim`` matrix for one model family."""
    family = Family(family)
    if isinstance(records, Recording):
        frame_size = frame_size or records.frame_size
        fps = fps or records.fps
    frame_size = frame_size or (1280, 720)
    fps = fps or DEFAULT_FPS
    recs = list(records)
    if not recs:
        raise SeriesTooShort("no frames")

    rows = []
    for r in recs:
        row = [*r.p1_centroid]
        if family.uses_joints:
            row += [v for p in r.p1_joints for v in p]
        row += [*r.p2_centroid]
        if family.uses_joints:
            row += [v for p in r.p2_joints for v in p]
        if family.uses_ball:
            if not r.ball_visible:
                raise MissingBall(f"frame {r.frame_index}: ball invisible; run gap filling first")
            row += [*r.ball]
        rows.append(row)
    px = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(px)):
        bad = int(np.argwhere(~np.isfinite(px))[0, 0])
        raise MissingJoint(f"frame {recs[bad].frame_index}: non-finite keypoint coordinate")
    matrix = normalize(px, frame_size)
    if matrix.min() < 0.0 or matrix.max() > 1.0:
        bad = int(np.argwhere((matrix < 0) | (matrix > 1))[0, 0])
        raise InputError(f"frame {recs[bad].frame_index}: coordinate outside the {frame_size} frame")
    return FeatureSeries(
        family,
        matrix,
        (float(frame_size[0]), float(frame_size[1])),
        float(fps),
        np.array([r.frame_index for r in recs]),
    )


def ms_to_frames(ms: float, fps: float = DEFAULT_FPS) -> int:
    """Milliseconds to a whole number of frames (half rounds up), at least one."""
    if ms < 0 or fps <= 0:
        raise ValueError("ms must be non-negative and fps positive")
    return max(1, int(math.floor(ms * fps / 1000.0 + 0.5)))


def lead_frames(horizon: int) -> int:
    """How many decoder-input rows precede the anchor frame: ceil(h / 2)."""
    return -(-horizon // 2)


@dataclass
class TrainingExample:
    enc_in: np.ndarray  # T_enc x feature_dim
    enc_times: np.ndarray  # T_enc seconds from window start
    dec_in: np.ndarray  # (h+1) x 2
    dec_times: np.ndarray  # (h+1)
    target: np.ndarray  # (h+1) x 2
    target_player: int = 1
    anchor: int = 0  # 0-based row of the last encoder frame (time t)


def window_indices(anchor: int, enc_len: int, horizon: int) -> tuple[range, range, range]:
    """0-based row ranges (encoder, decoder input, target) for a window ending at ``anchor``."""
    c = lead_frames(horizon)
    return (
        range(anchor - enc_len + 1, anchor + 1),
        range(anchor - c, anchor + horizon - c + 1),
        range(anchor, anchor + horizon + 1),
    )


def example_at(series: FeatureSeries, anchor: int, enc_len: int, horizon: int, target_player: int = 1):
    """Cut one window; ``anchor`` is the 0-based row of time t."""
    n = len(series)
    first = anchor - max(enc_len - 1, lead_frames(horizon))
    if first < 0 or anchor + horizon >= n:
        raise SeriesTooShort(f"window at row {anchor} needs rows {first}..{anchor + horizon} of {n}")
    enc, dec, tgt = window_indices(anchor, enc_len, horizon)
    cx, cy = centroid_columns(series.family, target_player)
    fi = series.frame_indices
    origin = fi[enc.start]
    fps = series.frames_per_second
    return TrainingExample(
        enc_in=series.matrix[enc.start : enc.stop],
        enc_times=(fi[enc.start : enc.stop] - origin) / fps,
        dec_in=series.matrix[dec.start : dec.stop, [cx, cy]],
        dec_times=(fi[dec.start : dec.stop] - origin) / fps,
        target=series.matrix[tgt.start : tgt.stop, [cx, cy]],
        target_player=target_player,
        anchor=anchor,
    )


def make_windows(
    series: FeatureSeries,
    enc_len: int,
    horizon: int,
    target_player: int = 1,
    stride: int = 1,
    start: int = 0,
    stop: int | None = None,
) -> list[TrainingExample]:
    """Every teacher-forcing window whose rows fit in ``series[start:stop]``.

    For an encoder window ending at t, the decoder input spans
    ``t - ceil(h/2) .. t + floor(h/2)`` and the target spans ``t .. t + h``.
    """
    if not enc_len >= horizon >= 1:
        raise ValueError(f"need enc_len >= horizon >= 1, got enc_len={enc_len}, horizon={horizon}")
    if stride < 1:
        raise ValueError("stride must be positive")
    stop = len(series) if stop is None else stop
    if stop - start < enc_len + horizon:
        raise SeriesTooShort(f"series of {stop - start} frames is shorter than enc_len + horizon = {enc_len + horizon}")
    # the decoder input reaches ceil(h/2) rows back, one further than the encoder when enc_len = h = 1
    first = start + max(enc_len - 1, lead_frames(horizon))
    anchors = range(first, stop - horizon, stride)
    if not anchors:
        raise SeriesTooShort(f"no window fits in {stop - start} frames for enc_len={enc_len}, horizon={horizon}")
    return [example_at(series, anchor, enc_len, horizon, target_player) for anchor in anchors]


def stack_examples(examples) -> dict[str, np.ndarray]:
    return {
        "enc_in": np.stack([e.enc_in for e in examples]),
        "enc_times": np.stack([e.enc_times for e in examples]),
        "dec_in": np.stack([e.dec_in for e in examples]),
        "dec_times": np.stack([e.dec_times for e in examples]),
        "target": np.stack([e.target for e in examples]),
    }
