"""Synthetic singles rallies for desk-scale experiments.

The ball shuttles between court halves along parabolic image-space arcs. The
receiving player starts chasing the landing point a few frames after each
hit, closing a fixed fraction ``pursuit_gain`` of the remaining distance per
frame, while the hitter drifts back towards its home position. Observed
centroids carry Gaussian detection noise; joints are a fixed COCO skeleton
around the true position with a speed-driven gait swing and pixel jitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from .records import N_JOINTS, FrameRecord, Recording

# standing-pose offsets (px) from the box centre, COCO order
SKELETON = np.array(
    [
        (0, -70), (-4, -74), (4, -74), (-9, -71), (9, -71),
        (-20, -50), (20, -50), (-28, -25), (28, -25), (-30, 0), (30, 0),
        (-12, 5), (12, 5), (-14, 40), (14, 40), (-15, 75), (15, 75),
    ],
    dtype=np.float64,
)
# horizontal gait swing per joint: +1 / -1 for opposite limb phases
_SWING = np.array([0, 0, 0, 0, 0, 0, 0, -0.5, 0.5, -1, 1, 0, 0, 1, -1, 1.4, -1.4])
GAIT_AMPLITUDE_PX = 6.0
FAR_PLAYER_SCALE = 0.75


@dataclass(frozen=True)
class SynthParams:
    n_frames: int = 2000
    fps: float = 60.0
    seed: int = 0
    pursuit_gain: float = 0.08
    joint_jitter_px: float = 1.0
    ball_speed_px_per_frame: float = 10.0
    occlusion_gap_prob: float = 0.0
    frame_size: tuple[int, int] = (1280, 720)
    centroid_noise_px: float = 0.5
    reaction_frames: int = 6

    def validate(self) -> None:
        w, h = self.frame_size
        problems = []
        if self.n_frames < 1:
            problems.append("n_frames must be >= 1")
        if self.fps <= 0:
            problems.append("fps must be > 0")
        if not 0.0 <= self.pursuit_gain <= 1.0:
            problems.append("pursuit_gain must lie in [0, 1]")
        if self.joint_jitter_px < 0 or self.centroid_noise_px < 0:
            problems.append("noise levels must be non-negative")
        if self.ball_speed_px_per_frame <= 0:
            problems.append("ball_speed_px_per_frame must be > 0")
        if not 0.0 <= self.occlusion_gap_prob <= 1.0:
            problems.append("occlusion_gap_prob must lie in [0, 1]")
        if w < 400 or h < 300:
            problems.append("frame_size must be at least 400x300")
        if self.reaction_frames < 0:
            problems.append("reaction_frames must be >= 0")
        if problems:
            raise InvalidParams("; ".join(problems))


def _court(frame_size):
    """Home positions and landing boxes as fractions of the frame, scaled to pixels."""
    w, h = frame_size
    return {
        1: {"home": np.array([0.5 * w, 0.83 * h]), "box": (0.27 * w, 0.73 * w, 0.67 * h, 0.89 * h)},
        2: {"home": np.array([0.5 * w, 0.24 * h]), "box": (0.34 * w, 0.66 * w, 0.18 * h, 0.32 * h)},
    }


def synth_rally(params: SynthParams) -> Recording:
    """Generate ``params.n_frames`` frames; output is a pure function of ``params``."""
    params.validate()
    rng = np.random.default_rng(params.seed)
    n = params.n_frames
    w, h = params.frame_size
    court = _court(params.frame_size)

    state = {1: court[1]["home"].copy(), 2: court[2]["home"].copy()}
    target = {1: state[1].copy(), 2: state[2].copy()}
    phase = {1: 0.0, 2: 0.0}

    ball = np.empty((n, 2))
    visible = np.ones(n, dtype=bool)
    cents = {1: np.empty((n, 2)), 2: np.empty((n, 2))}
    joints = {1: np.empty((n, N_JOINTS, 2)), 2: np.empty((n, N_JOINTS, 2))}

    hitter = 1
    start = state[1] + np.array([0.0, -60.0])
    frame = 0
    while frame < n:
        receiver = 3 - hitter
        x0, x1, y0, y1 = court[receiver]["box"]
        land = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        dist = float(np.linalg.norm(land - start))
        dur = max(20, int(round(dist / params.ball_speed_px_per_frame)))
        height = min(0.15 * dist, 0.11 * h)
        gap = None
        if dur >= 30 and frame + dur <= n and rng.random() < params.occlusion_gap_prob:
            length = int(rng.integers(5, dur - 20 + 1))
            first = int(rng.integers(10, dur - 10 - length + 1))
            gap = (first, first + length)
        for k in range(dur):
            if frame >= n:
                break
            s = k / dur
            ball[frame] = start + s * (land - start) - np.array([0.0, 4.0 * height * s * (1.0 - s)])
            if gap is not None and gap[0] <= k < gap[1]:
                visible[frame] = False
            if k == params.reaction_frames:
                target[receiver] = land.copy()
            if k == 0:
                target[hitter] = court[hitter]["home"].copy()
            for p in (1, 2):
                step = params.pursuit_gain * (target[p] - state[p])
                state[p] = state[p] + step
                speed = float(np.hypot(*step))
                phase[p] += 0.15 * speed
                scale = 1.0 if p == 1 else FAR_PLAYER_SCALE
                offs = SKELETON * scale
                offs[:, 0] += GAIT_AMPLITUDE_PX * scale * np.tanh(speed) * _SWING * np.sin(phase[p])
                offs[:, 1] += 1.5 * scale * np.tanh(speed) * np.abs(np.sin(phase[p]))
                jitter = rng.normal(0.0, params.joint_jitter_px, (N_JOINTS, 2)) if params.joint_jitter_px else 0.0
                joints[p][frame] = state[p] + offs + jitter
                noise = rng.normal(0.0, params.centroid_noise_px, 2) if params.centroid_noise_px else 0.0
                cents[p][frame] = state[p] + noise
            frame += 1
        start = land
        hitter = receiver

    lo, hi = np.array([1.0, 1.0]), np.array([w - 1.0, h - 1.0])
    ball = np.clip(ball, lo, hi)
    for p in (1, 2):
        cents[p] = np.clip(cents[p], lo, hi)
        joints[p] = np.clip(joints[p], lo, hi)

    ms_per_frame = 1000.0 / params.fps
    c1, c2 = cents[1].tolist(), cents[2].tolist()
    j1, j2 = joints[1].tolist(), joints[2].tolist()
    b = ball.tolist()
    records = []
    for i in range(n):
        bp = tuple(b[i]) if visible[i] else None
        records.append(
            FrameRecord(
                frame_index=i,
                timestamp_ms=i * ms_per_frame,
                p1_centroid=tuple(c1[i]),
                p1_joints=tuple(tuple(p) for p in j1[i]),
                p2_centroid=tuple(c2[i]),
                p2_joints=tuple(tuple(p) for p in j2[i]),
                ball=bp,
                ball_visible=bp is not None,
            )
        )
    return Recording(records, (int(w), int(h)), float(params.fps))
