"""Small builders shared by several test modules."""

import numpy as np

from pose2traj.data import FrameRecord, Recording


def frame(i, ball=(100.0, 100.0), p1=(400.0, 500.0), p2=(700.0, 200.0), jitter=0.0):
    joints = lambda c: tuple((c[0] + 3.0 * j + jitter, c[1] - 2.0 * j) for j in range(17))  # noqa: E731
    return FrameRecord(
        frame_index=i,
        timestamp_ms=i * 1000.0 / 60.0,
        p1_centroid=p1,
        p1_joints=joints(p1),
        p2_centroid=p2,
        p2_joints=joints(p2),
        ball=ball,
        ball_visible=ball is not None,
    )


def ball_track(xs, ys, missing=()):
    """Recording whose ball follows (xs[i], ys[i]); frames in ``missing`` have no ball."""
    missing = set(missing)
    recs = [frame(i, None if i in missing else (float(x), float(y))) for i, (x, y) in enumerate(zip(xs, ys))]
    return Recording(recs)


def linear_motion_recording(n, velocity=(1.5, -0.8), start=(300.0, 400.0)):
    recs = []
    for i in range(n):
        p1 = (start[0] + velocity[0] * i, start[1] + velocity[1] * i)
        recs.append(frame(i, ball=(640.0 + np.sin(i / 9.0) * 200.0, 300.0), p1=p1))
    return Recording(recs)
