"""Repair runs of missing ball detections with per-axis polynomial regression."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import InsufficientContext, SingularFit
from .records import FrameRecord, Recording

DEFAULT_CONTEXT = 10
DEFAULT_DEGREE = 2


def find_gaps(records) -> list[tuple[int, int]]:
    """Return ``[start, stop)`` list positions of each contiguous invisible-ball run."""
    gaps = []
    start = None
    for i, r in enumerate(records):
        if not r.ball_visible and start is None:
            start = i
        elif r.ball_visible and start is not None:
            gaps.append((start, i))
            start = None
    if start is not None:
        gaps.append((start, len(records)))
    return gaps


def _fit_eval(t_fit: np.ndarray, v_fit: np.ndarray, t_eval: np.ndarray, degree: int) -> np.ndarray:
    # centre and scale the abscissa so the Vandermonde system stays well conditioned
    centre = 0.5 * (t_fit.min() + t_fit.max())
    half = max(0.5 * (t_fit.max() - t_fit.min()), 1.0)
    vander = np.vander((t_fit - centre) / half, degree + 1)
    coef, _, rank, _ = np.linalg.lstsq(vander, v_fit, rcond=None)
    if rank < degree + 1:
        raise SingularFit(f"degree-{degree} fit is rank deficient (rank {rank})")
    return np.vander((t_eval - centre) / half, degree + 1) @ coef


def fill_ball_gaps(records, context: int = DEFAULT_CONTEXT, degree: int = DEFAULT_DEGREE):
    """Fill every invisible-ball run from ``context`` visible frames on each side.

    x and y are fitted independently against frame index. Filled frames come
    back with ``ball_visible=True`` and ``interpolated=True``; frames that
    already had a ball are returned untouched.
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if context < 1:
        raise ValueError("context must be at least 1")
    seq = list(records)
    out = list(seq)
    for start, stop in find_gaps(seq):
        lo, hi = start - context, stop + context
        if lo < 0 or hi > len(seq):
            raise InsufficientContext(
                f"gap at frames {seq[start].frame_index}..{seq[stop - 1].frame_index} "
                f"touches the sequence boundary (need {context} visible frames each side)"
            )
        flank = seq[lo:start] + seq[stop:hi]
        if not all(r.ball_visible for r in flank):
            raise InsufficientContext(
                f"gap at frames {seq[start].frame_index}..{seq[stop - 1].frame_index} "
                f"has fewer than {context} visible frames on one side"
            )
        t_fit = np.array([r.frame_index for r in flank], dtype=float)
        xy = np.array([r.ball for r in flank], dtype=float)
        t_gap = np.array([r.frame_index for r in seq[start:stop]], dtype=float)
        xs = _fit_eval(t_fit, xy[:, 0], t_gap, degree)
        ys = _fit_eval(t_fit, xy[:, 1], t_gap, degree)
        for k, i in enumerate(range(start, stop)):
            out[i] = replace(seq[i], ball=(float(xs[k]), float(ys[k])), ball_visible=True, interpolated=True)
    if isinstance(records, Recording):
        return Recording(out, records.frame_size, records.fps, dict(records.extra))
    return out
