"""MEDE, the persistence baseline, the family x training-length x horizon grid, and reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data.features import (
    Family,
    FeatureSeries,
    build_feature_series,
    centroid_columns,
    denormalize,
    example_at,
    lead_frames,
    ms_to_frames,
    stack_examples,
)
from .data.records import Recording
from .errors import EmptySequence, LengthMismatch, MissingCheckpoint, SeriesTooShort
from .inference import AUTOREGRESSIVE, TEACHER_FORCED, predict_batch

TRAIN_LENGTHS_MS = (500, 750, 1000)
HORIZONS_MS = (50, 100, 150, 200, 250, 500, 1000)
REPORT_COLUMNS = ("family", "train_ms", "horizon_ms", "mede_px", "n_windows", "mode")
PROTOCOL = (
    "MEDE over future rows t+1..t+h of each window; windows stride = horizon frames; "
    "mean over windows; per-axis denormalization to pixels"
)


def mede(truth, pred) -> float:
    """Mean Euclidean distance between matching rows of two (T, 2) sequences."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if truth.shape != pred.shape:
        raise LengthMismatch(f"truth {truth.shape} and prediction {pred.shape} differ")
    if truth.ndim != 2 or truth.shape[1] != 2:
        raise LengthMismatch(f"expected (T, 2) sequences, got {truth.shape}")
    if truth.shape[0] == 0:
        raise EmptySequence("MEDE of an empty sequence")
    d = truth - pred
    return float(np.mean(np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2)))


def persistence_baseline(last_centroid, horizon: int) -> np.ndarray:
    """Repeat the last observed centroid for times t .. t+h."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return np.tile(np.asarray(last_centroid, dtype=np.float64).reshape(1, 2), (horizon + 1, 1))


def label(ms: float) -> str:
    return "1 s" if ms == 1000 else f"{ms:g} ms"


@dataclass
class EvalResult:
    family: str
    train_len_ms: float
    horizon_ms: float
    mede_px: float
    n_windows: int
    mode: str = AUTOREGRESSIVE
    truth_px: np.ndarray | None = field(default=None, compare=False, repr=False)
    pred_px: np.ndarray | None = field(default=None, compare=False, repr=False)

    def row(self) -> dict:
        return {
            "family": self.family,
            "train_ms": self.train_len_ms,
            "horizon_ms": self.horizon_ms,
            "mede_px": self.mede_px,
            "n_windows": self.n_windows,
            "mode": self.mode,
        }


def evaluation_anchors(n: int, enc_len: int, horizon: int, start: int = 0, stop: int | None = None) -> list[int]:
    stop = n if stop is None else stop
    first = start + max(enc_len - 1, lead_frames(horizon))
    return list(range(first, stop - horizon, horizon))


def evaluate_cell(
    checkpoint,
    series: FeatureSeries,
    horizon_ms: float,
    mode: str = AUTOREGRESSIVE,
    start: int = 0,
    stop: int | None = None,
    train_len_ms: float | None = None,
    batch_size: int = 256,
    predictor=None,
) -> EvalResult:
    """Average MEDE (pixels) over non-overlapping windows of ``series[start:stop]``.

    ``predictor(batch, horizon) -> (B, h+1, 2)`` overrides the model, e.g. for
    baselines or oracle checks; it receives the stacked window arrays.
    """
    config = checkpoint.model_config if checkpoint is not None else None
    fps = series.frames_per_second
    h = ms_to_frames(horizon_ms, fps)
    enc_len = config.enc_len_frames if config else ms_to_frames(train_len_ms or 500, fps)
    player = config.target_player if config else 1
    anchors = evaluation_anchors(len(series), enc_len, h, start, stop)
    if not anchors:
        raise SeriesTooShort(f"no {h}-frame evaluation window fits in {len(series)} frames")
    truths, preds = [], []
    for lo in range(0, len(anchors), batch_size):
        batch = stack_examples([example_at(series, a, enc_len, h, player) for a in anchors[lo : lo + batch_size]])
        if predictor is not None:
            out = predictor(batch, h)
        else:
            out = predict_batch(
                checkpoint.params,
                config,
                batch["enc_in"],
                batch["enc_times"],
                batch["dec_in"],
                batch["dec_times"],
                h,
                mode,
            )
        truths.append(batch["target"])
        preds.append(out)
    truth = denormalize(np.concatenate(truths), series.scale)
    pred = denormalize(np.concatenate(preds), series.scale)
    errors = [mede(t[1:], p[1:]) for t, p in zip(truth, pred)]
    if train_len_ms is None:
        train_len_ms = round(enc_len * 1000.0 / fps)
    return EvalResult(
        series.family.value, float(train_len_ms), float(horizon_ms), float(np.mean(errors)), len(errors), mode, truth, pred
    )


def persistence_predictor(batch, horizon: int) -> np.ndarray:
    c = lead_frames(horizon)
    last = batch["dec_in"][:, c : c + 1]
    return np.repeat(last, horizon + 1, axis=1)


def evaluate_grid(
    checkpoints: Mapping[tuple[str, float], object],
    series: Mapping[str, FeatureSeries] | Recording,
    horizons_ms: Sequence[float] = HORIZONS_MS,
    mode: str = AUTOREGRESSIVE,
    families: Sequence[str] | None = None,
    train_lengths_ms: Sequence[float] | None = None,
    start: int = 0,
    stop: int | None = None,
) -> list[EvalResult]:
    """One :class:`EvalResult` per (family, training length, horizon) cell.

    ``checkpoints`` maps ``(family, train_len_ms)`` to a checkpoint. Grid axes
    default to the keys present. ``series`` is a per-family mapping or a
    recording from which each family's series is built.
    """
    families = list(families or sorted({Family(f).value for f, _ in checkpoints}))
    lengths = list(train_lengths_ms or sorted({float(t) for _, t in checkpoints}))
    results = []
    for fam in families:
        if isinstance(series, Recording):
            fam_series = build_feature_series(series, fam)
        else:
            try:
                fam_series = series[fam]
            except KeyError:
                raise SeriesTooShort(f"no series supplied for {fam}") from None
        for tl in lengths:
            key = (fam, tl) if (fam, tl) in checkpoints else (Family(fam), tl)
            ckpt = checkpoints.get(key) or checkpoints.get((fam, int(tl)))
            if ckpt is None:
                raise MissingCheckpoint(f"no checkpoint for {fam} trained on {label(tl)}")
            for hz in horizons_ms:
                results.append(evaluate_cell(ckpt, fam_series, hz, mode, start, stop, tl))
    return results


# --- reports -----------------------------------------------------------------


def _num(v) -> str:
    return repr(float(v))


def _meta_lines(meta: Mapping | None) -> list[str]:
    return [f"# {k}={v}" for k, v in (meta or {}).items()]


def emit_report(table: Sequence[EvalResult], format: str = "csv", meta: Mapping | None = None) -> bytes:
    """Serialize results as csv, json or a family x horizon markdown matrix.

    ``meta`` entries become ``# key=value`` lines ahead of the csv header, a
    ``meta`` object in json, and a bullet list above the markdown table.
    """
    if format == "csv":
        buf = io.StringIO()
        for line in _meta_lines(meta):
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in table:
            w.writerow([r.family, _num(r.train_len_ms), _num(r.horizon_ms), _num(r.mede_px), r.n_windows, r.mode])
        return buf.getvalue().encode()
    if format == "json":
        doc = {"meta": dict(meta or {}), "results": [r.row() for r in table]}
        return (json.dumps(doc, indent=2) + "\n").encode()
    if format == "md":
        return _markdown(table, meta).encode()
    raise ValueError(f"unknown report format {format!r}")


def _markdown(table: Sequence[EvalResult], meta: Mapping | None) -> str:
    horizons = sorted({r.horizon_ms for r in table} | set(map(float, HORIZONS_MS)))
    horizons = [h for h in horizons if h in map(float, HORIZONS_MS)] + [
        h for h in horizons if h not in map(float, HORIZONS_MS)
    ]
    cells = {(r.family, r.train_len_ms, r.mode, r.horizon_ms): r.mede_px for r in table}
    rows = sorted({(r.family, r.train_len_ms, r.mode) for r in table})
    lines = [f"- {k}: {v}" for k, v in (meta or {}).items()]
    if lines:
        lines.append("")
    lines.append("| Model | Training Seq-len | Mode | " + " | ".join(label(h) for h in horizons) + " |")
    lines.append("|" + "---|" * (3 + len(horizons)))
    for fam, tl, mode in rows:
        vals = [cells.get((fam, tl, mode, h)) for h in horizons]
        txt = ["" if v is None else f"{v:.1f}" for v in vals]
        lines.append(f"| {fam} | {label(tl)} | {mode} | " + " | ".join(txt) + " |")
    return "\n".join(lines) + "\n"


def parse_report(blob: bytes, format: str = "csv") -> list[EvalResult]:
    text = blob.decode()
    if format == "csv":
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        reader = csv.DictReader(lines)
        return [
            EvalResult(
                row["family"],
                float(row["train_ms"]),
                float(row["horizon_ms"]),
                float(row["mede_px"]),
                int(row["n_windows"]),
                row["mode"],
            )
            for row in reader
        ]
    if format == "json":
        doc = json.loads(text)
        return [
            EvalResult(r["family"], float(r["train_ms"]), float(r["horizon_ms"]), float(r["mede_px"]), int(r["n_windows"]), r["mode"])
            for r in doc["results"]
        ]
    raise ValueError(f"cannot parse {format!r} reports")


def write_traces(table: Sequence[EvalResult], out_dir: str | Path, max_windows: int = 5) -> list[Path]:
    """Per-cell CSVs of predicted vs true x and y for plotting.

    Each file holds the first ``max_windows`` evaluation windows laid end to
    end with columns ``window, step, true_x, pred_x, true_y, pred_y``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in table:
        if r.truth_px is None:
            continue
        name = f"trace_{r.family}_{r.train_len_ms:g}ms_{r.horizon_ms:g}ms_{r.mode}.csv"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["window", "step", "true_x", "pred_x", "true_y", "pred_y"])
        for k, (t, p) in enumerate(zip(r.truth_px[:max_windows], r.pred_px[:max_windows])):
            for step in range(len(t)):
                w.writerow([k, step, _num(t[step, 0]), _num(p[step, 0]), _num(t[step, 1]), _num(p[step, 1])])
        (out_dir / name).write_text(buf.getvalue())
        paths.append(out_dir / name)
    return paths


def total_variation(traces: np.ndarray) -> float:
    """Mean over windows and axes of sum |y[t+1] - y[t]| for (W, T, 2) traces."""
    traces = np.asarray(traces)
    return float(np.mean(np.abs(np.diff(traces, axis=1)).sum(axis=1)))


__all__ = [
    "AUTOREGRESSIVE",
    "TEACHER_FORCED",
    "EvalResult",
    "HORIZONS_MS",
    "TRAIN_LENGTHS_MS",
    "centroid_columns",
    "emit_report",
    "evaluate_cell",
    "evaluate_grid",
    "mede",
    "parse_report",
    "persistence_baseline",
    "persistence_predictor",
    "total_variation",
    "write_traces",
]
