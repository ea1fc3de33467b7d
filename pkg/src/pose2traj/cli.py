"""Command-line entry point: ``pose2traj <subcommand>``.

Exit statuses: 0 success, 2 input/schema error, 3 numeric failure,
4 missing artifact. Every file written starts with ``#`` lines echoing the
effective configuration (checkpoints carry it in their header instead).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import click

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, format_config, load_config_file, parse_config_text, split_config
from .data import (
    SynthParams,
    build_feature_series,
    fill_ball_gaps,
    format_from_path,
    make_windows,
    ms_to_frames,
    parse_frame_records,
    synth_rally,
    write_frame_records,
)
from .errors import InputError, MissingArtifact, Pose2TrajError
from .evaluation import (
    AUTOREGRESSIVE,
    HORIZONS_MS,
    PROTOCOL,
    TEACHER_FORCED,
    emit_report,
    evaluate_grid,
    parse_report,
    write_traces,
)
from .inference import forecast
from .model import ModelConfig
from .training import metrics_csv, train

def _read_recording(path: str):
    p = Path(path)
    if not p.is_file():
        raise MissingArtifact(f"no such input file: {path}")
    return parse_frame_records(p.read_bytes(), format_from_path(path))


def _write(path: str | None, blob: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(blob)
        sys.stdout.flush()
    else:
        Path(path).write_bytes(blob)


def _header(values: dict) -> str:
    return "".join(f"# {line}\n" for line in format_config(values).splitlines())


def _prepend_header(blob: bytes, values: dict, fmt: str) -> bytes:
    """Echo ``values`` ahead of a frame file; jsonl has no comment syntax so it is left alone."""
    if fmt == "csv":
        return _header(values).encode() + blob
    return blob


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except Pose2TrajError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)


@click.group(cls=_Group)
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Tennis player trajectory forecasting from pose, ball and centroid tracks."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.argument("output_path", metavar="OUTPUT", required=False)
def ingest(input_path, output_path):
    """Validate a frame file and optionally convert it (format follows the extension)."""
    rec = _read_recording(input_path)
    n_missing = sum(1 for r in rec if not r.ball_visible)
    click.echo(
        f"{len(rec)} frames, frame_size={rec.frame_size[0]}x{rec.frame_size[1]}, fps={rec.fps:g}, "
        f"ball missing in {n_missing}",
        err=True,
    )
    if output_path:
        fmt = format_from_path(output_path)
        _write(output_path, write_frame_records(rec, fmt))


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.argument("output_path", metavar="OUTPUT")
@click.option("--context", default=10, show_default=True, help="Visible frames used on each side of a gap.")
@click.option("--degree", default=2, show_default=True, help="Polynomial degree of the fit.")
def gapfill(input_path, output_path, context, degree):
    """Fill missing ball positions by polynomial regression over neighbouring frames."""
    rec = _read_recording(input_path)
    filled = fill_ball_gaps(rec, context=context, degree=degree)
    n = sum(1 for r in filled if r.interpolated)
    click.echo(f"filled {n} frames", err=True)
    fmt = format_from_path(output_path)
    blob = write_frame_records(filled, fmt)
    _write(output_path, _prepend_header(blob, {"context": context, "degree": degree, "input": input_path}, fmt))


@main.command()
@click.argument("output_path", metavar="OUTPUT")
@click.option("--n-frames", default=SynthParams.n_frames, show_default=True)
@click.option("--fps", default=SynthParams.fps, show_default=True)
@click.option("--seed", default=SynthParams.seed, show_default=True)
@click.option("--pursuit-gain", default=SynthParams.pursuit_gain, show_default=True)
@click.option("--joint-jitter-px", default=SynthParams.joint_jitter_px, show_default=True)
@click.option("--ball-speed-px-per-frame", default=SynthParams.ball_speed_px_per_frame, show_default=True)
@click.option("--occlusion-gap-prob", default=SynthParams.occlusion_gap_prob, show_default=True)
@click.option("--frame-size", default="1280x720", show_default=True, help="WIDTHxHEIGHT in pixels.")
@click.option("--centroid-noise-px", default=SynthParams.centroid_noise_px, show_default=True)
@click.option("--reaction-frames", default=SynthParams.reaction_frames, show_default=True)
def synth(output_path, frame_size, **kw):
    """Generate a synthetic rally recording."""
    try:
        w, h = (int(v) for v in frame_size.lower().split("x"))
    except ValueError:
        raise InputError(f"--frame-size must look like 1280x720, got {frame_size!r}") from None
    params = SynthParams(frame_size=(w, h), **kw)
    params.validate()
    rec = synth_rally(params)
    fmt = format_from_path(output_path)
    _write(output_path, _prepend_header(write_frame_records(rec, fmt), asdict(params), fmt))


def _parse_sets(pairs) -> dict:
    return parse_config_text("\n".join(pairs))


@main.command("train")
@click.option("--input", "input_path", required=True, help="Frame file (csv or jsonl) with a visible ball everywhere.")
@click.option("--family", type=click.Choice(["F1", "F2", "F3", "F4"]))
@click.option("--enc-ms", type=float, help="Encoder window length in ms (default 500).")
@click.option("--horizon-ms", type=float, help="Prediction horizon in ms (default 500).")
@click.option("--epochs", type=int, help="Training epochs (default 30).")
@click.option("--seed", type=int, help="Seed for init, shuffling and dropout (default 0).")
@click.option("--stride", default=1, show_default=True, help="Frames between consecutive training windows.")
@click.option("--config", "config_path", help="key=value file of ModelConfig/TrainConfig fields.")
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="Override any config field; repeatable.")
@click.option("--out", "out_path", required=True, help="Checkpoint path.")
@click.option("--metrics", "metrics_path", help="Metrics CSV path (default: OUT with .metrics.csv).")
def train_cmd(input_path, family, enc_ms, horizon_ms, epochs, seed, stride, config_path, sets, out_path, metrics_path):
    """Train one model with teacher forcing and write a checkpoint plus metrics CSV.

    Precedence: defaults < --config file < --set < dedicated flags.
    """
    values = load_config_file(config_path) if config_path else {}
    values.update(_parse_sets(sets))
    rec = _read_recording(input_path)
    fps = float(values.get("fps", rec.fps))
    if family:
        values["family"] = family
    if enc_ms is not None:
        values["enc_len_frames"] = ms_to_frames(enc_ms, fps)
    if horizon_ms is not None:
        values["horizon_frames"] = ms_to_frames(horizon_ms, fps)
    if epochs is not None:
        values["epochs"] = epochs
    if seed is not None:
        values["seed"] = seed
        values["shuffle_seed"] = seed
    values.setdefault("fps", fps)
    model_kw, train_kw = split_config(values)
    model_config = ModelConfig(**model_kw)
    train_config = TrainConfig(**train_kw)
    model_config.validate()
    train_config.validate()

    series = build_feature_series(rec, model_config.family)
    examples = make_windows(
        series, model_config.enc_len_frames, model_config.horizon_frames, model_config.target_player, stride=stride
    )
    click.echo(f"{len(examples)} windows, family {model_config.family}", err=True)
    ckpt = train(examples, model_config, train_config)
    save_checkpoint(ckpt, out_path)
    effective = {**model_config.to_dict(), **train_config.to_dict(), "input": input_path, "stride": stride}
    metrics_path = metrics_path or str(Path(out_path).with_suffix(".metrics.csv"))
    Path(metrics_path).write_text(metrics_csv(ckpt.metrics_log, format_config(effective).splitlines()))
    last = ckpt.metrics_log[-1]
    click.echo(f"final train_mse={last['train_mse']:.6g} val_mse={last['val_mse']}", err=True)


@main.command()
@click.option("--checkpoint", "ckpt_path", required=True)
@click.option("--input", "input_path", required=True)
@click.option("--at-frame", type=int, help="Frame index of time t (default: last frame).")
@click.option("--horizon-ms", type=float, help="Default: the trained horizon.")
@click.option("--output", "output_path", default="-", show_default=True)
def predict(ckpt_path, input_path, at_frame, horizon_ms, output_path):
    """Forecast the target player's centroid for frames t .. t+h (pixels)."""
    ckpt = load_checkpoint(ckpt_path)
    rec = _read_recording(input_path)
    horizon = None if horizon_ms is None else ms_to_frames(horizon_ms, ckpt.model_config.fps)
    frames, pts = forecast(ckpt, rec, at_frame, horizon)
    buf = io.StringIO()
    meta = {
        **ckpt.model_config.to_dict(),
        "checkpoint": ckpt_path,
        "input": input_path,
        "at_frame": int(frames[0]),
        "predicted_frames": len(frames) - 1,
        "mode": AUTOREGRESSIVE,
    }
    buf.write(_header(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "frame_index", "x_px", "y_px"])
    for step, (f, (x, y)) in enumerate(zip(frames, pts)):
        w.writerow([step, int(f), repr(float(x)), repr(float(y))])
    _write(output_path, buf.getvalue().encode())


def parse_grid_file(text: str) -> dict:
    """Grid file: ``F1@500 = path.ckpt`` lines plus optional ``horizons_ms``, ``mode``, ``start_frame``."""
    raw = parse_config_text(text)
    plan = {"checkpoints": {}, "horizons_ms": list(HORIZONS_MS), "mode": AUTOREGRESSIVE, "start_frame": 0}
    for key, value in raw.items():
        if "@" in key:
            fam, ms = key.split("@", 1)
            try:
                plan["checkpoints"][(fam.strip().upper(), float(ms))] = str(value)
            except ValueError:
                raise InputError(f"grid key {key!r} should look like F1@500") from None
        elif key in ("horizons_ms", "mode", "start_frame"):
            plan[key] = value
        else:
            raise InputError(f"unknown grid key {key!r}")
    if not plan["checkpoints"]:
        raise InputError("grid file lists no checkpoints")
    if plan["mode"] not in (AUTOREGRESSIVE, TEACHER_FORCED):
        raise InputError(f"mode must be {AUTOREGRESSIVE} or {TEACHER_FORCED}")
    return plan


@main.command()
@click.option("--grid", "grid_path", required=True, help="Grid file (see README).")
@click.option("--input", "input_path", required=True, help="Evaluation recording.")
@click.option("--mode", type=click.Choice([AUTOREGRESSIVE, TEACHER_FORCED]), help="Overrides the grid file.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "md"]), default="csv", show_default=True)
@click.option("--output", "output_path", default="-", show_default=True)
@click.option("--traces-dir", help="Also write per-cell predicted-vs-truth X/Y trace CSVs here.")
def evaluate(grid_path, input_path, mode, fmt, output_path, traces_dir):
    """Evaluate checkpoints over a family x training length x horizon grid."""
    if not Path(grid_path).is_file():
        raise MissingArtifact(f"no such grid file: {grid_path}")
    plan = parse_grid_file(Path(grid_path).read_text())
    mode = mode or plan["mode"]
    checkpoints = {key: load_checkpoint(path) for key, path in plan["checkpoints"].items()}
    rec = _read_recording(input_path)
    families = sorted({fam for fam, _ in checkpoints})
    series = {fam: build_feature_series(rec, fam) for fam in families}
    table = evaluate_grid(checkpoints, series, plan["horizons_ms"], mode, start=int(plan["start_frame"]))
    meta = {
        "input": input_path,
        "grid": grid_path,
        "mode": mode,
        "pixel_scale": f"{rec.frame_size[0]}x{rec.frame_size[1]}",
        "fps": rec.fps,
        "protocol": PROTOCOL,
        "checkpoints": json.dumps({f"{k[0]}@{k[1]:g}": v for k, v in plan["checkpoints"].items()}),
    }
    _write(output_path, emit_report(table, fmt, meta))
    if traces_dir:
        write_traces(table, traces_dir)


@main.command()
@click.argument("input_path", metavar="INPUT")
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "md"]), default="md", show_default=True)
@click.option("--output", "output_path", default="-", show_default=True)
def report(input_path, fmt, output_path):
    """Re-render an evaluation table (csv or json) as csv, json or markdown."""
    p = Path(input_path)
    if not p.is_file():
        raise MissingArtifact(f"no such report: {input_path}")
    blob = p.read_bytes()
    src_fmt = "json" if input_path.endswith(".json") else "csv"
    try:
        table = parse_report(blob, src_fmt)
        if src_fmt == "json":
            meta = json.loads(blob)["meta"]
        else:
            meta = dict(
                line[2:].split("=", 1) for line in blob.decode().splitlines() if line.startswith("# ") and "=" in line
            )
    except (KeyError, ValueError) as exc:
        raise InputError(f"{input_path}: not an evaluation table ({exc})") from None
    if not table:
        raise InputError(f"{input_path}: empty evaluation table")
    _write(output_path, emit_report(table, fmt, meta))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--checkpoint-dir", default=".", show_default=True, help="Directory /predict resolves checkpoint names in.")
def serve(host, port, checkpoint_dir):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(checkpoint_dir), host=host, port=port)


if __name__ == "__main__":
    main()
