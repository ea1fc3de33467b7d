"""Per-frame keypoint records and their CSV / JSONL file formats.

Both formats start with one metadata line carrying frame size and frame rate:

* CSV:   ``# frame_size=1280x720 fps=60.0`` followed by the mandatory header
  row and one row per frame (77 columns).
* JSONL: ``{"meta": {"frame_size": [1280, 720], "fps": 60.0}}`` followed by
  one object per frame whose keys are the :class:`FrameRecord` field names.

Floats are written with ``repr`` so a parse/write cycle is byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Iterator, Sequence

from ..errors import NonMonotoneFrames, SchemaError

N_JOINTS = 17

# COCO keypoint order as emitted by standard top-down pose estimators.
COCO_JOINTS = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)

DEFAULT_FRAME_SIZE = (1280, 720)
DEFAULT_FPS = 60.0

Point = tuple[float, float]


def _player_columns(p: int) -> list[str]:
    cols = [f"p{p}_cx", f"p{p}_cy"]
    for j in range(N_JOINTS):
        cols += [f"p{p}_j{j:02d}_x", f"p{p}_j{j:02d}_y"]
    return cols


CSV_COLUMNS = (
    ["frame_index", "timestamp_ms"]
    + _player_columns(1)
    + _player_columns(2)
    + ["ball_x", "ball_y", "ball_visible"]
)


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    timestamp_ms: float
    p1_centroid: Point
    p1_joints: tuple[Point, ...]
    p2_centroid: Point
    p2_joints: tuple[Point, ...]
    ball: Point | None
    ball_visible: bool
    interpolated: bool = False

    def __post_init__(self):
        if len(self.p1_joints) != N_JOINTS or len(self.p2_joints) != N_JOINTS:
            raise SchemaError(f"frame {self.frame_index}: expected {N_JOINTS} joints per player")
        if self.ball_visible != (self.ball is not None):
            raise SchemaError(f"frame {self.frame_index}: ball_visible disagrees with ball presence")


@dataclass
class Recording:
    """An ordered run of frames plus the capture metadata needed to interpret pixels."""

    records: list[FrameRecord]
    frame_size: tuple[int, int] = DEFAULT_FRAME_SIZE
    fps: float = DEFAULT_FPS
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[FrameRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


def check_monotone(records: Sequence[FrameRecord]) -> None:
    for prev, cur in zip(records, records[1:]):
        if cur.frame_index <= prev.frame_index:
            raise NonMonotoneFrames(
                f"frame_index {cur.frame_index} follows {prev.frame_index}; indices must strictly increase"
            )


# --- CSV ---------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def _meta_comment(frame_size, fps) -> str:
    return f"# frame_size={frame_size[0]}x{frame_size[1]} fps={_fmt(fps)}"


def _parse_meta_comment(line: str, lineno: int) -> tuple[tuple[int, int], float]:
    if not line.startswith("#"):
        raise SchemaError(f"line {lineno}: expected '# frame_size=WxH fps=F' metadata line")
    fields = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
    try:
        w, h = fields["frame_size"].lower().split("x")
        return (int(w), int(h)), float(fields["fps"])
    except (KeyError, ValueError):
        raise SchemaError(f"line {lineno}: malformed metadata line {line!r}") from None


def _record_to_row(r: FrameRecord) -> list[str]:
    row = [str(r.frame_index), _fmt(r.timestamp_ms)]
    for c, joints in ((r.p1_centroid, r.p1_joints), (r.p2_centroid, r.p2_joints)):
        row += [_fmt(c[0]), _fmt(c[1])]
        for x, y in joints:
            row += [_fmt(x), _fmt(y)]
    if r.ball is None:
        row += ["", "", "0"]
    else:
        row += [_fmt(r.ball[0]), _fmt(r.ball[1]), "1"]
    return row


def _row_to_record(row: list[str], lineno: int) -> FrameRecord:
    if len(row) != len(CSV_COLUMNS):
        raise SchemaError(f"line {lineno}: expected {len(CSV_COLUMNS)} columns, got {len(row)}")
    try:
        frame_index = int(row[0])
        ts = float(row[1])
        nums = [float(v) for v in row[2:74]]
        visible = row[76].strip()
        if visible not in ("0", "1"):
            raise ValueError(f"ball_visible must be 0 or 1, got {visible!r}")
        if visible == "1":
            ball = (float(row[74]), float(row[75]))
        else:
            if row[74] or row[75]:
                raise ValueError("ball cells must be empty when ball_visible=0")
            ball = None
    except ValueError as exc:
        raise SchemaError(f"line {lineno}: {exc}") from None

    def player(off: int):
        c = (nums[off], nums[off + 1])
        joints = tuple((nums[off + 2 + 2 * j], nums[off + 3 + 2 * j]) for j in range(N_JOINTS))
        return c, joints

    c1, j1 = player(0)
    c2, j2 = player(36)
    return FrameRecord(frame_index, ts, c1, j1, c2, j2, ball, ball is not None)


def write_csv(recording: Recording, sink: IO[str]) -> None:
    sink.write(_meta_comment(recording.frame_size, recording.fps) + "\n")
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in recording.records:
        writer.writerow(_record_to_row(r))


def _is_meta_comment(line: str) -> bool:
    keys = {tok.split("=", 1)[0] for tok in line[1:].split() if "=" in tok}
    return {"frame_size", "fps"} <= keys


def read_csv(source: IO[str]) -> Recording:
    """Parse the CSV layout; other ``#`` lines ahead of the header are ignored."""
    lines = source.read().splitlines()
    if not lines:
        raise SchemaError("line 1: empty input")
    n_comments = 0
    while n_comments < len(lines) and lines[n_comments].startswith("#"):
        n_comments += 1
    meta = [i for i in range(n_comments) if _is_meta_comment(lines[i])]
    if not meta:
        raise SchemaError("line 1: expected '# frame_size=WxH fps=F' metadata line")
    frame_size, fps = _parse_meta_comment(lines[meta[-1]], meta[-1] + 1)
    header_line = n_comments + 1
    reader = csv.reader(lines[n_comments:])
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"line {header_line}: missing header row") from None
    if header != CSV_COLUMNS:
        bad = next(
            (i for i, (a, b) in enumerate(zip(header, CSV_COLUMNS)) if a != b),
            min(len(header), len(CSV_COLUMNS)),
        )
        raise SchemaError(f"line {header_line}: header mismatch at column {bad + 1}")
    records = []
    for lineno, row in enumerate(reader, start=header_line + 1):
        if not row:
            continue
        records.append(_row_to_record(row, lineno))
    check_monotone(records)
    return Recording(records, frame_size, fps)


# --- JSONL -------------------------------------------------------------------


def _record_to_obj(r: FrameRecord) -> dict:
    obj = asdict(r)
    obj["p1_centroid"] = list(r.p1_centroid)
    obj["p2_centroid"] = list(r.p2_centroid)
    obj["p1_joints"] = [list(p) for p in r.p1_joints]
    obj["p2_joints"] = [list(p) for p in r.p2_joints]
    obj["ball"] = None if r.ball is None else list(r.ball)
    return obj


def _obj_to_record(obj: dict, lineno: int) -> FrameRecord:
    expected = {
        "frame_index",
        "timestamp_ms",
        "p1_centroid",
        "p1_joints",
        "p2_centroid",
        "p2_joints",
        "ball",
        "ball_visible",
    }
    missing = expected - obj.keys()
    if missing:
        raise SchemaError(f"line {lineno}: missing keys {sorted(missing)}")
    try:
        pt = lambda p: (float(p[0]), float(p[1]))  # noqa: E731
        return FrameRecord(
            frame_index=int(obj["frame_index"]),
            timestamp_ms=float(obj["timestamp_ms"]),
            p1_centroid=pt(obj["p1_centroid"]),
            p1_joints=tuple(pt(p) for p in obj["p1_joints"]),
            p2_centroid=pt(obj["p2_centroid"]),
            p2_joints=tuple(pt(p) for p in obj["p2_joints"]),
            ball=None if obj["ball"] is None else pt(obj["ball"]),
            ball_visible=bool(obj["ball_visible"]),
            interpolated=bool(obj.get("interpolated", False)),
        )
    except SchemaError as exc:
        raise SchemaError(f"line {lineno}: {exc}") from None
    except (TypeError, ValueError, IndexError) as exc:
        raise SchemaError(f"line {lineno}: {exc}") from None


def write_jsonl(recording: Recording, sink: IO[str]) -> None:
    meta = {"frame_size": list(recording.frame_size), "fps": float(recording.fps)}
    sink.write(json.dumps({"meta": meta}) + "\n")
    for r in recording.records:
        sink.write(json.dumps(_record_to_obj(r)) + "\n")


def read_jsonl(source: IO[str]) -> Recording:
    records = []
    frame_size, fps = DEFAULT_FRAME_SIZE, DEFAULT_FPS
    lines = source.read().splitlines()
    if not lines:
        raise SchemaError("line 1: empty input")
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {lineno}: {exc.msg}") from None
        if lineno == 1:
            if "meta" not in obj:
                raise SchemaError("line 1: expected a {\"meta\": ...} metadata object")
            try:
                frame_size = (int(obj["meta"]["frame_size"][0]), int(obj["meta"]["frame_size"][1]))
                fps = float(obj["meta"]["fps"])
            except (KeyError, TypeError, ValueError, IndexError):
                raise SchemaError("line 1: malformed metadata object") from None
            continue
        records.append(_obj_to_record(obj, lineno))
    check_monotone(records)
    return Recording(records, frame_size, fps)


# --- dispatch ----------------------------------------------------------------


def parse_frame_records(source: IO[bytes] | IO[str] | bytes | str, format: str) -> Recording:
    """Read a CSV or JSONL frame file from a byte/text stream or an in-memory string."""
    if isinstance(source, bytes):
        text = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        text = io.StringIO(source)
    else:
        data = source.read()
        text = io.StringIO(data.decode("utf-8") if isinstance(data, bytes) else data)
    if format == "csv":
        return read_csv(text)
    if format == "jsonl":
        return read_jsonl(text)
    raise SchemaError(f"unknown format {format!r}; expected csv or jsonl")


def write_frame_records(recording: Recording, format: str) -> bytes:
    buf = io.StringIO()
    if format == "csv":
        write_csv(recording, buf)
    elif format == "jsonl":
        write_jsonl(recording, buf)
    else:
        raise SchemaError(f"unknown format {format!r}; expected csv or jsonl")
    return buf.getvalue().encode("utf-8")


def format_from_path(path: str) -> str:
    return "jsonl" if path.endswith((".jsonl", ".json")) else "csv"


def is_finite_point(p: Point | None) -> bool:
    return p is not None and math.isfinite(p[0]) and math.isfinite(p[1])
