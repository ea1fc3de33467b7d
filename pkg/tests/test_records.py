import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pose2traj.data import CSV_COLUMNS, COCO_JOINTS, N_JOINTS, Recording, parse_frame_records, write_frame_records
from pose2traj.data.records import format_from_path
from pose2traj.errors import NonMonotoneFrames, SchemaError

from helpers import frame


def test_schema_shape():
    assert N_JOINTS == 17 and len(COCO_JOINTS) == 17
    assert COCO_JOINTS[0] == "nose" and COCO_JOINTS[-1] == "right_ankle"
    assert len(CSV_COLUMNS) == 77
    assert list(CSV_COLUMNS[:6]) == ["frame_index", "timestamp_ms", "p1_cx", "p1_cy", "p1_j00_x", "p1_j00_y"]
    assert CSV_COLUMNS.index("p2_cx") == 38
    assert list(CSV_COLUMNS[-3:]) == ["ball_x", "ball_y", "ball_visible"]


def test_one_row_csv():
    rec = Recording([frame(0)])
    out = parse_frame_records(write_frame_records(rec, "csv"), "csv")
    assert len(out) == 1
    assert len(out[0].p1_joints) == 17 and len(out[0].p2_joints) == 17
    assert out[0] == rec[0]


def test_absent_ball_round_trip():
    rec = Recording([frame(0, ball=None), frame(1)])
    text = write_frame_records(rec, "csv").decode()
    assert text.splitlines()[2].endswith(",,,0")
    out = parse_frame_records(text, "csv")
    assert out[0].ball is None and not out[0].ball_visible
    assert out[1].ball_visible


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_write_parse_write_is_byte_identical(fmt, rally):
    blob = write_frame_records(rally, fmt)
    again = write_frame_records(parse_frame_records(blob, fmt), fmt)
    assert blob == again


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_metadata_carried(fmt):
    rec = Recording([frame(0), frame(1)], frame_size=(1920, 1080), fps=50.0)
    out = parse_frame_records(io.BytesIO(write_frame_records(rec, fmt)), fmt)
    assert out.frame_size == (1920, 1080) and out.fps == 50.0


def test_jsonl_mirrors_field_names():
    lines = write_frame_records(Recording([frame(3)]), "jsonl").decode().splitlines()
    assert json.loads(lines[0]) == {"meta": {"frame_size": [1280, 720], "fps": 60.0}}
    obj = json.loads(lines[1])
    assert {"frame_index", "timestamp_ms", "p1_centroid", "p1_joints", "p2_centroid", "p2_joints", "ball", "ball_visible"} <= set(obj)


def test_extra_comment_lines_before_metadata_are_ignored():
    blob = b"# produced by some tool\n# seed=3\n" + write_frame_records(Recording([frame(0)]), "csv")
    assert len(parse_frame_records(blob, "csv")) == 1


def _csv_lines():
    return write_frame_records(Recording([frame(0), frame(1), frame(2)]), "csv").decode().splitlines()


def test_wrong_column_count_reports_line():
    lines = _csv_lines()
    lines[3] = lines[3].rsplit(",", 1)[0]
    with pytest.raises(SchemaError, match="line 4"):
        parse_frame_records("\n".join(lines), "csv")


def test_wrong_header_order():
    lines = _csv_lines()
    cols = lines[1].split(",")
    cols[2], cols[3] = cols[3], cols[2]
    lines[1] = ",".join(cols)
    with pytest.raises(SchemaError, match="line 2"):
        parse_frame_records("\n".join(lines), "csv")


def test_missing_metadata_line():
    with pytest.raises(SchemaError, match="line 1"):
        parse_frame_records("\n".join(_csv_lines()[1:]), "csv")


def test_ball_cells_must_be_empty_when_invisible():
    lines = _csv_lines()
    lines[2] = lines[2][: -len(",1")] + ",0"
    with pytest.raises(SchemaError, match="line 3"):
        parse_frame_records("\n".join(lines), "csv")


def test_non_numeric_cell():
    lines = _csv_lines()
    lines[2] = lines[2].replace(lines[2].split(",")[5], "abc", 1)
    with pytest.raises(SchemaError, match="line 3"):
        parse_frame_records("\n".join(lines), "csv")


def test_non_monotone_frames():
    rec = Recording([frame(0), frame(2), frame(1)])
    with pytest.raises(NonMonotoneFrames):
        parse_frame_records(write_frame_records(rec, "csv"), "csv")


def test_jsonl_errors():
    with pytest.raises(SchemaError, match="line 1"):
        parse_frame_records("", "jsonl")
    with pytest.raises(SchemaError, match="line 1"):
        parse_frame_records('{"frame_index": 0}\n', "jsonl")
    good = write_frame_records(Recording([frame(0)]), "jsonl").decode().splitlines()
    bad = json.loads(good[1])
    del bad["p2_joints"]
    with pytest.raises(SchemaError, match="line 2"):
        parse_frame_records(good[0] + "\n" + json.dumps(bad), "jsonl")


def test_joint_count_enforced():
    with pytest.raises(SchemaError):
        frame(0).__class__(0, 0.0, (0, 0), ((0, 0),) * 16, (0, 0), ((0, 0),) * 17, None, False)


def test_ball_visibility_must_agree():
    f = frame(0)
    with pytest.raises(SchemaError):
        f.__class__(0, 0.0, f.p1_centroid, f.p1_joints, f.p2_centroid, f.p2_joints, (1.0, 2.0), False)


def test_unknown_format():
    with pytest.raises(SchemaError):
        parse_frame_records("", "xml")


def test_format_from_path():
    assert format_from_path("a/b.jsonl") == "jsonl"
    assert format_from_path("a/b.csv") == "csv"


coords = st.floats(min_value=0.0, max_value=1279.0, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(
    cx=coords,
    cy=coords,
    bx=st.one_of(st.none(), coords),
    n=st.integers(min_value=1, max_value=4),
    fmt=st.sampled_from(["csv", "jsonl"]),
)
def test_round_trip_property(cx, cy, bx, n, fmt):
    rec = Recording([frame(i, None if bx is None else (bx, cy), p1=(cx, cy)) for i in range(n)])
    assert parse_frame_records(write_frame_records(rec, fmt), fmt).records == rec.records
