"""Self-describing binary checkpoints.

Layout::

    b"P2TJ" | u32 format version | u64 header length | header | payload

The header is canonical JSON (sorted keys, no whitespace) holding both
configs, the epoch, the metrics log and a tensor directory of
``{name, shape, offset}`` entries. The payload is the concatenation of
little-endian float64 tensors at those offsets, in directory order.
"""

from __future__ import annotations

import io
import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from .errors import BadMagic, MissingCheckpoint, ShapeDirectoryMismatch, TruncatedPayload, VersionMismatch
from .model import ModelConfig
from .config import TrainConfig

MAGIC = b"P2TJ"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    params: "OrderedDict[str, np.ndarray]"
    epoch: int = 0
    metrics_log: list[dict] = field(default_factory=list)
    adam_step_count: int | None = None
    adam_m: "OrderedDict[str, np.ndarray] | None" = None
    adam_v: "OrderedDict[str, np.ndarray] | None" = None
    format_version: int = FORMAT_VERSION

    def tensors(self) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict((f"param/{k}", v) for k, v in self.params.items())
        if self.adam_m is not None:
            out.update((f"adam.m/{k}", v) for k, v in self.adam_m.items())
            out.update((f"adam.v/{k}", v) for k, v in self.adam_v.items())
        return out


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def dumps(ckpt: Checkpoint) -> bytes:
    directory = []
    chunks = []
    offset = 0
    for name, arr in ckpt.tensors().items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    header = _canonical(
        {
            "model_config": ckpt.model_config.to_dict(),
            "train_config": ckpt.train_config.to_dict(),
            "epoch": ckpt.epoch,
            "metrics_log": ckpt.metrics_log,
            "adam_step_count": ckpt.adam_step_count,
            "tensors": directory,
        }
    )
    return _PREFIX.pack(MAGIC, ckpt.format_version, len(header)) + header + b"".join(chunks)


def loads(blob: bytes) -> Checkpoint:
    if len(blob) < _PREFIX.size:
        if not MAGIC.startswith(blob[:4]):
            raise BadMagic("not a checkpoint file")
        raise TruncatedPayload("file ends inside the fixed prefix")
    magic, version, header_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version} is not supported (expected {FORMAT_VERSION})")
    start = _PREFIX.size
    if len(blob) < start + header_len:
        raise TruncatedPayload("file ends inside the header")
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ShapeDirectoryMismatch(f"unreadable header: {exc}") from None
    payload = memoryview(blob)[start + header_len :]

    expected_offset = 0
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for entry in header["tensors"]:
        shape = tuple(int(n) for n in entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8
        if entry["offset"] != expected_offset:
            raise ShapeDirectoryMismatch(f"tensor {entry['name']} starts at {entry['offset']}, expected {expected_offset}")
        end = expected_offset + nbytes
        if end > len(payload):
            raise TruncatedPayload(f"tensor {entry['name']} needs bytes up to {end}, payload has {len(payload)}")
        tensors[entry["name"]] = np.frombuffer(payload[expected_offset:end], dtype="<f8").reshape(shape).astype(np.float64)
        expected_offset = end
    if expected_offset != len(payload):
        raise ShapeDirectoryMismatch(f"{len(payload) - expected_offset} trailing payload bytes not in the directory")

    def group(prefix):
        return OrderedDict((k[len(prefix) :], v) for k, v in tensors.items() if k.startswith(prefix))

    has_adam = any(k.startswith("adam.m/") for k in tensors)
    return Checkpoint(
        model_config=ModelConfig.from_dict(header["model_config"]),
        train_config=TrainConfig.from_dict(header["train_config"]),
        params=group("param/"),
        epoch=int(header["epoch"]),
        metrics_log=header["metrics_log"],
        adam_step_count=header["adam_step_count"],
        adam_m=group("adam.m/") if has_adam else None,
        adam_v=group("adam.v/") if has_adam else None,
        format_version=version,
    )


def save_checkpoint(ckpt: Checkpoint, sink: str | Path | IO[bytes]) -> None:
    blob = dumps(ckpt)
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(blob)
    else:
        sink.write(blob)


def load_checkpoint(source: str | Path | IO[bytes] | bytes) -> Checkpoint:
    if isinstance(source, bytes):
        return loads(source)
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise MissingCheckpoint(f"no checkpoint at {path}")
        return loads(path.read_bytes())
    return loads(source.read())


def roundtrip(ckpt: Checkpoint) -> Checkpoint:
    buf = io.BytesIO()
    save_checkpoint(ckpt, buf)
    return loads(buf.getvalue())
