"""Training hyperparameters and the flat ``key=value`` config file format.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment. Keys are ModelConfig or TrainConfig field names. Values are parsed
as JSON scalars when possible (``true``, ``1e-4``, ``"F4"``) and as bare
strings otherwise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .autodiff import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from .errors import InputError, InvalidConfig, MissingArtifact


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-4
    weight_decay: float = 1e-4
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    shuffle_seed: int = 0
    validation_fraction: float = 0.1
    grad_clip: float = 1.0

    def validate(self) -> None:
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise InvalidConfig("validation_fraction must lie in [0, 1)")
        if self.lr < 0 or self.weight_decay < 0:
            raise InvalidConfig("lr and weight_decay must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(f"no config file at {path}")
    return parse_config_text(path.read_text())


def format_config(values: dict) -> str:
    """Render ``values`` as ``key=value`` lines, sorted by key."""
    return "".join(f"{k}={json.dumps(v)}\n" for k, v in sorted(values.items()))


def split_config(values: dict) -> tuple[dict, dict]:
    """Partition a flat mapping into (model-config keys, train-config keys); unknown keys are an error."""
    from .model import ModelConfig

    model_keys = {f.name for f in fields(ModelConfig)}
    train_keys = {f.name for f in fields(TrainConfig)}
    unknown = set(values) - model_keys - train_keys
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return (
        {k: v for k, v in values.items() if k in model_keys},
        {k: v for k, v in values.items() if k in train_keys},
    )
