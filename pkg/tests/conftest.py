import numpy as np
import pytest

from pose2traj.data import SynthParams, build_feature_series, fill_ball_gaps, synth_rally
from pose2traj.model import ModelConfig


def tiny_config(family="F4", **kw) -> ModelConfig:
    base = dict(
        family=family,
        d_model=8,
        n_heads=2,
        ffn_dim=8,
        k_time=3,
        lstm_hidden=4,
        enc_len_frames=6,
        horizon_frames=2,
        dropout=0.0,
        seed=0,
    )
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def rally():
    return synth_rally(SynthParams(n_frames=600, seed=11))


@pytest.fixture(scope="session")
def gappy_rally():
    return synth_rally(SynthParams(n_frames=3000, seed=5, occlusion_gap_prob=0.3))


@pytest.fixture(scope="session")
def series_by_family(rally):
    return {f: build_feature_series(rally, f) for f in ("F1", "F2", "F3", "F4")}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def fresh_checkpoint(config):
    """Untrained checkpoint for ``config``; enough for inference and evaluation plumbing."""
    from collections import OrderedDict

    from pose2traj.checkpoint import Checkpoint
    from pose2traj.config import TrainConfig
    from pose2traj.model import init_params

    params = OrderedDict((k, v.data.copy()) for k, v in init_params(config).items())
    return Checkpoint(config, TrainConfig(), params)


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}
ACCEPTANCE_TOTAL = 10


@pytest.fixture
def criterion():
    def check(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])
        assert ok, detail

    return check


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_TOTAL + 1):
        terminalreporter.write_line(ACCEPTANCE_LINES.get(n, f"criterion {n:2d}: NOT RUN (deselected or errored before reporting)"))
