import numpy as np
import pytest

from pose2traj.data import make_windows, stack_examples, window_indices
from pose2traj.data.features import denormalize, lead_frames
from pose2traj.errors import HistoryTooShort
from pose2traj.inference import (
    AUTOREGRESSIVE,
    TEACHER_FORCED,
    HorizonExceedsTrained,
    forecast,
    predict_batch,
    predict_trajectory,
)
from pose2traj.model import forward_batch

from conftest import fresh_checkpoint, tiny_config


def _batch(series, cfg, n=5):
    ex = make_windows(series, cfg.enc_len_frames, cfg.horizon_frames, stride=17)[:n]
    return stack_examples(ex)


def _run(ck, b, h, mode=AUTOREGRESSIVE, **kw):
    return predict_batch(ck.params, ck.model_config, b["enc_in"], b["enc_times"], b["dec_in"], b["dec_times"], h, mode, **kw)


def test_h6_slot_arithmetic():
    _, dec, tgt = window_indices(30, 30, 6)
    times = list(dec)
    assert times == list(range(27, 34))
    assert lead_frames(6) == 3
    # output row j is time 30 + j and is fed back into slot j + 3
    assert times[1 + 3] == 31 == list(tgt)[1]


@pytest.mark.parametrize("family", ["F3", "F4"])
def test_masked_feedback_is_a_fixed_point(series_by_family, family):
    cfg = tiny_config(family, enc_len_frames=8, horizon_frames=6, seed=3)
    ck, b, c = fresh_checkpoint(cfg), _batch(series_by_family[family], cfg), 3
    out = _run(ck, b, 6)
    fed = b["dec_in"].copy()
    fed[:, c + 1 :] = out[:, 1:4]
    np.testing.assert_allclose(_run(ck, {**b, "dec_in": fed}, 6, TEACHER_FORCED), out, atol=1e-12, rtol=0)
    # rows 0..1 only see slots <= 1, which are observed history (times <= 28)
    tf = _run(ck, b, 6, TEACHER_FORCED)
    np.testing.assert_allclose(out[:, :2], tf[:, :2], atol=1e-12, rtol=0)


@pytest.mark.parametrize("family", ["F3", "F4"])
def test_masked_init_invariance(series_by_family, family):
    cfg = tiny_config(family, enc_len_frames=8, horizon_frames=6)
    ck, b = fresh_checkpoint(cfg), _batch(series_by_family[family], cfg)
    a = _run(ck, b, 6, init="last")
    z = _run(ck, b, 6, init="zeros")
    assert np.max(np.abs(a - z)) < 1e-12


def test_unmasked_refinement_washes_out_placeholder(series_by_family):
    cfg = tiny_config("F1", enc_len_frames=8, horizon_frames=6)
    ck, b = fresh_checkpoint(cfg), _batch(series_by_family["F1"], cfg)
    zeros = b["dec_in"].copy()
    zeros[:, 4:] = 0.0
    # without the mask every row sees the placeholders on a single pass ...
    one_pass = _run(ck, {**b, "dec_in": zeros}, 6, TEACHER_FORCED)
    assert np.max(np.abs(one_pass - _run(ck, b, 6, TEACHER_FORCED))) > 1e-4
    # ... but after ceil(h/2) refinement passes their influence is gone
    out = _run(ck, b, 6)
    assert out.shape == (5, 7, 2) and np.all(np.isfinite(out))
    assert np.max(np.abs(out - _run(ck, b, 6, init="zeros"))) < 1e-9


@pytest.mark.parametrize("family", ["F1", "F4"])
def test_h1_single_step(series_by_family, family):
    cfg = tiny_config(family, enc_len_frames=4, horizon_frames=1)
    ck, b = fresh_checkpoint(cfg), _batch(series_by_family[family], cfg)
    assert b["dec_in"].shape[1] == 2 and lead_frames(1) == 1
    # both decoder slots are observed, so one pass yields the single future row
    assert np.array_equal(_run(ck, b, 1), _run(ck, b, 1, TEACHER_FORCED))


def test_teacher_forced_matches_forward(series_by_family):
    cfg = tiny_config("F2")
    ck, b = fresh_checkpoint(cfg), _batch(series_by_family["F2"], cfg)
    ref = forward_batch(ck.params, cfg, b["enc_in"], b["enc_times"], b["dec_in"], b["dec_times"]).data
    assert np.array_equal(_run(ck, b, 2, TEACHER_FORCED), ref)
    with pytest.raises(ValueError):
        _run(ck, b, 2, "sideways")


def test_predict_trajectory_matches_window(series_by_family):
    cfg = tiny_config("F4", horizon_frames=4, enc_len_frames=6)
    ck = fresh_checkpoint(cfg)
    series = series_by_family["F4"]
    hist = series.tail(6, end=101)
    pred = predict_trajectory(ck, hist, 4)
    b = stack_examples(make_windows(series, 6, 4, start=95, stop=105))
    assert pred.shape == (5, 2)
    np.testing.assert_array_equal(pred, _run(ck, b, 4)[0])
    assert np.allclose(pred[0], _run(ck, b, 4, TEACHER_FORCED)[0, 0], atol=1e-12)


def test_history_checks(series_by_family):
    cfg = tiny_config("F1")
    ck = fresh_checkpoint(cfg)
    with pytest.raises(HistoryTooShort):
        predict_trajectory(ck, series_by_family["F1"].tail(5, end=50), 2)
    with pytest.raises(HistoryTooShort):
        predict_trajectory(ck, series_by_family["F2"].tail(6, end=50), 2)
    with pytest.raises(HistoryTooShort):
        predict_trajectory(ck, series_by_family["F1"].tail(6, end=50), 14)


def test_horizon_warning(series_by_family):
    ck = fresh_checkpoint(tiny_config("F1"))
    with pytest.warns(HorizonExceedsTrained):
        out = predict_trajectory(ck, series_by_family["F1"].tail(6, end=50), 4)
    assert out.shape == (5, 2)


def test_forecast_pixels(rally, series_by_family):
    cfg = tiny_config("F3")
    ck = fresh_checkpoint(cfg)
    frames, px = forecast(ck, rally, at_frame=120)
    assert frames.tolist() == [120, 121, 122]
    norm = predict_trajectory(ck, series_by_family["F3"].tail(6, end=121), 2)
    np.testing.assert_allclose(px, denormalize(norm, (1280.0, 720.0)), rtol=0, atol=1e-9)
    frames, _ = forecast(ck, rally)
    assert frames[0] == rally[len(rally) - 1].frame_index
    with pytest.raises(HistoryTooShort):
        forecast(ck, rally, at_frame=3)
    with pytest.raises(HistoryTooShort):
        forecast(ck, rally, at_frame=10_000)
