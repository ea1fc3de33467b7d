"""FastAPI app exposing prediction and the metric helpers.

Checkpoints are addressed by file name relative to a directory fixed at app
creation, loaded lazily and cached; inference from them is read-only.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..checkpoint import load_checkpoint
from ..data.features import ms_to_frames, window_indices
from ..data.records import FrameRecord, Recording
from ..errors import InputError, MissingArtifact, MissingCheckpoint, Pose2TrajError
from ..evaluation import mede
from ..inference import forecast
from .schemas import (
    Health,
    MedeRequest,
    MedeResponse,
    PredictRequest,
    PredictResponse,
    TrajectoryPoint,
    WindowRequest,
    WindowResponse,
)

_STATUS = {InputError: 422, MissingArtifact: 404}


def _status(exc: Pose2TrajError) -> int:
    for cls, code in _STATUS.items():
        if isinstance(exc, cls):
            return code
    return 500


def create_app(checkpoint_dir: str | Path = ".") -> FastAPI:
    root = Path(checkpoint_dir).resolve()
    app = FastAPI(title="pose2traj", version=__version__)

    @lru_cache(maxsize=16)
    def get_checkpoint(name: str):
        path = (root / name).resolve()
        if root not in path.parents:
            raise MissingCheckpoint(f"{name!r} is outside the checkpoint directory")
        return load_checkpoint(path)

    @app.exception_handler(Pose2TrajError)
    async def domain_error(request: Request, exc: Pose2TrajError):
        return JSONResponse(status_code=_status(exc), content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/health", response_model=Health)
    def health():
        return Health(version=__version__)

    @app.post("/mede", response_model=MedeResponse)
    def mede_endpoint(body: MedeRequest):
        return MedeResponse(mede_px=mede(body.truth, body.pred), n=len(body.truth))

    @app.post("/windows", response_model=WindowResponse)
    def windows(body: WindowRequest):
        enc, dec, tgt = window_indices(body.anchor, body.enc_len, body.horizon)
        return WindowResponse(encoder=list(enc), decoder_input=list(dec), target=list(tgt))

    @app.post("/predict", response_model=PredictResponse)
    def predict(body: PredictRequest):
        ckpt = get_checkpoint(body.checkpoint)
        records = [
            FrameRecord(
                frame_index=f.frame_index,
                timestamp_ms=f.timestamp_ms,
                p1_centroid=f.p1_centroid,
                p1_joints=tuple(f.p1_joints),
                p2_centroid=f.p2_centroid,
                p2_joints=tuple(f.p2_joints),
                ball=f.ball,
                ball_visible=f.ball_visible,
            )
            for f in body.frames
        ]
        rec = Recording(records, tuple(body.frame_size), body.fps)
        horizon = None if body.horizon_ms is None else ms_to_frames(body.horizon_ms, body.fps)
        frames, pts = forecast(ckpt, rec, body.at_frame, horizon)
        cfg = ckpt.model_config
        return PredictResponse(
            family=cfg.family,
            target_player=cfg.target_player,
            horizon_frames=len(frames) - 1,
            points=[
                TrajectoryPoint(step=i, frame_index=int(f), x_px=float(x), y_px=float(y))
                for i, (f, (x, y)) in enumerate(zip(frames, pts))
            ],
        )

    return app
