"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Point = tuple[float, float]


class Health(BaseModel):
    status: str = "ok"
    version: str


class MedeRequest(BaseModel):
    truth: list[Point] = Field(min_length=1)
    pred: list[Point] = Field(min_length=1)


class MedeResponse(BaseModel):
    mede_px: float
    n: int


class WindowRequest(BaseModel):
    anchor: int = Field(ge=0, description="0-based row of time t")
    enc_len: int = Field(ge=1)
    horizon: int = Field(ge=1)


class WindowResponse(BaseModel):
    encoder: list[int]
    decoder_input: list[int]
    target: list[int]


class Frame(BaseModel):
    frame_index: int
    timestamp_ms: float
    p1_centroid: Point
    p1_joints: list[Point] = Field(min_length=17, max_length=17)
    p2_centroid: Point
    p2_joints: list[Point] = Field(min_length=17, max_length=17)
    ball: Point | None = None
    ball_visible: bool = False


class PredictRequest(BaseModel):
    checkpoint: str = Field(description="checkpoint file name inside the service's checkpoint directory")
    frames: list[Frame] = Field(min_length=1)
    frame_size: tuple[int, int] = (1280, 720)
    fps: float = Field(60.0, gt=0)
    at_frame: int | None = None
    horizon_ms: float | None = Field(None, gt=0)


class TrajectoryPoint(BaseModel):
    step: int
    frame_index: int
    x_px: float
    y_px: float


class PredictResponse(BaseModel):
    family: str
    target_player: int
    horizon_frames: int
    mode: Literal["autoregressive"] = "autoregressive"
    points: list[TrajectoryPoint]


class ErrorBody(BaseModel):
    error: str
    detail: str
