"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field

from .pose import N_JOINTS

Point = tuple[float, float]
Joints = list[tuple[float, float]]


class SceneOut(BaseModel):
    scene_id: str
    show: str
    n_records: int
    n_hypotheses: int
    image_url: str | None = None


class RecordOut(BaseModel):
    record_id: str
    scene_id: str
    show: str
    anchor: Point
    joints: Joints
    class_id: int | None
    source: str
    status: str
    label: str
    out_of_frame: bool


class AdjustRequest(BaseModel):
    """Full replacement joint list plus the transform the client applied."""

    joints: Joints = Field(min_length=N_JOINTS, max_length=N_JOINTS)
    scale: float = 1.0
    translate: Point = (0.0, 0.0)


class CreateRecordRequest(BaseModel):
    joints: Joints = Field(min_length=N_JOINTS, max_length=N_JOINTS)
    class_id: int | None = None
    source: str = "manual"


class PredictRequest(BaseModel):
    scene_id: str
    point: Point
    n_samples: int = Field(default=5, ge=1, le=100)
    seed: int | None = None
    condition: str = "soft"


class PredictedSample(BaseModel):
    class_id: int
    joints: Joints
    s_h: float
    s_w: float
    distance_to_point: float


class PredictResponse(BaseModel):
    scene_id: str
    point: Point
    seed: int
    class_scores: list[float]
    samples: list[PredictedSample]


class ScoreRequest(BaseModel):
    scene_id: str
    point: Point | None = None  # defaults to the candidate's bbox center
    joints: Joints = Field(min_length=N_JOINTS, max_length=N_JOINTS)
    m: int = Field(default=10, ge=1)
    delta: float | None = None
    seed: int | None = None


class ScoreResponse(BaseModel):
    scene_id: str
    point: Point
    distance: float
    plausible: bool
    delta: float
    m: int


class HealthOut(BaseModel):
    status: str
    records: int
    scenes: int
    models_loaded: bool
