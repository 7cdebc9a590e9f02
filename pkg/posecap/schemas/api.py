"""Request and response bodies of the HTTP service."""
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from posecap.schemas.camera import CameraRecord
from posecap.schemas.metrics import AucRow, ErrorRow
from posecap.schemas.pipeline import FilterSpec, LocalMovementConfig, PruneConfig
from posecap.schemas.sequences import KeypointRecord, PoseSequenceFile


class ReconstructRequest(BaseModel):
    rig: List[CameraRecord] = Field(..., min_length=2, description="Calibrated cameras")
    keypoints: List[KeypointRecord] = Field(..., min_length=1, description="Keypoint records in any order")
    prune: PruneConfig = Field(default_factory=PruneConfig)
    filter: FilterSpec = Field(default_factory=FilterSpec)
    skip_smoothing: bool = False
    single_pass: bool = False
    interpolate_gaps: bool = False
    baseline: bool = False


class DiagnosticOut(BaseModel):
    frame: int
    joint: str
    subset_bitmask: int
    cost_increment: float


class ReconstructResponse(BaseModel):
    sequence: PoseSequenceFile
    diagnostics: List[DiagnosticOut] = []


class EvaluatePair(BaseModel):
    name: str = Field("sequence", min_length=1)
    pred: PoseSequenceFile
    gt: PoseSequenceFile


class EvaluateRequest(BaseModel):
    pairs: List[EvaluatePair] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_names(self):
        names = [pair.name for pair in self.pairs]
        if len(set(names)) != len(names):
            raise ValueError("sequence names must be distinct")
        return self


class EvaluateResponse(BaseModel):
    rows: List[ErrorRow]


class KinematicsRequest(BaseModel):
    sequences: List[PoseSequenceFile] = Field(..., min_length=1)
    groups: List[str] = Field(["wrists", "ankles", "hips"], min_length=1, description="Named joint groups")


class GroupKinematics(BaseModel):
    group: str
    mean_speed_m_s: float
    mean_accel_m_s2: float
    speed_cdf: List[Tuple[float, float]] = Field(..., description="(value, fraction) pairs")
    accel_cdf: List[Tuple[float, float]]


class KinematicsResponse(BaseModel):
    groups: List[GroupKinematics]


class LocalMovementRequest(BaseModel):
    sequences: List[PoseSequenceFile] = Field(..., min_length=1)
    config: LocalMovementConfig = Field(default_factory=LocalMovementConfig)
    subsample: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None


class LocalMovementResponse(BaseModel):
    summary: AucRow
    voxel_side_ratios: List[float]
    cover_ratios: List[float]
