from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Point = Tuple[float, float, float]


class KeypointRecord(BaseModel):
    """
    One line of a keypoint file: every joint of one camera at one frame.

    Each keypoint is ``[u, v, confidence]`` or ``null`` when not detected.
    """
    frame_index: int = Field(..., ge=0)
    camera_id: str = Field(..., min_length=1)
    keypoints: List[Optional[Tuple[float, float, float]]] = Field(..., max_length=17)
    model_config = ConfigDict(extra="forbid")

    @field_validator("keypoints")
    @classmethod
    def check_keypoints(cls, v):
        for i, kp in enumerate(v):
            if kp is None:
                continue
            u, px, conf = kp
            if not (np.isfinite(u) and np.isfinite(px)):
                raise ValueError(f"keypoint {i}: coordinates must be finite")
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"keypoint {i}: confidence {conf} outside [0, 1]")
        return v


class PoseSequenceFile(BaseModel):
    """JSON layout of a pose sequence: T x 17 x [x, y, z] in meters."""
    sample_rate_hz: float = Field(..., gt=0)
    joint_names: Optional[List[str]] = None
    frames: List[List[Point]] = Field(..., min_length=1)
    model_config = ConfigDict(extra="forbid")

    @field_validator("frames")
    @classmethod
    def check_frames(cls, v):
        lengths = {len(frame) for frame in v}
        if lengths != {17}:
            raise ValueError(f"every frame must hold 17 joints, got {sorted(lengths)}")
        if not np.all(np.isfinite(np.asarray(v, dtype=float))):
            raise ValueError("coordinates must be finite")
        return v


class MarkerSequenceFile(BaseModel):
    """JSON layout of a marker sequence; ``null`` marks an occluded marker."""
    sample_rate_hz: float = Field(..., gt=0)
    marker_names: List[str] = Field(..., min_length=1)
    frames: List[List[Optional[Point]]] = Field(..., min_length=1)
    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_widths(self):
        for t, frame in enumerate(self.frames):
            if len(frame) != len(self.marker_names):
                raise ValueError(f"frame {t} holds {len(frame)} markers, expected {len(self.marker_names)}")
        return self


class OffsetEntry(BaseModel):
    """Offset-model entry of one joint."""
    markers: Tuple[str, str, str]
    w: Tuple[float, float, float]


class OffsetModelFile(BaseModel):
    joints: Dict[str, OffsetEntry]

    @model_validator(mode="before")
    @classmethod
    def wrap(cls, data):
        if isinstance(data, dict) and "joints" not in data:
            return {"joints": data}
        return data
