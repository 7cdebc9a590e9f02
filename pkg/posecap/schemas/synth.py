from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from posecap.core.config import settings
from posecap.core.skeleton import COCO17


class IntrinsicsTemplate(BaseModel):
    """Intrinsics shared by every synthetic camera; principal point defaults to the image center."""
    fx: float = Field(800.0, gt=0)
    fy: float = Field(800.0, gt=0)
    cx: Optional[float] = None
    cy: Optional[float] = None
    k1: float = 0.0
    k2: float = 0.0


class RigSpec(BaseModel):
    """
    Cameras on a ring around a look-at point.

    Camera ``i`` sits at angle ``2*pi*i/K`` on the ring, at ``heights[i % len(heights)]``.
    The default mirrors a seven-camera, 1920x1200 rig with chest-height and
    elevated cameras around a two-by-two meter volume.
    """
    n_cameras: int = Field(7, ge=2, description="Camera count K")
    radius: float = Field(3.5, gt=0, description="Ring radius in meters")
    heights: List[float] = Field([1.4, 2.5], min_length=1, description="Camera heights in meters, cycled")
    look_at: Tuple[float, float, float] = Field((0.0, 0.0, 1.0), description="Common look-at point")
    volume_half_extent: Tuple[float, float, float] = Field(
        (1.0, 1.0, 1.0), description="Half sizes of the capture volume box centered at look_at"
    )
    intrinsics: IntrinsicsTemplate = Field(default_factory=IntrinsicsTemplate)
    image_size: Tuple[int, int] = Field(settings.DEFAULT_IMAGE_SIZE)

    @field_validator("image_size")
    @classmethod
    def check_image_size(cls, v):
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("image_size must be positive")
        return v


class MotionKind(str, Enum):
    STATIC = "static"
    LINEAR = "linear"
    SWING = "sinusoidal-limb-swing"
    BURST = "composite-burst"


class SkeletonDimensions(BaseModel):
    """Segment lengths of the synthetic body in meters."""
    pelvis_height: float = Field(0.95, gt=0)
    hip_half_width: float = Field(0.10, gt=0)
    thigh: float = Field(0.45, gt=0)
    shank: float = Field(0.42, gt=0)
    torso: float = Field(0.50, gt=0)
    shoulder_half_width: float = Field(0.19, gt=0)
    upper_arm: float = Field(0.30, gt=0)
    forearm: float = Field(0.27, gt=0)
    neck: float = Field(0.22, gt=0)
    eye_offset: float = Field(0.035, gt=0)
    ear_offset: float = Field(0.075, gt=0)


class MotionSpec(BaseModel):
    """Parametric ground-truth motion."""
    kind: MotionKind = Field(MotionKind.SWING)
    duration_s: float = Field(2.0, gt=0)
    sample_rate_hz: float = Field(settings.SAMPLE_RATE_HZ, gt=0)
    velocity: Tuple[float, float, float] = Field((1.0, 0.0, 0.0), description="Root velocity in m/s")
    start: Tuple[float, float, float] = Field((-1.0, 0.0, 0.0), description="Root ground position at t=0")
    heading_rad: float = Field(0.0, description="Facing direction about the vertical axis")
    swing_amplitude_rad: float = Field(0.5, ge=0)
    swing_frequency_hz: float = Field(1.0, ge=0)
    burst_amplitude_rad: float = Field(1.2, ge=0, description="Peak arm elevation of a burst")
    burst_period_s: float = Field(1.0, gt=0)
    burst_duration_s: float = Field(0.4, gt=0)
    yaw_amplitude_rad: float = Field(0.3, ge=0)
    dimensions: SkeletonDimensions = Field(default_factory=SkeletonDimensions)

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    @model_validator(mode="after")
    def check_length(self):
        if self.n_frames < 3:
            raise ValueError(f"duration x rate must give at least 3 frames, got {self.n_frames}")
        if self.burst_duration_s > self.burst_period_s:
            raise ValueError("burst_duration_s must not exceed burst_period_s")
        return self


_PAIRED = [name for name in COCO17.joint_names if name.startswith(("left_", "right_"))]


class CorruptionSpec(BaseModel):
    """
    2D detector error model: pixel jitter, left/right swaps, dropout and confidence.

    Clean detections draw confidence from ``clean_confidence``; swapped ones
    from ``corrupted_confidence``, so corrupted detections always score lower.
    """
    pixel_noise_sigma: float = Field(0.0, ge=0, description="Isotropic Gaussian jitter in pixels")
    swap_probability: float = Field(0.0, ge=0, le=1, description="Per pair, frame and camera")
    dropout_probability: float = Field(0.0, ge=0, le=1, description="Per joint, frame and camera")
    swap_joints: List[str] = Field(default_factory=lambda: list(_PAIRED), description="Joints eligible for swaps")
    swap_cameras: Optional[List[str]] = Field(None, description="Cameras eligible for swaps; all when unset")
    drop_behind_camera: bool = Field(False, description="Mark joints behind a camera absent instead of failing")
    clean_confidence: Tuple[float, float] = Field((0.8, 1.0))
    corrupted_confidence: Tuple[float, float] = Field((0.0, 0.4))
    seed: int = Field(settings.SEED)

    @field_validator("swap_joints")
    @classmethod
    def check_swap_joints(cls, v):
        for name in v:
            if name not in _PAIRED:
                raise ValueError(f"'{name}' is not a left/right joint")
        return v

    @field_validator("clean_confidence", "corrupted_confidence")
    @classmethod
    def check_range(cls, v):
        lo, hi = v
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"confidence range must satisfy 0 <= lo <= hi <= 1, got {v}")
        return v


class SceneSpec(BaseModel):
    """File of record for ``synth``: the three specs together."""
    rig: RigSpec = Field(default_factory=RigSpec)
    motion: MotionSpec = Field(default_factory=MotionSpec)
    corruption: CorruptionSpec = Field(default_factory=CorruptionSpec)
