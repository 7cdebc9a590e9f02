from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from posecap.core.config import settings


class PruneConfig(BaseModel):
    """
    Confidence pruning of cameras before candidate enumeration.

    Cameras whose 2D confidence is below ``confidence_threshold`` are removed,
    lowest first, at most ``max_removed`` of them and never below two cameras.
    """
    confidence_threshold: float = Field(
        settings.PRUNE_CONFIDENCE_THRESHOLD, ge=0.0, le=1.0, description="Detections below this are pruned"
    )
    max_removed: int = Field(settings.PRUNE_MAX_REMOVED, ge=0, description="Most cameras removed per joint-frame")
    model_config = ConfigDict(frozen=True)


class FilterSpec(BaseModel):
    """Low-pass Butterworth design: per-pass order, cutoff and sample rate."""
    order: int = Field(settings.FILTER_ORDER, description="Designed filter order per pass")
    cutoff_hz: float = Field(settings.FILTER_CUTOFF_HZ, gt=0, description="-3 dB frequency of one pass")
    sample_rate_hz: float = Field(settings.SAMPLE_RATE_HZ, gt=0, description="Sampling rate of the signal")
    model_config = ConfigDict(frozen=True)

    @field_validator("order")
    @classmethod
    def check_order(cls, v):
        if v not in (2, 4, 6, 8):
            raise ValueError(f"order must be one of 2, 4, 6, 8, got {v}")
        return v

    @model_validator(mode="after")
    def check_nyquist(self):
        if self.cutoff_hz >= self.sample_rate_hz / 2:
            raise ValueError(
                f"cutoff {self.cutoff_hz} Hz must be below Nyquist ({self.sample_rate_hz / 2} Hz)"
            )
        return self


class LimbChain(str, Enum):
    WRIST = "wrist"
    ANKLE = "ankle"


class BodySide(str, Enum):
    RIGHT = "right"
    LEFT = "left"


class LocalMovementConfig(BaseModel):
    """Voxel resolutions and body-local frame of the local-movement measure."""
    n_resolutions: int = Field(50, ge=2, description="Number of log-spaced voxel sides")
    max_ratio: float = Field(1.0, gt=0, description="Largest voxel side as a fraction of limb length")
    min_ratio: float = Field(1e-3, gt=0, description="Smallest voxel side as a fraction of limb length")
    chain: LimbChain = Field(LimbChain.WRIST, description="wrist (arm) or ankle (leg) chain")
    side: BodySide = Field(BodySide.RIGHT, description="Side hosting the origin; the other side is mirrored")
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_ratios(self):
        if not self.min_ratio < self.max_ratio:
            raise ValueError("min_ratio must be below max_ratio")
        return self

    @property
    def ratios(self) -> np.ndarray:
        """Strictly decreasing voxel side ratios."""
        return np.logspace(np.log10(self.max_ratio), np.log10(self.min_ratio), self.n_resolutions)


class BundleAdjustMask(BaseModel):
    """Parameter blocks held fixed; the first camera's pose is always fixed."""
    intrinsics: bool = Field(False, description="Hold fx, fy, cx, cy")
    distortion: bool = Field(False, description="Hold k1, k2")
    points: bool = Field(False, description="Hold world points")
    model_config = ConfigDict(frozen=True)


class PipelineConfig(BaseModel):
    """
    Everything ``reconstruct`` needs; a JSON file of record with flag overrides.
    """
    rig: str = Field(..., description="Rig file path")
    keypoints: str = Field(..., description="Keypoint JSON-lines path")
    output: str = Field(..., description="Pose sequence output path")
    diagnostics: Optional[str] = Field(None, description="Optional CSV path for the selection dump")
    prune: PruneConfig = Field(default_factory=PruneConfig)
    filter: FilterSpec = Field(default_factory=FilterSpec)
    skip_smoothing: bool = Field(False, description="Write the selector output unsmoothed")
    single_pass: bool = Field(False, description="Causal single-pass filtering instead of zero-phase")
    interpolate_gaps: bool = Field(False, description="Interpolate short dropouts instead of failing")
    baseline: bool = Field(False, description="Per-frame all-camera triangulation, no graph, no smoothing")
    threads: int = Field(settings.THREADS, ge=1)
    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def check_paths(self):
        paths = [p for p in (self.rig, self.keypoints, self.output, self.diagnostics) if p]
        if len(set(paths)) != len(paths):
            raise ValueError("rig, keypoints, output and diagnostics paths must be distinct")
        return self
