from enum import Enum

from pydantic import BaseModel, Field


class AlignmentMode(str, Enum):
    """Transform applied to a predicted frame before measuring joint distances."""
    IDENTITY = "identity"
    HIP_TRANSLATION = "hip_translation"
    PROCRUSTES = "procrustes_similarity"


class ErrorRow(BaseModel):
    """One row of the evaluation report (errors in millimeters)."""
    sequence: str
    joint: str
    mean_error_mm: float = Field(..., description="No alignment")
    mpjpe_mm: float = Field(..., description="Mid-hip translation alignment")
    pa_mpjpe_mm: float = Field(..., description="Per-frame similarity alignment")
    n_frames: int = Field(..., ge=1)


class AucRow(BaseModel):
    """Local-movement summary of one limb chain."""
    chain: str
    side: str
    auc: float
    n_frames: int
    limb_length_m: float
