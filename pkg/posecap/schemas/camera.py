from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from posecap.core.types import CameraParams


def _matrix(v, rows: int, cols: int, name: str):
    arr = np.asarray(v, dtype=float)
    if arr.shape != (rows, cols):
        raise ValueError(f"{name} must be {rows}x{cols}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return v


class CameraRecord(BaseModel):
    """
    One camera entry of a rig file.

    ``K`` and ``R`` are row-major 3x3 matrices, ``R``/``t`` map world points
    to the camera frame, ``t`` is in meters.
    """
    camera_id: str = Field(..., min_length=1, description="Unique camera label")
    K: List[List[float]] = Field(..., description="3x3 row-major intrinsic matrix")
    dist: List[float] = Field([0.0, 0.0], description="Radial coefficients [k1, k2]")
    R: List[List[float]] = Field(..., description="3x3 row-major world-to-camera rotation")
    t: List[float] = Field(..., description="World-to-camera translation in meters")
    image_size: Tuple[int, int] = Field(..., description="[width, height] in pixels")
    model_config = ConfigDict(extra="forbid")

    @field_validator("K")
    @classmethod
    def check_intrinsics(cls, v):
        _matrix(v, 3, 3, "K")
        arr = np.asarray(v, dtype=float)
        if abs(arr[0, 1]) > 1e-12 or abs(arr[1, 0]) > 1e-12 or abs(arr[2, 0]) > 1e-12 or abs(arr[2, 1]) > 1e-12:
            raise ValueError("K must have zero skew and a [0, 0, 1] last row")
        if abs(arr[2, 2] - 1.0) > 1e-12:
            raise ValueError("K[2][2] must be 1")
        if arr[0, 0] <= 0 or arr[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        return v

    @field_validator("dist")
    @classmethod
    def check_dist(cls, v):
        if len(v) != 2:
            raise ValueError(f"dist must hold [k1, k2], got {len(v)} values")
        return v

    @field_validator("R")
    @classmethod
    def check_rotation(cls, v):
        _matrix(v, 3, 3, "R")
        arr = np.asarray(v, dtype=float)
        if not np.allclose(arr @ arr.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(arr) - 1.0) > 1e-9:
            raise ValueError("R must be orthonormal with det +1")
        return v

    @field_validator("t")
    @classmethod
    def check_translation(cls, v):
        if len(v) != 3 or not np.all(np.isfinite(v)):
            raise ValueError("t must hold 3 finite values")
        return v

    @field_validator("image_size")
    @classmethod
    def check_image_size(cls, v):
        if v[0] <= 0 or v[1] <= 0:
            raise ValueError("image_size must be positive")
        return v

    def to_params(self) -> CameraParams:
        K = np.asarray(self.K, dtype=float)
        return CameraParams(
            camera_id=self.camera_id,
            fx=K[0, 0], fy=K[1, 1], cx=K[0, 2], cy=K[1, 2],
            R=np.asarray(self.R, dtype=float),
            t=np.asarray(self.t, dtype=float),
            k1=self.dist[0], k2=self.dist[1],
            image_size=self.image_size,
        )

    @classmethod
    def from_params(cls, cam: CameraParams) -> "CameraRecord":
        return cls(
            camera_id=cam.camera_id,
            K=cam.K.tolist(),
            dist=[float(cam.k1), float(cam.k2)],
            R=cam.R.tolist(),
            t=cam.t.tolist(),
            image_size=cam.image_size,
        )


class ObservationRecord(BaseModel):
    """A pixel observation of a world point, input of bundle adjustment."""
    camera_id: str
    point_id: str
    u: float
    v: float
    model_config = ConfigDict(extra="forbid", coerce_numbers_to_str=True)


PlanarView = List[Tuple[float, float, float, float]]


class PlanarCameraRecord(BaseModel):
    """
    Planar-board correspondences of one camera.

    Each view is a list of ``[board_x_m, board_y_m, pixel_u, pixel_v]``.
    View 0 is the shared anchor placement that defines the world frame.
    """
    image_size: Optional[Tuple[int, int]] = Field(None, description="[width, height] in pixels")
    views: List[PlanarView] = Field(..., min_length=1)

    @model_validator(mode="before")
    @classmethod
    def accept_bare_views(cls, data):
        # a bare list of views is the plain correspondence format
        if isinstance(data, list):
            return {"views": data}
        return data


SINGLE_CAMERA_ID = "cam0"


class PlanarCorrespondences(BaseModel):
    """
    Planar-board correspondences keyed by camera id.

    The file is either an object ``{camera_id: views | {image_size, views}}``
    or, for a single camera, a bare list of views stored under ``cam0``.
    """
    cameras: Dict[str, PlanarCameraRecord]

    @model_validator(mode="before")
    @classmethod
    def wrap(cls, data):
        if isinstance(data, list):
            return {"cameras": {SINGLE_CAMERA_ID: data}}
        if isinstance(data, dict) and "cameras" not in data:
            return {"cameras": data}
        return data
