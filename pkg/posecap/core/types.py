"""
Immutable value types shared by the services.

Numeric payloads are numpy arrays marked read-only after construction, so
instances can be handed to worker threads without copying.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from posecap.core.errors import ConfigurationError, ShapeError
from posecap.core.skeleton import COCO17, Skeleton


def _frozen(array, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CameraParams:
    """
    Intrinsics, radial distortion and pose of one camera.

    ``R`` and ``t`` map world points into the camera frame (x right, y down,
    z forward); translations are in meters, image quantities in pixels.
    """
    camera_id: str
    fx: float
    fy: float
    cx: float
    cy: float
    R: np.ndarray
    t: np.ndarray
    k1: float = 0.0
    k2: float = 0.0
    image_size: Tuple[int, int] = (1920, 1200)

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(self.R).reshape(3, 3))
        object.__setattr__(self, "t", _frozen(self.t).reshape(3))
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigurationError(f"camera {self.camera_id}: focal lengths must be positive")
        if self.image_size[0] <= 0 or self.image_size[1] <= 0:
            raise ConfigurationError(f"camera {self.camera_id}: image_size must be positive")
        if not np.allclose(self.R @ self.R.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(self.R) - 1.0) > 1e-9:
            raise ConfigurationError(f"camera {self.camera_id}: R must be a rotation")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def dist(self) -> np.ndarray:
        return np.array([self.k1, self.k2])

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t


@dataclass(frozen=True)
class CameraRig:
    """Ordered set of calibrated cameras with distinct ids."""
    cameras: Tuple[CameraParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "cameras", tuple(self.cameras))
        ids = [cam.camera_id for cam in self.cameras]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate camera_id in rig: {ids}")
        if len(ids) < 2:
            raise ConfigurationError(f"a rig needs at least 2 cameras, got {len(ids)}")

    def __len__(self) -> int:
        return len(self.cameras)

    def __iter__(self) -> Iterator[CameraParams]:
        return iter(self.cameras)

    def __getitem__(self, index: int) -> CameraParams:
        return self.cameras[index]

    @property
    def camera_ids(self) -> Tuple[str, ...]:
        return tuple(cam.camera_id for cam in self.cameras)

    def index(self, camera_id: str) -> int:
        try:
            return self.camera_ids.index(camera_id)
        except ValueError:
            raise ConfigurationError(f"camera '{camera_id}' is not part of the rig")

    def camera(self, camera_id: str) -> CameraParams:
        return self.cameras[self.index(camera_id)]


@dataclass(frozen=True)
class Keypoint2D:
    u: float
    v: float
    confidence: float


@dataclass(frozen=True)
class KeypointFrame:
    """Detections of one camera at one frame; absent joints are ``None``."""
    camera_id: str
    frame_index: int
    keypoints: Tuple[Optional[Keypoint2D], ...]

    def __post_init__(self):
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        if self.frame_index < 0:
            raise ShapeError(f"frame_index must be >= 0, got {self.frame_index}")
        if len(self.keypoints) > COCO17.n_joints:
            raise ShapeError(f"at most {COCO17.n_joints} keypoints per frame, got {len(self.keypoints)}")

    def get(self, joint: int) -> Optional[Keypoint2D]:
        return self.keypoints[joint] if joint < len(self.keypoints) else None


@dataclass(frozen=True)
class KeypointGroup:
    """All camera views of one frame."""
    frame_index: int
    views: Mapping[str, KeypointFrame]

    def detections(self, joint: int) -> Dict[str, Keypoint2D]:
        """Detections of one joint keyed by camera id."""
        found = {}
        for camera_id, view in self.views.items():
            kp = view.get(joint)
            if kp is not None:
                found[camera_id] = kp
        return found


@dataclass(frozen=True)
class PoseSequence:
    """T x 17 x 3 joint trajectory in meters sampled at ``sample_rate_hz``."""
    sample_rate_hz: float
    frames: np.ndarray
    skeleton: Skeleton = field(default=COCO17, compare=False)

    def __post_init__(self):
        frames = _frozen(self.frames)
        if frames.ndim != 3 or frames.shape[0] < 1 or frames.shape[1:] != (self.skeleton.n_joints, 3):
            raise ShapeError(f"pose frames must be T x {self.skeleton.n_joints} x 3, got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ShapeError("pose coordinates must be finite")
        if not self.sample_rate_hz > 0:
            raise ShapeError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def joint(self, name: str) -> np.ndarray:
        return self.frames[:, self.skeleton.joint_index(name)]

    def replace_frames(self, frames: np.ndarray) -> "PoseSequence":
        return PoseSequence(self.sample_rate_hz, frames, self.skeleton)


@dataclass(frozen=True)
class MarkerSequence:
    """
    Marker trajectories from a marker-based system.

    Occluded samples have ``visibility`` False and NaN coordinates.
    """
    sample_rate_hz: float
    marker_names: Tuple[str, ...]
    frames: np.ndarray
    visibility: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "marker_names", tuple(self.marker_names))
        frames = np.array(self.frames, dtype=float)
        visibility = np.array(self.visibility, dtype=bool)
        if frames.ndim != 3 or frames.shape[1:] != (len(self.marker_names), 3) or frames.shape[0] < 1:
            raise ShapeError(f"marker frames must be T x {len(self.marker_names)} x 3, got {frames.shape}")
        if visibility.shape != frames.shape[:2]:
            raise ShapeError(f"visibility must be {frames.shape[:2]}, got {visibility.shape}")
        if len(set(self.marker_names)) != len(self.marker_names):
            raise ShapeError("marker names must be distinct")
        visibility &= np.all(np.isfinite(frames), axis=2)
        frames[~visibility] = np.nan
        if not self.sample_rate_hz > 0:
            raise ShapeError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "frames", _frozen(frames))
        object.__setattr__(self, "visibility", _frozen(visibility, dtype=bool))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    def index(self, name: str) -> int:
        try:
            return self.marker_names.index(name)
        except ValueError:
            raise ConfigurationError(f"marker '{name}' is not in the marker sequence")

    def marker(self, name: str) -> np.ndarray:
        return self.frames[:, self.index(name)]

    def visible(self, name: str) -> np.ndarray:
        return self.visibility[:, self.index(name)]


@dataclass(frozen=True)
class CandidateNode:
    """One triangulated candidate: a vertex of the selection graph."""
    frame_index: int
    subset: Tuple[str, ...]
    position: np.ndarray
    aggregate_confidence: float


@dataclass(frozen=True)
class CandidateLayer:
    """
    Candidates of one frame, stored column-wise.

    ``positions[i]``, ``subsets[i]`` and ``confidences[i]`` describe node ``i``;
    ``bitmasks[i]`` encodes the subset over rig camera indices.
    """
    frame_index: int
    positions: np.ndarray
    subsets: Tuple[Tuple[str, ...], ...]
    confidences: np.ndarray
    bitmasks: Tuple[int, ...] = ()
    low_confidence: Tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions).reshape(-1, 3))
        object.__setattr__(self, "confidences", _frozen(self.confidences).reshape(-1))
        object.__setattr__(self, "subsets", tuple(tuple(s) for s in self.subsets))

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def nodes(self) -> List[CandidateNode]:
        return [
            CandidateNode(self.frame_index, subset, self.positions[i], float(self.confidences[i]))
            for i, subset in enumerate(self.subsets)
        ]


@dataclass(frozen=True)
class LocalFrame:
    """Basis (columns v1/|v1|, v2/|v2|, v3/|v3|) and origin of a marker triad."""
    basis: np.ndarray
    origin: np.ndarray


@dataclass(frozen=True)
class JointOffset:
    joint: str
    markers: Tuple[str, str, str]
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "markers", tuple(self.markers))
        object.__setattr__(self, "w", _frozen(self.w).reshape(3))
        if len(set(self.markers)) != 3:
            raise ConfigurationError(f"joint {self.joint}: marker triple must be distinct, got {self.markers}")
        if not np.all(np.isfinite(self.w)):
            raise ConfigurationError(f"joint {self.joint}: weights must be finite")


@dataclass(frozen=True)
class JointOffsetModel:
    """Per-joint marker triples and local-frame weights."""
    offsets: Mapping[str, JointOffset]

    def __getitem__(self, joint: str) -> JointOffset:
        return self.offsets[joint]

    def __contains__(self, joint: str) -> bool:
        return joint in self.offsets

    @property
    def joints(self) -> List[str]:
        return list(self.offsets)


@dataclass(frozen=True)
class CdfSummary:
    """Empirical CDF: sorted distinct values, cumulative fractions and the mean."""
    values: np.ndarray
    fractions: np.ndarray
    mean: float

    def pairs(self) -> List[Tuple[float, float]]:
        return list(zip(self.values.tolist(), self.fractions.tolist()))
