"""
Synthetic scenes with analytic ground truth.

A ring rig, a parametric 17-joint body, its 2D detections under a detector
error model (jitter, left/right swaps, dropout, confidence), planar-board
calibration views and marker triads rigidly attached to the body.
"""
import logging
import zlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError
from scipy.spatial.transform import Rotation

from posecap.core.errors import BehindCameraError, DegeneracyError, SpecError, spec_error_from
from posecap.core.skeleton import COCO17
from posecap.core.types import (CameraParams, CameraRig, Keypoint2D, KeypointFrame, KeypointGroup,
                                MarkerSequence, PoseSequence)
from posecap.schemas.camera import ObservationRecord, PlanarCameraRecord
from posecap.schemas.synth import CorruptionSpec, MotionKind, MotionSpec, RigSpec
from posecap.services.alignment import local_frame
from posecap.services.geometry import camera_points, project_points

logger = logging.getLogger(__name__)

SpecT = TypeVar("SpecT", bound=BaseModel)

UP = np.array([0.0, 0.0, 1.0])


def parse_spec(model: Type[SpecT], data: Any) -> SpecT:
    """Validate a spec, raising SpecError with the offending field."""
    if isinstance(data, model):
        return data
    try:
        return model.model_validate(data or {})
    except ValidationError as e:
        raise spec_error_from(e)


def camera_rng(seed: int, camera_id: str) -> np.random.Generator:
    """Independent stream per camera, derived from the seed and the camera id."""
    return np.random.default_rng([seed, zlib.crc32(camera_id.encode("utf-8"))])


# ─── Rigs ────────────────────────────────────────────────────────────────────

def look_at_rotation(center: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World-to-camera rotation of a camera at ``center`` looking at ``target`` with z up."""
    z = target - center
    z = z / np.linalg.norm(z)
    x = np.cross(z, UP)
    if np.linalg.norm(x) < 1e-9:
        raise SpecError("camera looks straight up or down", field="heights")
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z])


def _in_image(cam: CameraParams, X: np.ndarray) -> np.ndarray:
    depth = camera_points(cam, X)[:, 2]
    px = project_points(cam, X)
    w, h = cam.image_size
    return (depth > 0) & (px[:, 0] >= 0) & (px[:, 0] <= w) & (px[:, 1] >= 0) & (px[:, 1] <= h)


def make_rig(spec: RigSpec | Dict | None = None) -> CameraRig:
    """
    Cameras evenly spaced on a ring, all aimed at the look-at point.

    Raises:
        SpecError: Invalid spec, or a camera whose image does not contain the look-at point
    """
    spec = parse_spec(RigSpec, spec)
    look = np.asarray(spec.look_at, dtype=float)
    w, h = spec.image_size
    intr = spec.intrinsics
    cameras = []
    for i in range(spec.n_cameras):
        angle = 2.0 * np.pi * i / spec.n_cameras
        height = spec.heights[i % len(spec.heights)]
        center = np.array([look[0] + spec.radius * np.cos(angle), look[1] + spec.radius * np.sin(angle), height])
        R = look_at_rotation(center, look)
        cameras.append(CameraParams(
            camera_id=f"cam{i}",
            fx=intr.fx, fy=intr.fy,
            cx=intr.cx if intr.cx is not None else w / 2.0,
            cy=intr.cy if intr.cy is not None else h / 2.0,
            R=R, t=-R @ center, k1=intr.k1, k2=intr.k2,
            image_size=(w, h),
        ))

    half = np.asarray(spec.volume_half_extent, dtype=float)
    corners = look + half * np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    for cam in cameras:
        if not _in_image(cam, look[None])[0]:
            raise SpecError(f"camera {cam.camera_id} cannot see the look-at point", field="intrinsics")
        if not _in_image(cam, corners).all():
            logger.warning(f"Camera {cam.camera_id} does not see the whole capture volume")
    logger.info(f"Built a {spec.n_cameras}-camera ring rig, radius {spec.radius} m")
    return CameraRig(tuple(cameras))


# ─── Motion ──────────────────────────────────────────────────────────────────

def _limb(origin: np.ndarray, length: float, direction: np.ndarray) -> np.ndarray:
    return origin + length * direction


def _raised(angle: np.ndarray, toward: np.ndarray) -> np.ndarray:
    """Unit direction hanging down, raised by ``angle`` toward the horizontal ``toward``."""
    return -np.cos(angle)[:, None] * UP + np.sin(angle)[:, None] * toward


def gen_motion(spec: MotionSpec | Dict | None = None) -> PoseSequence:
    """
    Ground-truth 17-joint motion of a rigid-segment body.

    Every joint is a fixed offset in the body frame or the end of a segment
    of constant length, so segment lengths never change.
    """
    spec = parse_spec(MotionSpec, spec)
    d = spec.dimensions
    n = spec.n_frames
    t = np.arange(n) / spec.sample_rate_hz
    zeros = np.zeros(n)

    start = np.asarray(spec.start, dtype=float)
    if spec.kind is MotionKind.STATIC:
        root = np.tile(start, (n, 1))
    else:
        root = start + t[:, None] * np.asarray(spec.velocity, dtype=float)

    heading = np.full(n, spec.heading_rad)
    if spec.kind is MotionKind.BURST:
        heading = heading + spec.yaw_amplitude_rad * np.sin(2.0 * np.pi * t / spec.burst_period_s)
    forward = np.stack([np.cos(heading), np.sin(heading), zeros], axis=1)
    left = np.stack([-np.sin(heading), np.cos(heading), zeros], axis=1)

    leg_l = leg_r = arm_l = arm_r = knee = elbow = raise_r = zeros
    if spec.kind is MotionKind.SWING:
        phase = 2.0 * np.pi * spec.swing_frequency_hz * t
        swing = spec.swing_amplitude_rad * np.sin(phase)
        bend = 0.25 * spec.swing_amplitude_rad * (1.0 - np.cos(phase))
        leg_l, leg_r = swing, -swing
        arm_l, arm_r = -swing, swing
        knee, elbow = bend, bend
    elif spec.kind is MotionKind.BURST:
        cycle = np.mod(t, spec.burst_period_s)
        active = cycle < spec.burst_duration_s
        profile = np.where(active, 0.5 * (1.0 - np.cos(2.0 * np.pi * cycle / spec.burst_duration_s)), 0.0)
        raise_r = spec.burst_amplitude_rad * profile
        arm_l = 0.5 * spec.burst_amplitude_rad * profile

    pelvis = root + d.pelvis_height * UP
    hip_l = pelvis + d.hip_half_width * left
    hip_r = pelvis - d.hip_half_width * left
    knee_l = _limb(hip_l, d.thigh, _raised(leg_l, forward))
    knee_r = _limb(hip_r, d.thigh, _raised(leg_r, forward))
    ankle_l = _limb(knee_l, d.shank, _raised(leg_l - knee, forward))
    ankle_r = _limb(knee_r, d.shank, _raised(leg_r - knee, forward))

    neck = pelvis + d.torso * UP
    shoulder_l = neck + d.shoulder_half_width * left
    shoulder_r = neck - d.shoulder_half_width * left
    if spec.kind is MotionKind.BURST:
        upper_r = _raised(raise_r, -left)
        elbow_r = _limb(shoulder_r, d.upper_arm, upper_r)
        wrist_r = _limb(elbow_r, d.forearm, upper_r)
    else:
        elbow_r = _limb(shoulder_r, d.upper_arm, _raised(arm_r, forward))
        wrist_r = _limb(elbow_r, d.forearm, _raised(arm_r + elbow, forward))
    elbow_l = _limb(shoulder_l, d.upper_arm, _raised(arm_l, forward))
    wrist_l = _limb(elbow_l, d.forearm, _raised(arm_l + elbow, forward))

    head = neck + d.neck * UP
    nose = head + d.ear_offset * forward
    eye_l = head + 0.8 * d.ear_offset * forward + 0.02 * UP + d.eye_offset * left
    eye_r = head + 0.8 * d.ear_offset * forward + 0.02 * UP - d.eye_offset * left
    ear_l = head + d.ear_offset * left
    ear_r = head - d.ear_offset * left

    frames = np.stack([
        nose, eye_l, eye_r, ear_l, ear_r,
        shoulder_l, shoulder_r, elbow_l, elbow_r, wrist_l, wrist_r,
        hip_l, hip_r, knee_l, knee_r, ankle_l, ankle_r,
    ], axis=1)
    logger.info(f"Generated {spec.kind.value} motion: {n} frames at {spec.sample_rate_hz} Hz")
    return PoseSequence(spec.sample_rate_hz, frames)


# ─── 2D detections ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CorruptionEvent:
    frame_index: int
    camera_id: str
    joint: str
    kind: str


@dataclass(frozen=True)
class RenderedKeypoints:
    groups: List[KeypointGroup]
    events: List[CorruptionEvent] = field(default_factory=list)


def _swap_pairs(corruption: CorruptionSpec) -> List[Tuple[int, int]]:
    eligible = set(corruption.swap_joints)
    return [
        (left, right) for left, right in COCO17.pairs()
        if COCO17.joint_names[left] in eligible or COCO17.joint_names[right] in eligible
    ]


def render_keypoints(
    gt: PoseSequence, rig: CameraRig, corruption: CorruptionSpec | Dict | None = None
) -> RenderedKeypoints:
    """
    Project ground truth into every camera and corrupt the detections.

    Per camera: projection, Gaussian jitter, left/right pair swaps (swapped
    joints draw confidence from the corrupted range), then dropout. Every
    random draw has a fixed shape, so streams depend only on the seed.

    Raises:
        BehindCameraError: A joint is behind a camera and ``drop_behind_camera`` is off
    """
    corruption = parse_spec(CorruptionSpec, corruption)
    T, J = gt.n_frames, gt.skeleton.n_joints
    pairs = _swap_pairs(corruption)
    swap_cameras = set(corruption.swap_cameras) if corruption.swap_cameras is not None else set(rig.camera_ids)
    events: List[CorruptionEvent] = []
    per_camera: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    for cam in rig:
        rng = camera_rng(corruption.seed, cam.camera_id)
        flat = gt.frames.reshape(-1, 3)
        depth = camera_points(cam, flat)[:, 2].reshape(T, J)
        behind = ~(depth > 0)
        if behind.any() and not corruption.drop_behind_camera:
            t, j = np.argwhere(behind)[0]
            raise BehindCameraError(
                f"joint {gt.skeleton.joint_names[j]} at frame {t} is behind camera {cam.camera_id}"
            )
        pixels = project_points(cam, flat).reshape(T, J, 2)

        noise = rng.normal(0.0, 1.0, size=(T, J, 2))
        pixels = pixels + corruption.pixel_noise_sigma * noise
        confidence = rng.uniform(*corruption.clean_confidence, size=(T, J))

        swap_draw = rng.random(size=(T, len(pairs)))
        swap_conf = rng.uniform(*corruption.corrupted_confidence, size=(T, len(pairs), 2))
        if cam.camera_id in swap_cameras:
            for p, (left, right) in enumerate(pairs):
                frames = np.flatnonzero(swap_draw[:, p] < corruption.swap_probability)
                if len(frames) == 0:
                    continue
                pixels[frames, left], pixels[frames, right] = pixels[frames, right].copy(), pixels[frames, left].copy()
                confidence[frames, left] = swap_conf[frames, p, 0]
                confidence[frames, right] = swap_conf[frames, p, 1]
                for f in frames:
                    events.append(CorruptionEvent(int(f), cam.camera_id, gt.skeleton.joint_names[left], "swap"))
                    events.append(CorruptionEvent(int(f), cam.camera_id, gt.skeleton.joint_names[right], "swap"))

        present = rng.random(size=(T, J)) >= corruption.dropout_probability
        for f, j in np.argwhere(~present):
            events.append(CorruptionEvent(int(f), cam.camera_id, gt.skeleton.joint_names[j], "dropout"))
        for f, j in np.argwhere(behind):
            events.append(CorruptionEvent(int(f), cam.camera_id, gt.skeleton.joint_names[j], "behind_camera"))
        present &= ~behind
        per_camera[cam.camera_id] = (pixels, confidence, present)

    groups = []
    for f in range(T):
        views = {}
        for camera_id, (pixels, confidence, present) in per_camera.items():
            keypoints = tuple(
                Keypoint2D(float(pixels[f, j, 0]), float(pixels[f, j, 1]), float(confidence[f, j]))
                if present[f, j] else None
                for j in range(J)
            )
            views[camera_id] = KeypointFrame(camera_id, f, keypoints)
        groups.append(KeypointGroup(f, views))
    events.sort(key=lambda e: (e.frame_index, e.camera_id, gt.skeleton.joint_index(e.joint), e.kind))
    logger.info(f"Rendered {T} frames into {len(rig)} cameras with {len(events)} corruption events")
    return RenderedKeypoints(groups, events)


# ─── Calibration scenes ──────────────────────────────────────────────────────

def board_grid(rows: int = 6, cols: int = 6, spacing: float = 0.1) -> np.ndarray:
    """(rows * cols, 2) board points in meters, centered on the board origin."""
    xs = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    ys = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


BoardPose = Tuple[np.ndarray, np.ndarray]


def facing_board_poses(cam: CameraParams, n_views: int, distance: float = 2.0, tilt_rad: float = 0.4) -> List[BoardPose]:
    """Board placements in front of a camera, each tilted about a different in-plane axis."""
    center = cam.center + distance * cam.R[2]
    poses = []
    for v in range(n_views):
        angle = 2.0 * np.pi * v / n_views
        tilt = Rotation.from_rotvec(tilt_rad * np.array([np.cos(angle), np.sin(angle), 0.0])).as_matrix()
        poses.append((cam.R.T @ tilt, center))
    return poses


def render_planar_views(
    cam: CameraParams, board: np.ndarray, poses: Sequence[BoardPose], sigma: float = 0.0, seed: int = 0
) -> List[np.ndarray]:
    """Per pose an (N, 4) array of ``[board_x, board_y, u, v]``."""
    rng = camera_rng(seed, cam.camera_id)
    board3 = np.column_stack([board, np.zeros(len(board))])
    views = []
    for R_board, t_board in poses:
        world = board3 @ R_board.T + t_board
        if not np.all(camera_points(cam, world)[:, 2] > 0):
            raise BehindCameraError(f"board placement behind camera {cam.camera_id}")
        pixels = project_points(cam, world) + sigma * rng.normal(size=(len(board), 2))
        views.append(np.column_stack([board, pixels]))
    return views


def make_planar_correspondences(
    rig: CameraRig, n_views: int = 5, board: Optional[np.ndarray] = None, sigma: float = 0.0, seed: int = 0
) -> Dict[str, PlanarCameraRecord]:
    """
    Planar views per camera. View 0 is the shared anchor: the board lying on
    the floor at the world origin, seen by every camera.
    """
    board = board_grid() if board is None else board
    anchor = (np.eye(3), np.zeros(3))
    out = {}
    for cam in rig:
        poses = [anchor] + facing_board_poses(cam, n_views - 1)
        views = render_planar_views(cam, board, poses, sigma, seed)
        out[cam.camera_id] = PlanarCameraRecord(
            image_size=cam.image_size, views=[[tuple(row) for row in view.tolist()] for view in views]
        )
    return out


def make_observations(rig: CameraRig, points: np.ndarray, sigma: float = 0.0, seed: int = 0) -> List[ObservationRecord]:
    """Pixel observations of world points (N, 3) in every camera that sees them."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    records = []
    for cam in rig:
        rng = camera_rng(seed + 1, cam.camera_id)
        pixels = project_points(cam, points) + sigma * rng.normal(size=(len(points), 2))
        visible = _in_image(cam, points)
        for i in np.flatnonzero(visible):
            records.append(ObservationRecord(camera_id=cam.camera_id, point_id=f"p{i}", u=pixels[i, 0], v=pixels[i, 1]))
    return records


# ─── Markers ─────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SyntheticMarkers:
    markers: MarkerSequence
    overrides: Dict[str, Tuple[str, str, str]]
    weights: Dict[str, np.ndarray]


def body_rotations(seq: PoseSequence) -> np.ndarray:
    """Per-frame body orientation (T, 3, 3), columns: hip axis, forward, trunk up."""
    x = seq.joint("right_hip") - seq.joint("left_hip")
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    up = 0.5 * (seq.joint("left_shoulder") + seq.joint("right_shoulder")) - 0.5 * (seq.joint("left_hip") + seq.joint("right_hip"))
    z = up - np.sum(up * x, axis=1, keepdims=True) * x
    z = z / np.linalg.norm(z, axis=1, keepdims=True)
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=2)


def synthesize_markers(
    gt: PoseSequence, offset_scale: float = 0.05, marker_noise_sigma: float = 0.0, seed: int = 0
) -> SyntheticMarkers:
    """
    Three markers per joint, rigidly attached to the body frame around the joint.

    The joint is then exactly ``A(t) w + M1(t)`` for the returned weights, and
    the returned override table names each joint's own triad.
    """
    rng = np.random.default_rng(seed)
    rotations = body_rotations(gt)
    names: List[str] = []
    tracks: List[np.ndarray] = []
    overrides, weights = {}, {}
    for j, joint in enumerate(gt.skeleton.joint_names):
        while True:
            offsets = offset_scale * rng.normal(size=(3, 3))
            try:
                frame = local_frame(*offsets)
            except DegeneracyError:
                continue
            if np.linalg.cond(frame.basis) < 1e3:
                break
        weights[joint] = np.linalg.solve(frame.basis, -offsets[0])
        triple = tuple(f"{joint}_m{i + 1}" for i in range(3))
        overrides[joint] = triple
        names.extend(triple)
        for o in offsets:
            tracks.append(gt.frames[:, j] + np.einsum("tij,j->ti", rotations, o))
    frames = np.stack(tracks, axis=1)
    if marker_noise_sigma > 0:
        frames = frames + rng.normal(0.0, marker_noise_sigma, size=frames.shape)
    markers = MarkerSequence(gt.sample_rate_hz, tuple(names), frames, np.ones(frames.shape[:2], dtype=bool))
    return SyntheticMarkers(markers, overrides, weights)
