"""
Marker-protocol alignment.

Each joint center is modeled as a fixed linear combination of the basis of a
local frame spanned by three markers:

    J(t) = A(t) w + M1(t),   A = [v1/|v1|, v2/|v2|, v3/|v3|]

with ``v1 = M2 - M1``, ``v2 = M3 - M1`` and ``v3 = v1 x v2``. The weights ``w``
are fit by stacking all usable frames into one least-squares system.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from posecap.core.errors import ConfigurationError, DegeneracyError, GapError, ShapeError
from posecap.core.skeleton import COCO17, Skeleton
from posecap.core.types import JointOffset, JointOffsetModel, LocalFrame, MarkerSequence, PoseSequence

logger = logging.getLogger(__name__)

COLLINEAR_TOLERANCE = 1e-9
ORIENTATION_TOLERANCE = 1e-6
MIN_FIT_FRAMES = 3


def _bases(m1: np.ndarray, m2: np.ndarray, m3: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Bases (T, 3, 3) for marker tracks (T, 3) and a per-frame degeneracy mask."""
    v1 = m2 - m1
    v2 = m3 - m1
    v3 = np.cross(v1, v2)
    n1 = np.linalg.norm(v1, axis=-1)
    n2 = np.linalg.norm(v2, axis=-1)
    n3 = np.linalg.norm(v3, axis=-1)
    degenerate = ~(n3 > COLLINEAR_TOLERANCE * n1 * n2) | ~(n1 > 0) | ~(n2 > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        A = np.stack([v1 / n1[..., None], v2 / n2[..., None], v3 / n3[..., None]], axis=-1)
    return A, degenerate


def local_frame(m1, m2, m3) -> LocalFrame:
    """
    Local frame of one marker triad, origin at ``m1``.

    Raises:
        DegeneracyError: If the markers coincide or are collinear
    """
    m1, m2, m3 = (np.asarray(m, dtype=float).reshape(3) for m in (m1, m2, m3))
    A, degenerate = _bases(m1[None], m2[None], m3[None])
    if degenerate[0]:
        raise DegeneracyError("markers are collinear or coincident")
    return LocalFrame(A[0], m1)


@dataclass(frozen=True)
class OffsetFit:
    w: np.ndarray
    rms: float
    n_frames: int


def fit_joint_offset(
    m1, m2, m3, joint_positions, mask=None, joint: str = "joint",
) -> OffsetFit:
    """
    Fit local-frame weights of one joint from marker and joint tracks.

    Frames where any marker is masked out or non-finite, or where the triad is
    degenerate, are dropped. The stacked system is solved by orthogonal
    decomposition.

    Args:
        m1, m2, m3: (T, 3) marker tracks
        joint_positions: (T, 3) markerless joint track
        mask: Optional (T,) usable-frame flags
        joint: Name used in error messages

    Returns:
        OffsetFit: Weights, RMS residual in meters and frame count

    Raises:
        DegeneracyError: Fewer than three usable frames or a single triad orientation
    """
    m1, m2, m3, J = (np.asarray(a, dtype=float).reshape(-1, 3) for a in (m1, m2, m3, joint_positions))
    if not (len(m1) == len(m2) == len(m3) == len(J)):
        raise ShapeError(f"joint {joint}: marker and joint tracks differ in length")
    usable = np.all(np.isfinite(np.concatenate([m1, m2, m3, J], axis=1)), axis=1)
    if mask is not None:
        usable &= np.asarray(mask, dtype=bool)
    A, degenerate = _bases(m1, m2, m3)
    usable &= ~degenerate
    A, m1u, Ju = A[usable], m1[usable], J[usable]
    if len(A) < MIN_FIT_FRAMES:
        raise DegeneracyError(f"joint {joint}: {len(A)} usable frames, need {MIN_FIT_FRAMES}")
    spread = np.max(np.linalg.norm(A - A[0], axis=(1, 2)))
    if not spread > ORIENTATION_TOLERANCE:
        raise DegeneracyError(f"joint {joint}: marker triad shows a single orientation")

    stacked = A.reshape(-1, 3)
    target = (Ju - m1u).reshape(-1)
    w, _, rank, _ = np.linalg.lstsq(stacked, target, rcond=None)
    if rank < 3:
        raise DegeneracyError(f"joint {joint}: stacked system has rank {rank}")
    residual = np.einsum("tij,j->ti", A, w) + m1u - Ju
    rms = float(np.sqrt(np.mean(np.sum(residual ** 2, axis=1))))
    return OffsetFit(w, rms, len(A))


def _marker_tracks(markers: MarkerSequence, offset: JointOffset):
    try:
        idx = [markers.index(name) for name in offset.markers]
    except ConfigurationError as e:
        raise ConfigurationError(f"joint {offset.joint}: {e}")
    return [markers.frames[:, i] for i in idx], np.all(markers.visibility[:, idx], axis=1)


def apply_offset(model: JointOffsetModel, markers: MarkerSequence, skeleton: Skeleton = COCO17) -> PoseSequence:
    """
    Transformed ground-truth joints from marker trajectories.

    Raises:
        ConfigurationError: The model misses a joint or names an unknown marker
        GapError: A needed marker is occluded at some frame
        DegeneracyError: A triad is collinear at some frame
    """
    missing = [name for name in skeleton.joint_names if name not in model]
    if missing:
        raise ConfigurationError(f"offset model has no entry for {missing}")
    out = np.empty((markers.n_frames, skeleton.n_joints, 3))
    for j, name in enumerate(skeleton.joint_names):
        offset = model[name]
        (m1, m2, m3), visible = _marker_tracks(markers, offset)
        if not visible.all():
            raise GapError("marker occluded", joint=name, frame=int(np.flatnonzero(~visible)[0]))
        A, degenerate = _bases(m1, m2, m3)
        if degenerate.any():
            raise DegeneracyError(f"joint {name}: collinear markers at frame {int(np.flatnonzero(degenerate)[0])}")
        out[:, j] = np.einsum("tij,j->ti", A, offset.w) + m1
    return PoseSequence(markers.sample_rate_hz, out, skeleton)


def choose_marker_triple(markers: MarkerSequence, joint_track, joint: str = "joint") -> Tuple[str, str, str]:
    """
    Pick a marker triple for a joint.

    The two markers nearest the joint (median distance over frames) come
    first; the third minimizes the variance of the joint's coordinate along
    the triad's plane normal.

    Raises:
        DegeneracyError: Fewer than three usable markers
    """
    J = np.asarray(joint_track, dtype=float).reshape(-1, 3)
    if len(J) != markers.n_frames:
        raise ShapeError(f"joint {joint}: {len(J)} joint frames vs {markers.n_frames} marker frames")
    with np.errstate(invalid="ignore"):
        distances = np.linalg.norm(markers.frames - J[:, None, :], axis=2)
    distances[~markers.visibility] = np.nan
    seen = markers.visibility.any(axis=0)
    if seen.sum() < 3:
        raise DegeneracyError(f"joint {joint}: fewer than 3 visible markers")
    median = np.full(len(markers.marker_names), np.inf)
    median[seen] = np.nanmedian(distances[:, seen], axis=0)
    order = np.argsort(median, kind="stable")
    first, second = int(order[0]), int(order[1])

    best: Optional[int] = None
    best_var = np.inf
    for c in order[2:]:
        c = int(c)
        if not np.isfinite(median[c]):
            break
        frames = markers.visibility[:, [first, second, c]].all(axis=1)
        if frames.sum() < MIN_FIT_FRAMES:
            continue
        m1, m2, m3 = markers.frames[frames, first], markers.frames[frames, second], markers.frames[frames, c]
        A, degenerate = _bases(m1, m2, m3)
        if degenerate.any():
            continue
        out_of_plane = np.einsum("ti,ti->t", J[frames] - m1, A[:, :, 2])
        var = float(np.var(out_of_plane))
        if var < best_var:
            best, best_var = c, var
    if best is None:
        raise DegeneracyError(f"joint {joint}: no non-collinear third marker")
    names = markers.marker_names
    return names[first], names[second], names[best]


def fit_offset_model(
    markers: MarkerSequence,
    joints: PoseSequence,
    overrides: Mapping[str, Sequence[str]] | None = None,
) -> Tuple[JointOffsetModel, Dict[str, OffsetFit]]:
    """
    Fit every joint of the skeleton; overrides fix the marker triple of a joint.

    Returns:
        Tuple[JointOffsetModel, Dict[str, OffsetFit]]: The model and per-joint fits

    Raises:
        ShapeError: Marker and joint sequences differ in length
        DegeneracyError: A joint cannot be fit (named in the message)
    """
    if markers.n_frames != joints.n_frames:
        raise ShapeError(f"{markers.n_frames} marker frames vs {joints.n_frames} joint frames")
    overrides = overrides or {}
    offsets, fits = {}, {}
    for j, name in enumerate(joints.skeleton.joint_names):
        J = joints.frames[:, j]
        triple = tuple(overrides[name]) if name in overrides else choose_marker_triple(markers, J, name)
        offset_stub = JointOffset(name, triple, np.zeros(3))
        (m1, m2, m3), visible = _marker_tracks(markers, offset_stub)
        fit = fit_joint_offset(m1, m2, m3, J, mask=visible, joint=name)
        offsets[name] = JointOffset(name, triple, fit.w)
        fits[name] = fit
        logger.info(f"Joint {name}: markers {triple}, rms {fit.rms * 1000:.4f} mm over {fit.n_frames} frames")
    return JointOffsetModel(offsets), fits
