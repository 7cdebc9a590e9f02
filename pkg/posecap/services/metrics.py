"""
Evaluation protocol and kinematic statistics.

Joint errors are Euclidean distances after one of three per-frame alignments:
none, mid-hip translation, or a similarity transform found by Procrustes
analysis. They are averaged over frames per joint, then over joints, and
reported in millimeters.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from posecap.core.errors import ArityError, DegeneracyError, LengthError, ShapeError
from posecap.core.types import CdfSummary, PoseSequence
from posecap.schemas.metrics import AlignmentMode, ErrorRow

logger = logging.getLogger(__name__)

KINEMATIC_GROUPS = ("wrists", "ankles", "hips")
_COLLINEAR = 1e-9


@dataclass(frozen=True)
class SimilarityTransform:
    """``y = scale * R x + translation``."""
    rotation: np.ndarray
    scale: float
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * np.asarray(points, dtype=float) @ self.rotation.T + self.translation


def _procrustes_batch(source: np.ndarray, target: np.ndarray):
    """Similarity transforms aligning source (F, N, 3) to target (F, N, 3) frame by frame."""
    mu_s = source.mean(axis=1, keepdims=True)
    mu_t = target.mean(axis=1, keepdims=True)
    xs = source - mu_s
    xt = target - mu_t
    spread = np.linalg.svd(xs, compute_uv=False)
    degenerate = ~(spread[:, 1] > _COLLINEAR * spread[:, 0])
    if degenerate.any():
        raise DegeneracyError(f"source points are collinear or coincident at frame {int(np.flatnonzero(degenerate)[0])}")
    cov = np.einsum("fni,fnk->fik", xs, xt)
    U, _, Vt = np.linalg.svd(cov)
    V = np.swapaxes(Vt, 1, 2)
    Ut = np.swapaxes(U, 1, 2)
    sign = np.where(np.linalg.det(V @ Ut) < 0, -1.0, 1.0)
    Z = np.tile(np.eye(3), (len(source), 1, 1))
    Z[:, 2, 2] = sign
    R = V @ Z @ Ut
    var_s = np.sum(xs ** 2, axis=(1, 2))
    scale = np.einsum("fii->f", R @ cov) / var_s
    translation = mu_t[:, 0] - scale[:, None] * np.einsum("fij,fj->fi", R, mu_s[:, 0])
    return R, scale, translation


def procrustes_similarity(source, target, valid=None) -> SimilarityTransform:
    """
    Least-squares similarity transform taking ``source`` onto ``target``.

    Args:
        source: (J, 3) points
        target: (J, 3) points
        valid: Optional (J,) mask of points to use

    Returns:
        SimilarityTransform: Rotation with det +1, positive scale and translation

    Raises:
        DegeneracyError: Fewer than three valid points, or collinear ones
    """
    source = np.asarray(source, dtype=float).reshape(-1, 3)
    target = np.asarray(target, dtype=float).reshape(-1, 3)
    if source.shape != target.shape:
        raise ShapeError(f"source {source.shape} and target {target.shape} differ")
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        source, target = source[valid], target[valid]
    if len(source) < 3:
        raise DegeneracyError(f"similarity alignment needs 3 points, got {len(source)}")
    R, scale, translation = _procrustes_batch(source[None], target[None])
    return SimilarityTransform(R[0], float(scale[0]), translation[0])


def _check_pair(pred: PoseSequence, gt: PoseSequence) -> None:
    if pred.frames.shape != gt.frames.shape:
        raise ShapeError(f"prediction {pred.frames.shape} and ground truth {gt.frames.shape} differ")


def mid_hip(frames: np.ndarray, skeleton) -> np.ndarray:
    left, right = skeleton.group("hips")
    return 0.5 * (frames[:, left] + frames[:, right])


def align_frames(pred: PoseSequence, gt: PoseSequence, mode: AlignmentMode) -> np.ndarray:
    """Predicted frames after the per-frame alignment of ``mode``."""
    _check_pair(pred, gt)
    mode = AlignmentMode(mode)
    if mode is AlignmentMode.IDENTITY:
        return np.array(pred.frames)
    if mode is AlignmentMode.HIP_TRANSLATION:
        shift = mid_hip(gt.frames, gt.skeleton) - mid_hip(pred.frames, pred.skeleton)
        return pred.frames + shift[:, None, :]
    R, scale, translation = _procrustes_batch(pred.frames, gt.frames)
    return scale[:, None, None] * np.einsum("fij,fnj->fni", R, pred.frames) + translation[:, None, :]


@dataclass(frozen=True)
class ErrorSummary:
    """Per-joint and overall mean error in millimeters."""
    mode: AlignmentMode
    per_joint_mm: np.ndarray
    overall_mm: float
    n_frames: int


def pose_error(pred: PoseSequence, gt: PoseSequence, mode: AlignmentMode) -> ErrorSummary:
    """
    Mean joint error under one alignment mode.

    Raises:
        ShapeError: If frame counts or joint counts differ
    """
    aligned = align_frames(pred, gt, mode)
    distances = np.linalg.norm(aligned - gt.frames, axis=2)
    per_joint = distances.mean(axis=0) * 1000.0
    return ErrorSummary(AlignmentMode(mode), per_joint, float(per_joint.mean()), pred.n_frames)


@dataclass(frozen=True)
class SequenceEvaluation:
    name: str
    summaries: Dict[AlignmentMode, ErrorSummary]
    joint_names: Tuple[str, ...]

    @property
    def n_frames(self) -> int:
        return next(iter(self.summaries.values())).n_frames

    def rows(self) -> List[ErrorRow]:
        ident = self.summaries[AlignmentMode.IDENTITY]
        hip = self.summaries[AlignmentMode.HIP_TRANSLATION]
        pa = self.summaries[AlignmentMode.PROCRUSTES]
        rows = [
            ErrorRow(sequence=self.name, joint=joint,
                     mean_error_mm=float(ident.per_joint_mm[j]), mpjpe_mm=float(hip.per_joint_mm[j]),
                     pa_mpjpe_mm=float(pa.per_joint_mm[j]), n_frames=self.n_frames)
            for j, joint in enumerate(self.joint_names)
        ]
        rows.append(ErrorRow(sequence=self.name, joint="overall",
                             mean_error_mm=ident.overall_mm, mpjpe_mm=hip.overall_mm,
                             pa_mpjpe_mm=pa.overall_mm, n_frames=self.n_frames))
        return rows


def evaluate_sequence(pred: PoseSequence, gt: PoseSequence, name: str = "sequence") -> SequenceEvaluation:
    """All three alignment modes at once."""
    summaries = {mode: pose_error(pred, gt, mode) for mode in AlignmentMode}
    logger.info(
        f"{name}: mean error {summaries[AlignmentMode.IDENTITY].overall_mm:.3f} mm, "
        f"MPJPE {summaries[AlignmentMode.HIP_TRANSLATION].overall_mm:.3f} mm, "
        f"PA-MPJPE {summaries[AlignmentMode.PROCRUSTES].overall_mm:.3f} mm"
    )
    return SequenceEvaluation(name, summaries, gt.skeleton.joint_names)


def evaluate_many(pairs: Iterable[Tuple[str, PoseSequence, PoseSequence]]) -> List[ErrorRow]:
    """
    Rows for every named (pred, gt) pair followed by frame-weighted ``total`` rows.
    """
    evaluations = [evaluate_sequence(pred, gt, name) for name, pred, gt in pairs]
    if not evaluations:
        raise ArityError("nothing to evaluate")
    rows = [row for ev in evaluations for row in ev.rows()]
    if len(evaluations) == 1:
        return rows
    weights = np.array([ev.n_frames for ev in evaluations], dtype=float)
    per_sequence = [ev.rows() for ev in evaluations]
    for i, first in enumerate(per_sequence[0]):
        stacked = np.array([[r[i].mean_error_mm, r[i].mpjpe_mm, r[i].pa_mpjpe_mm] for r in per_sequence])
        total = weights @ stacked / weights.sum()
        rows.append(ErrorRow(sequence="total", joint=first.joint, mean_error_mm=float(total[0]),
                             mpjpe_mm=float(total[1]), pa_mpjpe_mm=float(total[2]), n_frames=int(weights.sum())))
    return rows


# ─── Kinematics ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Kinematics:
    """Per-frame speed (m/s) and acceleration magnitude (m/s^2), shape (T, J)."""
    joints: Tuple[str, ...]
    speed: np.ndarray
    acceleration: np.ndarray


def joint_kinematics(seq: PoseSequence, joints: Optional[Sequence[str]] = None) -> Kinematics:
    """
    Speed from central first differences, one-sided at the two end frames.
    Acceleration from the central second difference; each end frame repeats
    the value of its neighbour.

    Raises:
        LengthError: With fewer than three frames
    """
    if seq.n_frames < 3:
        raise LengthError(f"kinematics need at least 3 frames, got {seq.n_frames}")
    joints = tuple(joints) if joints is not None else seq.skeleton.joint_names
    idx = [seq.skeleton.joint_index(name) for name in joints]
    x = seq.frames[:, idx]
    h = 1.0 / seq.sample_rate_hz
    velocity = np.gradient(x, h, axis=0, edge_order=1)
    accel = np.empty_like(x)
    accel[1:-1] = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / h ** 2
    accel[0] = accel[1]
    accel[-1] = accel[-2]
    return Kinematics(joints, np.linalg.norm(velocity, axis=2), np.linalg.norm(accel, axis=2))


def cdf(samples) -> CdfSummary:
    """
    Empirical distribution of finite samples.

    Raises:
        ArityError: If no finite sample is given
    """
    x = np.asarray(samples, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise ArityError("cdf needs at least one finite sample")
    values, counts = np.unique(x, return_counts=True)
    fractions = np.cumsum(counts) / x.size
    fractions[-1] = 1.0
    return CdfSummary(values, fractions, float(x.mean()))


def kinematic_cdfs(
    seqs: Sequence[PoseSequence], groups: Sequence[str] = KINEMATIC_GROUPS
) -> Dict[str, Tuple[CdfSummary, CdfSummary]]:
    """Speed and acceleration CDFs per joint group pooled over sequences."""
    out = {}
    for group in groups:
        speeds, accels = [], []
        for seq in seqs:
            left, right = seq.skeleton.group(group)
            kin = joint_kinematics(seq, [seq.skeleton.joint_names[left], seq.skeleton.joint_names[right]])
            speeds.append(kin.speed.ravel())
            accels.append(kin.acceleration.ravel())
        out[group] = (cdf(np.concatenate(speeds)), cdf(np.concatenate(accels)))
        logger.info(f"{group}: mean speed {out[group][0].mean:.4f} m/s, mean acceleration {out[group][1].mean:.4f} m/s^2")
    return out
