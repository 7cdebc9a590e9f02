"""
Per-joint trajectory selection.

For every frame and joint the cameras are pruned by 2D confidence, every
subset of two or more remaining cameras is triangulated, and one candidate per
frame is chosen by a shortest path through the layered candidate graph whose
edge weights are Euclidean distances between consecutive candidates.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from posecap.core.config import settings
from posecap.core.errors import ArityError, ConfigurationError, GapError, StructuralError
from posecap.core.skeleton import COCO17
from posecap.core.types import CameraRig, CandidateLayer, Keypoint2D, KeypointGroup, PoseSequence
from posecap.schemas.pipeline import PruneConfig
from posecap.services.geometry import triangulate_batch

logger = logging.getLogger(__name__)

Detections = Mapping[str, Keypoint2D]
DiagnosticRow = Tuple[int, str, int, float]


def enumerate_subsets(active: Iterable[str]) -> List[Tuple[str, ...]]:
    """
    All subsets of two or more cameras, by size then lexicographically.

    Raises:
        ArityError: With fewer than two active cameras
    """
    ids = sorted(set(active))
    if len(ids) < 2:
        raise ArityError(f"need at least 2 active cameras, got {len(ids)}")
    return [subset for size in range(2, len(ids) + 1) for subset in combinations(ids, size)]


def prune_cameras(confidences: Mapping[str, float], cfg: PruneConfig | None = None) -> Tuple[str, ...]:
    """
    Drop the least confident cameras below the threshold.

    At most ``cfg.max_removed`` cameras go, lowest confidence first with ties
    broken by camera id, and never more than would leave two.
    """
    cfg = cfg or PruneConfig()
    below = sorted(
        (conf, camera_id) for camera_id, conf in confidences.items() if conf < cfg.confidence_threshold
    )
    n_remove = max(0, min(len(below), cfg.max_removed, len(confidences) - 2))
    removed = {camera_id for _, camera_id in below[:n_remove]}
    return tuple(camera_id for camera_id in sorted(confidences) if camera_id not in removed)


def _candidate_sets(detections: Detections, cfg: Optional[PruneConfig]) -> List[Tuple[str, ...]]:
    # cfg None means no pruning and the all-camera subset only
    if cfg is None:
        return [tuple(sorted(detections))]
    retained = prune_cameras({cid: kp.confidence for cid, kp in detections.items()}, cfg)
    return enumerate_subsets(retained)


def build_layers(
    frames: Sequence[Detections],
    rig: CameraRig,
    cfg: PruneConfig | None = None,
    frame_indices: Sequence[int] | None = None,
    joint: str | None = None,
    all_cameras_only: bool = False,
) -> List[CandidateLayer]:
    """
    Triangulated candidates of one joint, one layer per frame.

    Args:
        frames: Per frame, the joint's detections keyed by camera id
        rig: Calibrated cameras
        cfg: Pruning configuration
        frame_indices: Frame labels for the layers (defaults to 0..T-1)
        joint: Joint name used in error messages
        all_cameras_only: Skip pruning and keep only the subset of all detecting cameras

    Returns:
        List[CandidateLayer]: Node order follows the subset enumeration order

    Raises:
        GapError: If a frame has fewer than two detections
    """
    cfg = None if all_cameras_only else (cfg or PruneConfig())
    frame_indices = list(range(len(frames))) if frame_indices is None else list(frame_indices)
    K = len(rig)

    per_frame: List[List[Tuple[str, ...]]] = []
    for frame_index, detections in zip(frame_indices, frames):
        if len(detections) < 2:
            raise GapError("fewer than 2 detections", joint=joint, frame=frame_index)
        per_frame.append(_candidate_sets(detections, cfg))

    n_rows = sum(len(subsets) for subsets in per_frame)
    pixels = np.zeros((n_rows, K, 2))
    mask = np.zeros((n_rows, K), dtype=bool)
    confidences = np.zeros(n_rows)
    bitmasks: List[int] = []
    row = 0
    for detections, subsets in zip(frames, per_frame):
        frame_pixels = np.zeros((K, 2))
        frame_conf = np.zeros(K)
        for camera_id, kp in detections.items():
            k = rig.index(camera_id)
            frame_pixels[k] = (kp.u, kp.v)
            frame_conf[k] = kp.confidence
        for subset in subsets:
            cols = [rig.index(camera_id) for camera_id in subset]
            pixels[row] = frame_pixels
            mask[row, cols] = True
            confidences[row] = frame_conf[cols].mean()
            bitmasks.append(sum(1 << k for k in cols))
            row += 1

    out = triangulate_batch(rig.cameras, pixels, mask)
    n_low = int(out.low_confidence.sum())
    if n_low:
        logger.warning(f"Joint {joint}: {n_low} of {n_rows} candidates are ill-conditioned")

    layers = []
    start = 0
    for frame_index, subsets in zip(frame_indices, per_frame):
        stop = start + len(subsets)
        layers.append(CandidateLayer(
            frame_index=frame_index,
            positions=out.points[start:stop],
            subsets=subsets,
            confidences=confidences[start:stop],
            bitmasks=tuple(bitmasks[start:stop]),
            low_confidence=tuple(bool(x) for x in out.low_confidence[start:stop]),
        ))
        start = stop
    return layers


def _positions(layer) -> np.ndarray:
    positions = layer.positions if isinstance(layer, CandidateLayer) else layer
    return np.asarray(positions, dtype=float).reshape(-1, 3)


def edge_weights(previous: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Distances between every candidate of one layer and every candidate of the next."""
    return cdist(previous, current)


def shortest_path(layers: Sequence) -> List[int]:
    """
    Minimum total-distance path picking one node per layer.

    A zero-cost virtual source and sink span the first and last layers. At
    every argmin the lowest node index wins ties.

    Args:
        layers: CandidateLayer objects or (n, 3) position arrays

    Returns:
        List[int]: Selected node index per layer

    Raises:
        StructuralError: If a layer is empty
    """
    positions = [_positions(layer) for layer in layers]
    for t, pos in enumerate(positions):
        if len(pos) == 0:
            raise StructuralError(f"layer {t} has no candidates")
    if not positions:
        return []

    cost = np.zeros(len(positions[0]))
    back = []
    for prev, cur in zip(positions, positions[1:]):
        total = cost[:, None] + edge_weights(prev, cur)
        best = np.argmin(total, axis=0)
        back.append(best)
        cost = total[best, np.arange(len(cur))]

    path = [int(np.argmin(cost))]
    for best in reversed(back):
        path.append(int(best[path[-1]]))
    path.reverse()
    return path


def path_cost(layers: Sequence, indices: Sequence[int]) -> float:
    """Summed edge weights along a path."""
    positions = [_positions(layer)[i] for layer, i in zip(layers, indices)]
    return float(sum(np.linalg.norm(b - a) for a, b in zip(positions, positions[1:])))


# ─── Whole-sequence selection ────────────────────────────────────────────────

@dataclass(frozen=True)
class SelectionResult:
    sequence: PoseSequence
    diagnostics: List[DiagnosticRow]


def _frame_range(groups: Sequence[KeypointGroup], rig: CameraRig) -> Tuple[List[int], Dict[int, KeypointGroup]]:
    if not groups:
        raise ArityError("no keypoint frames to reconstruct")
    by_frame = {g.frame_index: g for g in groups}
    for g in groups:
        for camera_id in g.views:
            if camera_id not in rig.camera_ids:
                raise ConfigurationError(f"frame {g.frame_index}: camera '{camera_id}' is not part of the rig")
    frames = list(range(min(by_frame), max(by_frame) + 1))
    missing = len(frames) - len(by_frame)
    if missing:
        logger.warning(f"{missing} frame indices have no keypoint records")
    return frames, by_frame


def _gap_runs(valid: np.ndarray) -> List[Tuple[int, int]]:
    """(start, stop) of every run of invalid frames."""
    runs, start = [], None
    for t, ok in enumerate(valid):
        if not ok and start is None:
            start = t
        elif ok and start is not None:
            runs.append((start, t))
            start = None
    if start is not None:
        runs.append((start, len(valid)))
    return runs


def _check_gaps(valid: np.ndarray, frames: List[int], joint: str, max_gap: int) -> None:
    for start, stop in _gap_runs(valid):
        if start == 0 or stop == len(valid):
            raise GapError("dropout at the sequence boundary cannot be interpolated", joint=joint, frame=frames[start])
        if stop - start > max_gap:
            raise GapError(f"dropout of {stop - start} frames exceeds {max_gap}", joint=joint, frame=frames[start])


def _select_joint(
    joint: int,
    frames: List[int],
    by_frame: Dict[int, KeypointGroup],
    rig: CameraRig,
    cfg: PruneConfig,
    interpolate_gaps: bool,
    max_gap: int,
    all_cameras_only: bool,
) -> Tuple[np.ndarray, List[DiagnosticRow]]:
    name = COCO17.joint_names[joint]
    detections = [by_frame[f].detections(joint) if f in by_frame else {} for f in frames]
    valid = np.array([len(d) >= 2 for d in detections])
    if not valid.all():
        if not interpolate_gaps:
            first = int(np.flatnonzero(~valid)[0])
            raise GapError("fewer than 2 detections", joint=name, frame=frames[first])
        _check_gaps(valid, frames, name, max_gap)
        logger.warning(f"Joint {name}: interpolating {int((~valid).sum())} dropout frames")

    kept = np.flatnonzero(valid)
    layers = build_layers(
        [detections[t] for t in kept], rig, cfg,
        frame_indices=[frames[t] for t in kept], joint=name, all_cameras_only=all_cameras_only,
    )
    path = shortest_path(layers)
    chosen = np.array([layer.positions[i] for layer, i in zip(layers, path)])

    rows: List[DiagnosticRow] = []
    previous = None
    for layer, i in zip(layers, path):
        increment = 0.0 if previous is None else float(np.linalg.norm(layer.positions[i] - previous))
        rows.append((layer.frame_index, name, layer.bitmasks[i], increment))
        previous = layer.positions[i]

    positions = np.empty((len(frames), 3))
    if valid.all():
        positions[:] = chosen
    else:
        t_all = np.arange(len(frames))
        for axis in range(3):
            positions[:, axis] = np.interp(t_all, kept, chosen[:, axis])
    logger.debug(f"Joint {name}: path cost {sum(r[3] for r in rows):.6f} m over {len(layers)} layers")
    return positions, rows


def select_trajectories_with_diagnostics(
    groups: Sequence[KeypointGroup],
    rig: CameraRig,
    cfg: PruneConfig | None = None,
    sample_rate_hz: float | None = None,
    threads: int | None = None,
    interpolate_gaps: bool = False,
    max_gap: int | None = None,
    all_cameras_only: bool = False,
) -> SelectionResult:
    """
    Select every joint's trajectory independently and assemble the pose sequence.

    Joints run on a thread pool; results are collected in joint order, so the
    output does not depend on the thread count.

    Raises:
        GapError: A joint with too few detections at a frame (joint and frame named)
    """
    cfg = cfg or PruneConfig()
    threads = threads or settings.THREADS
    max_gap = settings.MAX_GAP_FRAMES if max_gap is None else max_gap
    frames, by_frame = _frame_range(groups, rig)

    def run(joint: int):
        return _select_joint(joint, frames, by_frame, rig, cfg, interpolate_gaps, max_gap, all_cameras_only)

    joints = range(COCO17.n_joints)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, joints))
    else:
        results = [run(j) for j in joints]

    positions = np.stack([pos for pos, _ in results], axis=1)
    rows = sorted((row for _, joint_rows in results for row in joint_rows),
                  key=lambda r: (r[0], COCO17.joint_index(r[1])))
    seq = PoseSequence(sample_rate_hz or settings.SAMPLE_RATE_HZ, positions)
    logger.info(f"Selected trajectories for {COCO17.n_joints} joints over {len(frames)} frames")
    return SelectionResult(seq, rows)


def select_trajectories(
    groups: Sequence[KeypointGroup],
    rig: CameraRig,
    cfg: PruneConfig | None = None,
    sample_rate_hz: float | None = None,
    threads: int | None = None,
    interpolate_gaps: bool = False,
) -> PoseSequence:
    return select_trajectories_with_diagnostics(
        groups, rig, cfg, sample_rate_hz, threads, interpolate_gaps
    ).sequence


def select_baseline(
    groups: Sequence[KeypointGroup],
    rig: CameraRig,
    sample_rate_hz: float | None = None,
    interpolate_gaps: bool = False,
) -> PoseSequence:
    """Per-frame triangulation from every detecting camera: no pruning, no graph."""
    return select_trajectories_with_diagnostics(
        groups, rig, sample_rate_hz=sample_rate_hz, interpolate_gaps=interpolate_gaps, all_cameras_only=True
    ).sequence
