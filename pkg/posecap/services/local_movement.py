"""
Local movement: how much of the space around the body a limb end visits.

Wrists are expressed in a shoulder-anchored body frame and ankles in a
hip-anchored one, the opposite side mirrored onto the anchor side, all scaled
by limb length. The cover ratio at a voxel side is the number of distinct
occupied voxels over the number of points; the curve over log-spaced voxel
sides is summarized by its mean.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from posecap.core.errors import ArityError, DegeneracyError, SpecError
from posecap.core.types import PoseSequence
from posecap.schemas.pipeline import BodySide, LimbChain, LocalMovementConfig

logger = logging.getLogger(__name__)

_DEGENERATE = 1e-12

# chain -> (anchor, proximal-middle, end) joint stems
_CHAINS = {
    LimbChain.WRIST: ("shoulder", "elbow", "wrist"),
    LimbChain.ANKLE: ("hip", "knee", "ankle"),
}


def _other(side: BodySide) -> BodySide:
    return BodySide.LEFT if side is BodySide.RIGHT else BodySide.RIGHT


@dataclass(frozen=True)
class LocalPoints:
    """
    Limb-end positions in the body frame, normalized by limb length.

    ``anchor_side`` holds the anchor side's joint per frame, ``mirrored`` the
    opposite side's joint reflected across the frame's yz-plane.
    """
    anchor_side: np.ndarray
    mirrored: np.ndarray
    limb_length: float

    @property
    def n_frames(self) -> int:
        return len(self.anchor_side)

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.anchor_side, self.mirrored])

    def subset(self, frames: np.ndarray) -> "LocalPoints":
        return LocalPoints(self.anchor_side[frames], self.mirrored[frames], self.limb_length)


def limb_length(seq: PoseSequence, chain: LimbChain) -> float:
    """Median over frames and both sides of the summed limb segment lengths."""
    anchor, middle, end = _CHAINS[LimbChain(chain)]
    lengths = []
    for side in ("left", "right"):
        a = seq.joint(f"{side}_{anchor}")
        m = seq.joint(f"{side}_{middle}")
        e = seq.joint(f"{side}_{end}")
        lengths.append(np.linalg.norm(m - a, axis=1) + np.linalg.norm(e - m, axis=1))
    return float(np.median(np.concatenate(lengths)))


def _body_frames(seq: PoseSequence, chain: LimbChain, side: BodySide) -> Tuple[np.ndarray, np.ndarray]:
    """Per-frame bases (T, 3, 3), rows x, y, z, and anchor-side origins (T, 3)."""
    other = _other(side)
    shoulder_c = 0.5 * (seq.joint("left_shoulder") + seq.joint("right_shoulder"))
    hip_c = 0.5 * (seq.joint("left_hip") + seq.joint("right_hip"))
    if chain is LimbChain.WRIST:
        origin = seq.joint(f"{side.value}_shoulder")
        axis = origin - seq.joint(f"{other.value}_shoulder")
        up = shoulder_c - hip_c
    else:
        origin = seq.joint(f"{side.value}_hip")
        axis = origin - seq.joint(f"{other.value}_hip")
        up = hip_c - shoulder_c

    norm = np.linalg.norm(axis, axis=1)
    if np.any(norm <= _DEGENERATE):
        raise DegeneracyError(f"anchor joints coincide at frame {int(np.flatnonzero(norm <= _DEGENERATE)[0])}")
    x = axis / norm[:, None]
    z = up - np.sum(up * x, axis=1, keepdims=True) * x
    zn = np.linalg.norm(z, axis=1)
    if np.any(zn <= _DEGENERATE):
        raise DegeneracyError(f"trunk is parallel to the anchor axis at frame {int(np.flatnonzero(zn <= _DEGENERATE)[0])}")
    z = z / zn[:, None]
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1), origin


def to_local_frame(
    seq: PoseSequence, chain: LimbChain = LimbChain.WRIST, side: BodySide = BodySide.RIGHT
) -> LocalPoints:
    """
    Express both limb ends in the body frame of the anchor side.

    The opposite limb end is taken relative to its own anchor joint and its x
    coordinate negated, so a mirror-symmetric pose maps both ends to one point.

    Raises:
        DegeneracyError: Coincident anchor joints or a zero limb length
    """
    chain, side = LimbChain(chain), BodySide(side)
    anchor, _, end = _CHAINS[chain]
    other = _other(side)
    basis, origin = _body_frames(seq, chain, side)
    length = limb_length(seq, chain)
    if not length > 0:
        raise DegeneracyError("limb length is zero")

    near = np.einsum("tij,tj->ti", basis, seq.joint(f"{side.value}_{end}") - origin)
    far = np.einsum("tij,tj->ti", basis, seq.joint(f"{other.value}_{end}") - seq.joint(f"{other.value}_{anchor}"))
    far[:, 0] = -far[:, 0]
    return LocalPoints(near / length, far / length, length)


def cover_ratio(points, voxel_side: float) -> float:
    """
    Distinct occupied voxels over the number of points.

    The grid is aligned with the local axes and has a corner at the origin.
    """
    if not voxel_side > 0:
        raise SpecError(f"voxel side must be positive, got {voxel_side}", field="voxel_side")
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise ArityError("cover ratio needs at least one point")
    cells = np.floor(points / voxel_side).astype(np.int64)
    return len(np.unique(cells, axis=0)) / len(points)


def local_movement_curve(points, cfg: LocalMovementConfig | None = None) -> Tuple[np.ndarray, np.ndarray]:
    """Voxel side ratios (decreasing) and the cover ratio at each."""
    cfg = cfg or LocalMovementConfig()
    ratios = cfg.ratios
    return ratios, np.array([cover_ratio(points, r) for r in ratios])


def _local_points(seqs: Sequence[PoseSequence], cfg: LocalMovementConfig) -> list:
    return [to_local_frame(seq, cfg.chain, cfg.side) for seq in seqs]


def local_movement_auc(data, cfg: LocalMovementConfig | None = None) -> float:
    """
    Mean cover ratio over the configured resolutions.

    Args:
        data: A PoseSequence, a list of them, or local points (N, 3)
        cfg: Resolutions and limb chain
    """
    cfg = cfg or LocalMovementConfig()
    if isinstance(data, PoseSequence):
        data = [data]
    if isinstance(data, (list, tuple)) and data and isinstance(data[0], PoseSequence):
        points = np.concatenate([lp.points for lp in _local_points(data, cfg)])
    else:
        points = data
    _, covers = local_movement_curve(points, cfg)
    return float(covers.mean())


@dataclass(frozen=True)
class LocalMovementResult:
    ratios: np.ndarray
    covers: np.ndarray
    auc: float
    n_frames: int
    limb_length: float


def sequence_local_movement(
    seqs: Sequence[PoseSequence],
    cfg: LocalMovementConfig | None = None,
    subsample: int | None = None,
    seed: int = 0,
) -> LocalMovementResult:
    """
    Local movement over the pooled frames of several sequences.

    With ``subsample`` set, that many frames are drawn uniformly without
    replacement (fixed seed) before measuring.
    """
    cfg = cfg or LocalMovementConfig()
    if not seqs:
        raise ArityError("no sequences given")
    parts = _local_points(seqs, cfg)
    pooled = LocalPoints(
        np.concatenate([p.anchor_side for p in parts]),
        np.concatenate([p.mirrored for p in parts]),
        float(np.median([p.limb_length for p in parts])),
    )
    if subsample is not None and subsample < pooled.n_frames:
        rng = np.random.default_rng(seed)
        frames = np.sort(rng.choice(pooled.n_frames, size=subsample, replace=False))
        pooled = pooled.subset(frames)
        logger.info(f"Subsampled {subsample} frames with seed {seed}")
    ratios, covers = local_movement_curve(pooled.points, cfg)
    auc = float(covers.mean())
    logger.info(f"Local movement ({cfg.chain.value}, {cfg.side.value}): AUC {auc:.6f} over {pooled.n_frames} frames")
    return LocalMovementResult(ratios, covers, auc, pooled.n_frames, pooled.limb_length)
