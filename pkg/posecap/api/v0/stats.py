from fastapi import APIRouter

from posecap.core import io
from posecap.core.config import settings
from posecap.schemas.api import (GroupKinematics, KinematicsRequest, KinematicsResponse,
                                 LocalMovementRequest, LocalMovementResponse)
from posecap.schemas.metrics import AucRow
from posecap.services.local_movement import sequence_local_movement
from posecap.services.metrics import kinematic_cdfs

router = APIRouter(tags=["stats"])


@router.post("/kinematics", response_model=KinematicsResponse, summary="Speed and acceleration CDFs per joint group")
def kinematics(payload: KinematicsRequest):
    """
    Pool joint speeds and accelerations over the given sequences.

    Returns:
        KinematicsResponse: One entry per group with both CDFs and their means

    Raises:
        LengthError: A sequence shorter than three frames (422)
    """
    seqs = [io.pose_from_record(record) for record in payload.sequences]
    cdfs = kinematic_cdfs(seqs, payload.groups)
    return KinematicsResponse(groups=[
        GroupKinematics(group=group, mean_speed_m_s=speed.mean, mean_accel_m_s2=accel.mean,
                        speed_cdf=speed.pairs(), accel_cdf=accel.pairs())
        for group, (speed, accel) in cdfs.items()
    ])


@router.post("/local-movement", response_model=LocalMovementResponse, summary="Local-movement curve and AUC")
def local_movement(payload: LocalMovementRequest):
    seqs = [io.pose_from_record(record) for record in payload.sequences]
    seed = settings.SEED if payload.seed is None else payload.seed
    result = sequence_local_movement(seqs, payload.config, payload.subsample, seed)
    summary = AucRow(chain=payload.config.chain.value, side=payload.config.side.value, auc=result.auc,
                     n_frames=result.n_frames, limb_length_m=result.limb_length)
    return LocalMovementResponse(summary=summary, voxel_side_ratios=result.ratios.tolist(),
                                 cover_ratios=result.covers.tolist())
