import logging

from fastapi import APIRouter, status

from posecap.core import io
from posecap.core.config import settings
from posecap.schemas.api import DiagnosticOut, ReconstructRequest, ReconstructResponse
from posecap.services.pipeline import reconstruct_groups

logger = logging.getLogger(__name__)

router = APIRouter(tags=["reconstruct"])


@router.post(
    "/",
    response_model=ReconstructResponse,
    status_code=status.HTTP_200_OK,
    summary="Reconstruct a 3D pose sequence from multi-view keypoints",
)
def reconstruct(payload: ReconstructRequest):
    """
    Run trajectory selection and smoothing on an uploaded rig and keypoint stream.

    Args:
        payload (ReconstructRequest): Rig, keypoint records and run options

    Returns:
        ReconstructResponse: The pose sequence and the per-layer selection dump

    Raises:
        PoseCapError: Mapped to 422 by the global handler (e.g. a GapError naming joint and frame)
    """
    rig = io.rig_from_records(payload.rig)
    groups = io.group_keypoints(payload.keypoints)
    result = reconstruct_groups(
        groups, rig, payload.prune, payload.filter, payload.skip_smoothing, payload.single_pass,
        payload.interpolate_gaps, payload.baseline, settings.THREADS,
    )
    diagnostics = [
        DiagnosticOut(frame=frame, joint=joint, subset_bitmask=bitmask, cost_increment=cost)
        for frame, joint, bitmask, cost in result.diagnostics
    ]
    logger.info(f"Reconstructed {result.sequence.n_frames} frames from {len(rig)} cameras")
    return ReconstructResponse(sequence=io.pose_to_record(result.sequence), diagnostics=diagnostics)
