from fastapi import APIRouter

from posecap.core import io
from posecap.schemas.api import EvaluateRequest, EvaluateResponse
from posecap.services.metrics import evaluate_many

router = APIRouter(tags=["evaluate"])


@router.post("/", response_model=EvaluateResponse, summary="Mean error, MPJPE and PA-MPJPE per joint")
def evaluate(payload: EvaluateRequest):
    pairs = [(pair.name, io.pose_from_record(pair.pred), io.pose_from_record(pair.gt)) for pair in payload.pairs]
    return EvaluateResponse(rows=evaluate_many(pairs))
