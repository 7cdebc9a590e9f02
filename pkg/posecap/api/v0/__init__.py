"""
API v0 router module.

Collects the reconstruction, evaluation and statistics routers under one prefix.
"""
from fastapi import APIRouter

from posecap.api.v0 import evaluate, reconstruct, stats

api_router = APIRouter()

api_router.include_router(reconstruct.router, prefix="/reconstruct", tags=["reconstruct"])
api_router.include_router(evaluate.router, prefix="/evaluate", tags=["evaluate"])
api_router.include_router(stats.router, prefix="/stats", tags=["stats"])
