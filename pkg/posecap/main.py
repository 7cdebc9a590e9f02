import logging

from fastapi import FastAPI, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from posecap.api.v0 import api_router
from posecap.core.config import configure_logging, settings
from posecap.core.errors import FormatError, GapError, LengthError, PoseCapError, SpecError
from posecap.core.middleware import apply_middlewares

configure_logging()
logger = logging.getLogger(__name__)

_docs_enabled = settings.ENVIRONMENT != "production"

app = FastAPI(
    title=settings.APP_NAME,
    version=settings.APP_VERSION,
    description="Multi-view 3D human pose reconstruction, evaluation and statistics",
    docs_url="/docs" if _docs_enabled else None,
    redoc_url="/redoc" if _docs_enabled else None,
)

apply_middlewares(app)
app.include_router(api_router, prefix=settings.API_V0_STR)


@app.get("/", tags=["Health"])
def root():
    return {
        "app_name": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "endpoints": [route.path for route in api_router.routes],
        "docs_url": "/docs" if _docs_enabled else None,
    }


@app.get("/health", tags=["Health"])
def health_check():
    """
    Liveness probe plus the reconstruction defaults this instance runs with.

    Returns:
        dict: Status, version and the active filter / selection settings
    """
    return {
        "status": "healthy",
        "version": settings.APP_VERSION,
        "environment": settings.ENVIRONMENT,
        "sample_rate_hz": settings.SAMPLE_RATE_HZ,
        "filter": {"order": settings.FILTER_ORDER, "cutoff_hz": settings.FILTER_CUTOFF_HZ},
        "threads": settings.THREADS,
    }


def _error_context(exc: PoseCapError) -> dict:
    # where the failure happened, for errors that know it
    if isinstance(exc, GapError):
        return {"joint": exc.joint, "frame": exc.frame}
    if isinstance(exc, FormatError):
        return {"field": exc.field_path}
    if isinstance(exc, SpecError):
        return {"field": exc.field}
    if isinstance(exc, LengthError):
        return {"channel": exc.channel}
    return {}


@app.exception_handler(PoseCapError)
async def posecap_exception_handler(request: Request, exc: PoseCapError):
    """
    Map toolkit failures (bad input, degenerate geometry, gaps) to 422.

    Returns:
        JSONResponse: ``{"detail": message, "error": class name}`` plus the
        joint/frame, field or channel when the error carries one
    """
    logger.warning(f"{request.method} {request.url.path} rejected: {type(exc).__name__}: {exc}")
    context = {key: value for key, value in _error_context(exc).items() if value is not None}
    return JSONResponse(
        status_code=422,
        content={"detail": str(exc), "error": type(exc).__name__, **context},
    )


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    errors = jsonable_encoder(exc.errors())
    logger.info(f"{request.method} {request.url.path} invalid body: {len(errors)} error(s)")
    return JSONResponse(status_code=422, content={"detail": errors})
