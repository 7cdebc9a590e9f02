import logging
import time

from fastapi import FastAPI
from fastapi.middleware.gzip import GZipMiddleware
from fastapi.responses import JSONResponse
from starlette.middleware.base import BaseHTTPMiddleware

from posecap.core.config import settings

logger = logging.getLogger(__name__)


class MaxBodySizeMiddleware(BaseHTTPMiddleware):
    """
    Reject upload bodies larger than ``max_size`` bytes before parsing them.

    Keypoint streams and pose sequences arrive as JSON, so an oversized
    capture is refused from its Content-Length alone.
    """
    def __init__(self, app, max_size: int):
        super().__init__(app)
        self.max_size = max_size

    async def dispatch(self, request, call_next):
        content_length = request.headers.get("content-length")
        if request.method == "POST" and content_length and int(content_length) > self.max_size:
            logger.warning(f"{request.url.path}: body of {content_length} bytes refused")
            return JSONResponse(
                status_code=413,
                content={"detail": f"Request body exceeds {self.max_size // (1024 * 1024)} MB"},
            )
        return await call_next(request)


class ProcessTimeMiddleware(BaseHTTPMiddleware):
    """Log every request with its elapsed time and set ``X-Process-Time-ms``."""

    async def dispatch(self, request, call_next):
        start = time.perf_counter()
        try:
            response = await call_next(request)
        except Exception:
            elapsed = (time.perf_counter() - start) * 1000
            logger.exception(f"{request.method} {request.url.path} failed after {elapsed:.2f}ms")
            raise
        elapsed = (time.perf_counter() - start) * 1000
        logger.info(f"{request.method} {request.url.path} -> {response.status_code} in {elapsed:.2f}ms")
        response.headers["X-Process-Time-ms"] = f"{elapsed:.2f}"
        return response


def apply_middlewares(app: FastAPI):
    """
    Apply middleware to the FastAPI application.

    Notes:
        - GZip for responses over 500 bytes (pose sequences compress well)
        - Body size limit from ``settings.MAX_BODY_MB``
        - Request timing, outermost so it covers the other two
    """
    app.add_middleware(GZipMiddleware, minimum_size=500)
    app.add_middleware(MaxBodySizeMiddleware, max_size=settings.MAX_BODY_MB * 1024 * 1024)
    app.add_middleware(ProcessTimeMiddleware)
