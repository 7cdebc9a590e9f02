import logging
from typing import Tuple

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Toolkit settings loaded from environment variables with fallbacks.

    Settings are loaded from environment variables (prefixed with ``POSECAP_``),
    a ``.env`` file, or the defaults defined here. Run-level configs
    (prune, filter, synthetic specs) take their defaults from this object.
    """
    # ─── App Metadata ────────────────────────────────────────────────────────
    APP_NAME: str = Field("posecap", description="Application name")
    APP_VERSION: str = Field("0.1.0", description="Application version")
    ENVIRONMENT: str = Field("development", description="development or production")
    PORT: int = Field(8080, description="HTTP port of the API service")
    API_V0_STR: str = Field("/api/v0", description="API prefix")
    MAX_BODY_MB: int = Field(64, description="Largest accepted JSON request body")

    # ─── Logging ───────────────────────────────────────────────────────────────
    LOG_LEVEL: str = Field("INFO", description="Root log level")

    # ─── Runs ─────────────────────────────────────────────────────────────────
    SEED: int = Field(0, description="Default seed for every random draw")
    THREADS: int = Field(1, ge=1, description="Worker threads for per-joint selection")
    SAMPLE_RATE_HZ: float = Field(90.0, gt=0, description="Capture rate of the rig")
    DEFAULT_IMAGE_SIZE: Tuple[int, int] = Field((1920, 1200), description="Sensor size in pixels")

    # ─── Trajectory selection ─────────────────────────────────────────────────
    PRUNE_CONFIDENCE_THRESHOLD: float = Field(0.5, ge=0.0, le=1.0)
    PRUNE_MAX_REMOVED: int = Field(2, ge=0)
    MAX_GAP_FRAMES: int = Field(5, ge=1, description="Longest interpolated dropout")

    # ─── Smoothing ────────────────────────────────────────────────────────────
    FILTER_ORDER: int = Field(4)
    FILTER_CUTOFF_HZ: float = Field(6.0, gt=0)

    # ─── Optimisation ─────────────────────────────────────────────────────────
    LM_MAX_ITERATIONS: int = Field(200, ge=0)
    LM_INITIAL_DAMPING: float = Field(1e-3, gt=0)
    LM_RELATIVE_TOLERANCE: float = Field(1e-12, gt=0)
    TRIANGULATION_CONDITION_LIMIT: float = Field(1e8, gt=0)
    UNDISTORT_ITERATIONS: int = Field(10, ge=1)

    model_config = SettingsConfigDict(
        env_prefix="POSECAP_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


# instantiate
settings = Settings()


def configure_logging(level: str | None = None) -> None:
    """
    Configure the root logger once for the CLI and the HTTP service.

    Args:
        level: Log level name; falls back to ``settings.LOG_LEVEL``
    """
    name = (level or settings.LOG_LEVEL or "INFO").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s | %(name)s | %(levelname)s | %(message)s",
        force=True,
    )
