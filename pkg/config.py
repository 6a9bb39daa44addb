import logging
import os
from pathlib import Path

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)


def _read(name, default, cast):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as e:
        raise ConfigError(f"{name}={raw!r} is not a valid value: {e}") from e


class Settings:
    """Runtime settings, read from the environment (and a local .env file)"""

    def __init__(self):
        self.seed = _read("MTL_SEED", 20240611, int)
        self.workers = _read("MTL_WORKERS", os.cpu_count() or 1, int)
        self.chunk_size = _read("MTL_CHUNK_SIZE", 1000, int)
        self.confidence = _read("MTL_CONFIDENCE", 0.95, float)
        self.out_dir = Path(_read("MTL_OUT_DIR", "results", str))
        self.timeset_tolerance = _read("MTL_TIMESET_TOLERANCE", 0.0, float)
        self.log_level = _read("MTL_LOG_LEVEL", "INFO", str).upper()
        self.api_host = _read("MTL_API_HOST", "0.0.0.0", str)
        self.api_port = _read("MTL_API_PORT", 8000, int)

        if self.workers < 1:
            raise ConfigError("MTL_WORKERS must be at least 1")
        if self.chunk_size < 1:
            raise ConfigError("MTL_CHUNK_SIZE must be at least 1")
        if not 0.0 < self.confidence < 1.0:
            raise ConfigError("MTL_CONFIDENCE must lie strictly between 0 and 1")
        if self.timeset_tolerance < 0.0:
            raise ConfigError("MTL_TIMESET_TOLERANCE must be non-negative")

    def as_dict(self):
        return {
            "seed": self.seed,
            "workers": self.workers,
            "chunk_size": self.chunk_size,
            "confidence": self.confidence,
            "out_dir": str(self.out_dir),
            "timeset_tolerance": self.timeset_tolerance,
            "log_level": self.log_level,
        }


def configure_logging(settings=None):
    settings = settings or get_settings()
    logging.basicConfig(
        level=getattr(logging, settings.log_level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


_settings = None


def get_settings(reload=False):
    """Cached settings; pass reload=True after changing the environment"""
    global _settings
    if _settings is None or reload:
        _settings = Settings()
        logger.debug("✅ Loaded settings from environment: %s", _settings.as_dict())
    return _settings
