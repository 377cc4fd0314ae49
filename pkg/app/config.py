"""
Application configuration using pydantic-settings.
Loads settings from MTL_* environment variables, a .env file, or a key=value
file passed with --config.
"""

import os
from pathlib import Path

from dotenv import dotenv_values
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Laboratory settings loaded from environment variables."""

    # Cache Configuration
    cache_dir: str = "./data/cache"

    # Table Configuration
    default_n_max: int = 1_000_000
    memory_budget_mb: int = 2048
    segment_threshold: int = 2**27
    segment_size: int = 2**22

    # Worker Configuration
    threads: int = 0

    # Logging Configuration
    log_level: str = "INFO"
    log_file: str = "logs/lab.log"

    # Series Configuration
    laurent_order: int = 12
    stieltjes_cutoff: int = 10
    stieltjes_depth: int = 10

    # Special Function Configuration
    zeta_em_depth: int = 8
    zeta_em_min_cutoff: int = 20
    digamma_cutoff: int = 20
    quad_limit: int = 400

    model_config = {
        "env_prefix": "MTL_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": False,
        "extra": "ignore",
    }

    @property
    def cache_path(self) -> Path:
        path = Path(self.cache_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @property
    def worker_count(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)


def load_settings(config_file: str | Path | None = None) -> Settings:
    """Build settings, layering a plain key=value file under the environment.

    File keys may omit the MTL_ prefix; environment variables still win.
    """
    if config_file is None:
        return Settings()
    overrides = {}
    for key, value in dotenv_values(config_file).items():
        name = key.lower().removeprefix("mtl_")
        if name in Settings.model_fields and f"MTL_{name.upper()}" not in os.environ:
            overrides[name] = value
    return Settings(**overrides)


def apply_settings(source: Settings) -> None:
    """Copy every field of source onto the shared settings instance."""
    for name in Settings.model_fields:
        setattr(settings, name, getattr(source, name))


# Singleton settings instance
settings = Settings()
