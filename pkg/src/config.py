"""Application configuration."""
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Harness defaults loaded from environment variables (prefix ``TOP_EVAL_``)."""

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="TOP_EVAL_"
    )

    # Outputs
    output_dir: Path = Path("./runs")
    report_decimals: int = 6

    # Protocol
    default_lambda: float = 0.1
    horizon_steps: int = 20
    snippet_len: int = 5
    fps: float = 10.0
    w_plus: float = 10.0
    stride: int = 1

    # Reproducibility
    seed: int = 0
    samples_per_video: int = 8

    # Runtime
    workers: int = 1
    log_level: str = "WARNING"


settings = Settings()
