"""Tests for configuration module."""
import os
from pathlib import Path
from unittest.mock import patch

from src.config import Settings, settings


def test_settings_defaults() -> None:
    settings_obj = Settings(_env_file=None)
    assert settings_obj.default_lambda == 0.1
    assert settings_obj.horizon_steps == 20
    assert settings_obj.snippet_len == 5
    assert settings_obj.fps == 10.0
    assert settings_obj.w_plus == 10.0
    assert settings_obj.report_decimals == 6


def test_settings_override() -> None:
    settings_obj = Settings(_env_file=None, default_lambda=0.05, seed=3)
    assert settings_obj.default_lambda == 0.05
    assert settings_obj.seed == 3


def test_output_dir_from_environment() -> None:
    with patch.dict(os.environ, {"TOP_EVAL_OUTPUT_DIR": "/tmp/top-runs"}):
        assert Settings(_env_file=None).output_dir == Path("/tmp/top-runs")


def test_env_file_configuration(tmp_path: Path) -> None:
    env_file = tmp_path / ".env"
    env_file.write_text("TOP_EVAL_WORKERS=4\n", encoding="utf-8")
    assert Settings(_env_file=str(env_file)).workers == 4


def test_global_settings_instantiated() -> None:
    assert isinstance(settings, Settings)
    assert settings.model_config.get("env_prefix") == "TOP_EVAL_"
