"""Shared fixtures: small hand-built manifests and score matrices."""
from __future__ import annotations

import pytest

from src.engine.annotations import DatasetManifest, HorizonConfig, VideoAnnotation, build_manifest

HORIZON = HorizonConfig(steps=20, snippet_len=5, fps=10.0)


def accident_video(
    video_id: str = "v1",
    num_frames: int = 100,
    anomaly: int = 50,
    accident: int = 80,
    accident_end: int | None = None,
) -> VideoAnnotation:
    return VideoAnnotation(
        video_id=video_id,
        fps=10.0,
        num_frames=num_frames,
        anomaly_frame=anomaly,
        accident_frame=accident,
        accident_end_frame=accident_end,
    )


def safe_video(video_id: str = "n1", num_frames: int = 60) -> VideoAnnotation:
    return VideoAnnotation(video_id=video_id, fps=10.0, num_frames=num_frames)


@pytest.fixture
def horizon() -> HorizonConfig:
    return HORIZON


@pytest.fixture
def small_manifest() -> DatasetManifest:
    """One accident video (anomaly 50, accident 80) and one accident-free video."""
    return build_manifest([accident_video(), safe_video()], HORIZON)
