"""Tests for annotations and manifest parsing."""
import json

import pytest

from src.engine.annotations import (
    HorizonConfig,
    ManifestError,
    VideoAnnotation,
    anomaly_interval_seconds,
    build_manifest,
    parse_manifest,
    serialize_manifest,
    validate_annotation,
)
from tests.conftest import HORIZON, accident_video, safe_video


def _document(*videos: dict, fps: float = 10.0) -> str:
    return json.dumps({"fps": fps, "horizon": {"T": 20, "snippet_len": 5}, "videos": list(videos)})


def test_parse_manifest_accident_video() -> None:
    manifest = parse_manifest(
        _document({"id": "v1", "num_frames": 100, "anomaly_frame": 50, "accident_frame": 80})
    )
    assert len(manifest.videos) == 1
    video = manifest.video("v1")
    assert video.has_accident
    assert video.fps == 10.0
    assert manifest.horizon == HorizonConfig(steps=20, snippet_len=5, fps=10.0)


def test_parse_manifest_accident_free_video() -> None:
    manifest = parse_manifest(_document({"id": "n1", "num_frames": 60}))
    assert manifest.accident_videos() == []
    assert [video.video_id for video in manifest.safe_videos()] == ["n1"]


def test_parse_manifest_rejects_anomaly_after_accident() -> None:
    with pytest.raises(ManifestError) as excinfo:
        parse_manifest(
            _document({"id": "bad", "num_frames": 100, "anomaly_frame": 90, "accident_frame": 80})
        )
    assert excinfo.value.video_id == "bad"
    assert "anomaly_frame > accident_frame" in str(excinfo.value)


def test_parse_manifest_rejects_malformed_json() -> None:
    with pytest.raises(ManifestError, match="malformed JSON"):
        parse_manifest("{not json")


def test_parse_manifest_rejects_unknown_field_naming_the_video() -> None:
    with pytest.raises(ManifestError) as excinfo:
        parse_manifest(_document({"id": "v9", "num_frames": 10, "colour": "red"}))
    assert excinfo.value.video_id == "v9"


def test_parse_manifest_rejects_duplicate_ids() -> None:
    with pytest.raises(ManifestError, match="duplicate video_id"):
        parse_manifest(_document({"id": "a", "num_frames": 10}, {"id": "a", "num_frames": 12}))


def test_build_manifest_rejects_mixed_fps() -> None:
    odd = VideoAnnotation(video_id="odd", fps=30.0, num_frames=10)
    with pytest.raises(ManifestError, match="mixed fps"):
        build_manifest([safe_video(), odd], HORIZON)


def test_validate_annotation_collects_every_violation() -> None:
    broken = VideoAnnotation(
        video_id="x", fps=10.0, num_frames=50, anomaly_frame=60, accident_frame=55,
        accident_end_frame=52,
    )
    errors = validate_annotation(broken)
    assert "anomaly_frame > accident_frame" in errors
    assert "accident_frame > accident_end_frame" in errors
    assert "accident_end_frame >= num_frames" in errors


def test_validate_annotation_events_on_safe_video() -> None:
    video = VideoAnnotation(video_id="s", fps=10.0, num_frames=50, anomaly_frame=3)
    assert validate_annotation(video) == ["anomaly_frame set on an accident-free video"]


def test_validate_annotation_accepts_valid_video() -> None:
    assert validate_annotation(accident_video(accident_end=90)) == []


@pytest.mark.parametrize(
    ("anomaly", "accident", "expected"),
    [(50, 80, 3.0), (80, 80, 0.0), (12, 31, 1.9)],
)
def test_anomaly_interval_seconds(anomaly: int, accident: int, expected: float) -> None:
    video = accident_video(anomaly=anomaly, accident=accident)
    assert anomaly_interval_seconds(video) == pytest.approx(expected)


def test_anomaly_interval_seconds_rejects_safe_video() -> None:
    with pytest.raises(ValueError):
        anomaly_interval_seconds(safe_video())


def test_horizon_config_derived_quantities() -> None:
    assert HORIZON.horizon_seconds == pytest.approx(2.0)
    assert HORIZON.step_seconds == pytest.approx(0.1)
    assert HORIZON.frames_for(4.0) == 40


def test_horizon_config_rejects_empty_horizon() -> None:
    with pytest.raises(ManifestError):
        HorizonConfig(steps=0)


def test_manifest_orders_videos_by_id() -> None:
    manifest = build_manifest(
        [safe_video("z"), accident_video("b"), safe_video("a")], HORIZON
    )
    assert [video.video_id for video in manifest.ordered()] == ["a", "b", "z"]


def test_serialize_manifest_reparses_to_equal_manifest() -> None:
    manifest = build_manifest([accident_video(accident_end=90), safe_video()], HORIZON)
    assert parse_manifest(serialize_manifest(manifest)) == manifest
