"""Temporal annotations and dataset manifests.

Frame indices are 0-based and inclusive. Every second-valued quantity is derived from
frame indices through the dataset fps, so labels never accumulate float drift.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError


class ManifestError(ValueError):
    """A manifest failed schema or invariant validation."""

    def __init__(self, message: str, video_id: Optional[str] = None):
        self.video_id = video_id
        self.rule = message
        super().__init__(f"video '{video_id}': {message}" if video_id else message)


@dataclass(frozen=True)
class HorizonConfig:
    """Shared prediction horizon: T steps of one frame each, snippets of S frames."""

    steps: int = 20
    snippet_len: int = 5
    fps: float = 10.0

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ManifestError(f"horizon T must be >= 1, got {self.steps}")
        if self.snippet_len < 1:
            raise ManifestError(f"snippet_len must be >= 1, got {self.snippet_len}")
        if not self.fps > 0:
            raise ManifestError(f"fps must be > 0, got {self.fps}")

    @property
    def step_seconds(self) -> float:
        return 1.0 / self.fps

    @property
    def horizon_seconds(self) -> float:
        return self.steps / self.fps

    def frames_for(self, seconds: float) -> int:
        """Whole number of frames spanning ``seconds``."""
        return int(round(seconds * self.fps))


@dataclass(frozen=True)
class VideoAnnotation:
    video_id: str
    fps: float
    num_frames: int
    anomaly_frame: Optional[int] = None
    accident_frame: Optional[int] = None
    accident_end_frame: Optional[int] = None

    @property
    def has_accident(self) -> bool:
        return self.accident_frame is not None

    @property
    def duration_seconds(self) -> float:
        return self.num_frames / self.fps


def validate_annotation(annotation: VideoAnnotation) -> list[str]:
    """Return every broken invariant of ``annotation`` (empty when valid)."""
    errors: list[str] = []
    if not annotation.fps > 0:
        errors.append(f"fps must be > 0, got {annotation.fps}")
    if annotation.num_frames < 1:
        errors.append(f"num_frames must be >= 1, got {annotation.num_frames}")

    anomaly = annotation.anomaly_frame
    accident = annotation.accident_frame
    end = annotation.accident_end_frame

    if accident is None:
        if anomaly is not None:
            errors.append("anomaly_frame set on an accident-free video")
        if end is not None:
            errors.append("accident_end_frame set on an accident-free video")
        return errors

    if anomaly is None:
        errors.append("accident_frame requires anomaly_frame")
    elif anomaly < 0:
        errors.append("anomaly_frame < 0")
    elif anomaly > accident:
        errors.append("anomaly_frame > accident_frame")

    if end is not None and accident > end:
        errors.append("accident_frame > accident_end_frame")

    last_event = end if end is not None else accident
    if last_event >= annotation.num_frames:
        name = "accident_end_frame" if end is not None else "accident_frame"
        errors.append(f"{name} >= num_frames")
    return errors


def anomaly_interval_seconds(annotation: VideoAnnotation) -> float:
    """Seconds between anomaly onset and accident occurrence."""
    if not annotation.has_accident or annotation.anomaly_frame is None:
        raise ValueError(f"video '{annotation.video_id}' is accident-free")
    return (annotation.accident_frame - annotation.anomaly_frame) / annotation.fps


@dataclass(frozen=True)
class DatasetManifest:
    videos: tuple[VideoAnnotation, ...]
    horizon: HorizonConfig

    @property
    def fps(self) -> float:
        return self.horizon.fps

    @cached_property
    def _by_id(self) -> dict[str, VideoAnnotation]:
        return {video.video_id: video for video in self.videos}

    def video(self, video_id: str) -> VideoAnnotation:
        return self._by_id[video_id]

    def ordered(self) -> list[VideoAnnotation]:
        """Videos in the fixed reduction order (by video_id)."""
        return sorted(self.videos, key=lambda video: video.video_id)

    def accident_videos(self) -> list[VideoAnnotation]:
        return [video for video in self.ordered() if video.has_accident]

    def safe_videos(self) -> list[VideoAnnotation]:
        return [video for video in self.ordered() if not video.has_accident]


def build_manifest(
    videos: Iterable[VideoAnnotation], horizon: HorizonConfig
) -> DatasetManifest:
    """Assemble a manifest, rejecting duplicates, mixed fps and broken invariants."""
    videos = tuple(videos)
    seen: set[str] = set()
    for video in videos:
        if video.video_id in seen:
            raise ManifestError("duplicate video_id", video.video_id)
        seen.add(video.video_id)
        if video.fps != horizon.fps:
            raise ManifestError(
                f"mixed fps: video has {video.fps}, dataset has {horizon.fps}",
                video.video_id,
            )
        errors = validate_annotation(video)
        if errors:
            raise ManifestError("; ".join(errors), video.video_id)
    return DatasetManifest(videos=videos, horizon=horizon)


class _HorizonDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, populate_by_name=True)

    steps: int = Field(alias="T")
    snippet_len: int


class _VideoDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, populate_by_name=True)

    video_id: str = Field(alias="id")
    num_frames: int
    anomaly_frame: Optional[int] = None
    accident_frame: Optional[int] = None
    accident_end_frame: Optional[int] = None


class _ManifestDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)

    fps: float
    horizon: _HorizonDocument
    videos: list[_VideoDocument]


def _schema_error(exc: ValidationError, raw: Any) -> ManifestError:
    error = exc.errors()[0]
    loc = error.get("loc", ())
    location = ".".join(str(part) for part in loc) or "<root>"
    video_id = None
    if len(loc) >= 2 and loc[0] == "videos" and isinstance(loc[1], int):
        try:
            candidate = raw["videos"][loc[1]].get("id")
        except (KeyError, IndexError, TypeError, AttributeError):
            candidate = None
        if isinstance(candidate, str):
            video_id = candidate
    return ManifestError(f"schema violation at {location}: {error.get('msg')}", video_id)


def parse_manifest(text: str) -> DatasetManifest:
    """Parse and validate a manifest JSON document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed JSON: {exc}") from exc

    try:
        document = _ManifestDocument.model_validate(raw)
    except ValidationError as exc:
        raise _schema_error(exc, raw) from exc

    horizon = HorizonConfig(
        steps=document.horizon.steps,
        snippet_len=document.horizon.snippet_len,
        fps=document.fps,
    )
    videos = [
        VideoAnnotation(
            video_id=video.video_id,
            fps=document.fps,
            num_frames=video.num_frames,
            anomaly_frame=video.anomaly_frame,
            accident_frame=video.accident_frame,
            accident_end_frame=video.accident_end_frame,
        )
        for video in document.videos
    ]
    return build_manifest(videos, horizon)


def serialize_manifest(manifest: DatasetManifest) -> str:
    """Render ``manifest`` as the JSON document ``parse_manifest`` reads."""
    payload = {
        "fps": manifest.fps,
        "horizon": {"T": manifest.horizon.steps, "snippet_len": manifest.horizon.snippet_len},
        "videos": [
            {
                "id": video.video_id,
                "num_frames": video.num_frames,
                "anomaly_frame": video.anomaly_frame,
                "accident_frame": video.accident_frame,
                "accident_end_frame": video.accident_end_frame,
            }
            for video in manifest.videos
        ],
    }
    return json.dumps(payload, indent=2) + "\n"
