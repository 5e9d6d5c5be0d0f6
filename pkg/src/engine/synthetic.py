"""Seeded synthetic datasets and reference predictors."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import ConfigDict, Field, model_validator
from pydantic.dataclasses import dataclass

from src.config import settings
from src.engine.annotations import (
    DatasetManifest,
    HorizonConfig,
    VideoAnnotation,
    anomaly_interval_seconds,
    build_manifest,
)
from src.engine.top_core import ScoreMatrix, derive_seed, sliding_windows

logger = logging.getLogger(__name__)

PredictorKind = Literal["oracle", "constant", "random", "early_false_alarm", "noisy_decay"]


class ScenarioError(ValueError):
    """The scenario cannot produce valid videos."""


@dataclass(config=ConfigDict(extra="forbid"))
class ScenarioConfig:
    """Dataset statistics to simulate."""

    n_accident_videos: int = Field(default=10, ge=0)
    n_safe_videos: int = Field(default=10, ge=0)
    fps: float = Field(default=settings.fps, gt=0)
    horizon_steps: int = Field(default=settings.horizon_steps, ge=1)
    snippet_len: int = Field(default=settings.snippet_len, ge=1)
    video_len_frames: tuple[int, int] = (100, 200)
    anomaly_interval_seconds: tuple[float, float] = (0.5, 3.0)
    accident_margin_frames: int = Field(default=20, ge=0)
    seed: int = settings.seed

    @model_validator(mode="after")
    def _validate_ranges(self) -> "ScenarioConfig":
        for name in ("video_len_frames", "anomaly_interval_seconds"):
            low, high = getattr(self, name)
            if low < 0 or high < 0:
                raise ValueError(f"{name} must be non-negative, got ({low}, {high})")
            if low > high:
                raise ValueError(f"{name} is empty: {low} > {high}")
        if self.video_len_frames[0] < self.snippet_len:
            raise ValueError(
                f"videos must hold at least one {self.snippet_len}-frame snippet, "
                f"got minimum length {self.video_len_frames[0]}"
            )
        return self

    @property
    def horizon(self) -> HorizonConfig:
        return HorizonConfig(steps=self.horizon_steps, snippet_len=self.snippet_len, fps=self.fps)


@dataclass(config=ConfigDict(extra="forbid"))
class PredictorSpec:
    """Reference predictor producing TOP score matrices."""

    kind: PredictorKind = "oracle"
    constant: float = Field(default=0.0, ge=0.0, le=1.0)
    lead_seconds: float = Field(default=3.0, ge=0.0)
    spike_len: int = Field(default=5, ge=1)
    noise_sigma: float = Field(default=0.1, ge=0.0)
    gate_at_anomaly: bool = True
    seed: int = 0


def _interval_frame_range(cfg: ScenarioConfig) -> tuple[int, int]:
    low, high = cfg.anomaly_interval_seconds
    first = math.ceil(low * cfg.fps - 1e-9)
    last = math.floor(high * cfg.fps + 1e-9)
    if first > last:
        raise ScenarioError(
            f"interval range {cfg.anomaly_interval_seconds}s holds no whole frame count "
            f"at {cfg.fps} fps"
        )
    return first, last


def generate_dataset(cfg: ScenarioConfig) -> DatasetManifest:
    """Draw video lengths and event frames uniformly from the configured ranges."""
    min_len, max_len = cfg.video_len_frames
    min_interval, max_interval = _interval_frame_range(cfg)
    margin = max(cfg.accident_margin_frames, cfg.snippet_len - 1)
    if cfg.n_accident_videos and margin + max_interval > min_len - 1:
        raise ScenarioError(
            f"infeasible scenario: {margin} lead-in frames plus a {max_interval}-frame "
            f"interval do not fit in a {min_len}-frame video"
        )

    videos: list[VideoAnnotation] = []
    for index in range(cfg.n_accident_videos):
        video_id = f"accident_{index:04d}"
        rng = np.random.default_rng(derive_seed(cfg.seed, video_id))
        num_frames = int(rng.integers(min_len, max_len + 1))
        interval = int(rng.integers(min_interval, max_interval + 1))
        anomaly = int(rng.integers(margin, num_frames - 1 - interval + 1))
        accident = anomaly + interval
        videos.append(
            VideoAnnotation(
                video_id=video_id,
                fps=cfg.fps,
                num_frames=num_frames,
                anomaly_frame=anomaly,
                accident_frame=accident,
                accident_end_frame=min(num_frames - 1, accident + int(round(cfg.fps))),
            )
        )
    for index in range(cfg.n_safe_videos):
        video_id = f"safe_{index:04d}"
        rng = np.random.default_rng(derive_seed(cfg.seed, video_id))
        videos.append(
            VideoAnnotation(
                video_id=video_id,
                fps=cfg.fps,
                num_frames=int(rng.integers(min_len, max_len + 1)),
            )
        )
    logger.info(
        "Generated %s accident and %s safe videos (seed=%s)",
        cfg.n_accident_videos,
        cfg.n_safe_videos,
        cfg.seed,
    )
    return build_manifest(videos, cfg.horizon)


def _oracle(
    video: VideoAnnotation, frames: np.ndarray, targets: np.ndarray, gated: bool
) -> np.ndarray:
    values = np.zeros(targets.shape, dtype=np.float64)
    if not video.has_accident:
        return values
    hits = targets == video.accident_frame
    if gated:
        hits &= (frames >= video.anomaly_frame)[:, None]
    values[hits] = 1.0
    return values


def predict(
    spec: PredictorSpec, video: VideoAnnotation, horizon: HorizonConfig, stride: int = 1
) -> ScoreMatrix:
    """Score matrix of ``spec`` on ``video`` at every sliding-window end frame.

    The oracle puts a 1 at the step that lands on the accident frame. With
    ``gate_at_anomaly`` it stays silent before the anomaly onset, so it never alarms early;
    without it every row whose horizon reaches the accident is a perfect label match.
    noisy_decay ramps on the absolute distance |accident - t0 - i|, so steps past the
    accident decay symmetrically instead of saturating. Rows after the accident are zero.
    """
    frames = np.asarray(
        [window.end_frame for window in sliding_windows(video, horizon, stride)], dtype=np.int64
    )
    targets = frames[:, None] + np.arange(1, horizon.steps + 1)[None, :]
    rng = np.random.default_rng(derive_seed(spec.seed, f"{spec.kind}:{video.video_id}"))

    if spec.kind == "oracle":
        values = _oracle(video, frames, targets, spec.gate_at_anomaly)
    elif spec.kind == "constant":
        values = np.full(targets.shape, spec.constant, dtype=np.float64)
    elif spec.kind == "random":
        values = rng.random(targets.shape)
    elif spec.kind == "early_false_alarm":
        values = _oracle(video, frames, targets, spec.gate_at_anomaly)
        if video.has_accident:
            start = max(0, video.anomaly_frame - horizon.frames_for(spec.lead_seconds))
            values[(frames >= start) & (frames < start + spec.spike_len)] = 1.0
    else:
        values = np.zeros(targets.shape, dtype=np.float64)
        if video.has_accident:
            ramp = spec.lead_seconds * horizon.fps
            distance = np.abs(video.accident_frame - targets).astype(np.float64)
            if ramp > 0:
                values = np.maximum(0.0, 1.0 - distance / ramp)
            else:
                values = (distance == 0).astype(np.float64)
        values = values + rng.normal(0.0, spec.noise_sigma, size=targets.shape)

    if video.has_accident:
        values[frames > video.accident_frame] = 0.0
    return ScoreMatrix.from_arrays(video.video_id, frames, np.clip(values, 0.0, 1.0))


def generate_scores(
    manifest: DatasetManifest, spec: PredictorSpec, stride: int = 1, workers: int = 1
) -> dict[str, ScoreMatrix]:
    """``predict`` for every video, keyed by video_id."""
    videos = manifest.ordered()

    def run(video: VideoAnnotation) -> ScoreMatrix:
        return predict(spec, video, manifest.horizon, stride)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            matrices = list(executor.map(run, videos))
    else:
        matrices = [run(video) for video in videos]
    return {matrix.video_id: matrix for matrix in matrices}


def mean_anomaly_interval(manifest: DatasetManifest) -> float:
    """Mean anomaly-to-accident interval, the bound on achievable revised mean TTA."""
    intervals = [anomaly_interval_seconds(video) for video in manifest.accident_videos()]
    if not intervals:
        raise ValueError("dataset has no accident videos")
    return math.fsum(intervals) / len(intervals)


def _deep_merge(base: dict[str, Any], incoming: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in incoming.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_scenario(
    config_path: Optional[Path] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> tuple[ScenarioConfig, PredictorSpec]:
    """Read ``scenario`` and ``predictor`` sections from YAML, then apply overrides."""
    import yaml

    data: dict[str, Any] = {}
    if config_path is not None:
        with config_path.open("r", encoding="utf-8") as handle:
            loaded = yaml.safe_load(handle) or {}
        if not isinstance(loaded, dict):
            raise ScenarioError(f"{config_path}: top level must be a mapping")
        data = loaded

    if overrides:
        data = _deep_merge(data, overrides)

    unknown = set(data) - {"scenario", "predictor"}
    if unknown:
        raise ScenarioError(f"unknown scenario sections: {', '.join(sorted(unknown))}")
    scenario = ScenarioConfig(**(data.get("scenario") or {}))
    predictor = PredictorSpec(**(data.get("predictor") or {}))
    return scenario, predictor
