"""FAR-constrained anticipation metrics: truncated AUC, per-horizon AUC, mAUC and TTA."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np
from sklearn.metrics import roc_curve

from src.engine.annotations import DatasetManifest, VideoAnnotation, anomaly_interval_seconds
from src.engine.top_core import ScoreMatrix, derive_seed

logger = logging.getLogger(__name__)

INTERVAL_OFFSETS: tuple[float, ...] = (0.5, 1.0, 1.5)
CLIP_SECONDS = 0.5
MAIN_HORIZON = "0.0s"
FAR_TOLERANCE = 1e-9


class MissingScoresError(ValueError):
    """A manifest video has no score matrix."""

    def __init__(self, video_id: str):
        self.video_id = video_id
        super().__init__(f"no scores for video '{video_id}'")


class NoIntervalPositivesError(ValueError):
    """No accident video admits a positive clip at the requested offset."""

    def __init__(self, offset: float):
        self.offset = offset
        super().__init__(f"no accident video admits a positive clip at {horizon_label(offset)}")


class TtaMode(str, Enum):
    REVISED = "revised"
    LEGACY = "legacy"


def horizon_label(offset: float) -> str:
    return f"{offset:.1f}s"


@dataclass(frozen=True)
class RocCurve:
    """ROC vertices ordered by descending threshold, from (0, 0) to (1, 1)."""

    thresholds: tuple[float, ...]
    fpr: tuple[float, ...]
    tpr: tuple[float, ...]

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr, self.tpr))

    def rows(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds, self.fpr, self.tpr))


@dataclass(frozen=True)
class MetricsReport:
    lam: float
    auc: float
    auc_0_5s: float
    auc_1_0s: float
    auc_1_5s: float
    mauc: float
    operating_threshold: float
    far_at_threshold: float
    mtta_revised: float
    mtta_legacy: float
    false_alarms_per_minute: float
    positive_count: int
    negative_count: int
    mtta_upper_bound: float = 0.0
    video_count: int = 0
    seed: int = 0
    horizon_positive_counts: dict[str, int] = field(default_factory=dict)

    def to_payload(self, decimals: int = 6, include_legacy: bool = True) -> dict[str, Any]:
        def number(value: float) -> Optional[float]:
            if not math.isfinite(value):
                return None
            return round(value, decimals)

        payload: dict[str, Any] = {
            "lambda": number(self.lam),
            "auc": number(self.auc),
            "auc_0_5s": number(self.auc_0_5s),
            "auc_1_0s": number(self.auc_1_0s),
            "auc_1_5s": number(self.auc_1_5s),
            "mauc": number(self.mauc),
            "operating_threshold": number(self.operating_threshold),
            "far_at_threshold": number(self.far_at_threshold),
            "mtta_revised": number(self.mtta_revised),
            "mtta_legacy": number(self.mtta_legacy) if include_legacy else None,
            "mtta_upper_bound": number(self.mtta_upper_bound),
            "false_alarms_per_minute": number(self.false_alarms_per_minute),
            "positive_count": self.positive_count,
            "negative_count": self.negative_count,
            "horizon_positive_counts": dict(sorted(self.horizon_positive_counts.items())),
            "video_count": self.video_count,
            "seed": self.seed,
        }
        return payload


def _matrix_for(scores: Mapping[str, ScoreMatrix], video: VideoAnnotation) -> ScoreMatrix:
    matrix = scores.get(video.video_id)
    if matrix is None:
        raise MissingScoresError(video.video_id)
    return matrix


def segment_score(matrix: ScoreMatrix, first: int, last: int) -> float:
    """Max over frames in [first, last] of max over the horizon; 0 when no rows."""
    if first < 0 or first > last:
        raise ValueError(f"invalid segment [{first}, {last}] for '{matrix.video_id}'")
    _, peaks = matrix.window(first, last)
    if not peaks.size:
        return 0.0
    return float(peaks.max())


def negative_segment(video: VideoAnnotation) -> Optional[tuple[int, int]]:
    """Frames that count as negative: pre-anomaly region, or the whole safe video."""
    if not video.has_accident:
        return 0, video.num_frames - 1
    if video.anomaly_frame == 0:
        return None
    return 0, video.anomaly_frame - 1


def main_samples(
    manifest: DatasetManifest, scores: Mapping[str, ScoreMatrix]
) -> tuple[list[float], list[float]]:
    """One positive per accident video, one negative per pre-anomaly region and safe video."""
    positives: list[float] = []
    negatives: list[float] = []
    for video in manifest.ordered():
        matrix = _matrix_for(scores, video)
        if video.has_accident:
            positives.append(segment_score(matrix, video.anomaly_frame, video.accident_frame))
        segment = negative_segment(video)
        if segment is not None:
            negatives.append(segment_score(matrix, *segment))
    return positives, negatives


def build_roc(positives: Sequence[float], negatives: Sequence[float]) -> RocCurve:
    """One vertex per unique score; tied positives and negatives move together."""
    if not len(positives) or not len(negatives):
        raise ValueError("ROC needs at least one positive and one negative sample")
    y_true = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    y_score = np.concatenate(
        [np.asarray(positives, dtype=np.float64), np.asarray(negatives, dtype=np.float64)]
    )
    fpr, tpr, thresholds = roc_curve(y_true, y_score, drop_intermediate=False)
    thresholds = thresholds.astype(np.float64)
    thresholds[0] = math.inf
    return RocCurve(
        thresholds=tuple(float(t) for t in thresholds),
        fpr=tuple(float(f) for f in fpr),
        tpr=tuple(float(t) for t in tpr),
    )


def truncated_auc(curve: RocCurve, lam: float) -> float:
    """Mean TPR over FPR in [0, lam], cutting the crossing segment at lam exactly."""
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must be in (0, 1], got {lam}")
    area = 0.0
    points = curve.points
    for (f0, t0), (f1, t1) in zip(points, points[1:]):
        if f0 >= lam:
            break
        if f1 > lam:
            t1 = t0 + (t1 - t0) * (lam - f0) / (f1 - f0)
            f1 = lam
        area += (f1 - f0) * (t0 + t1) / 2.0
    return min(1.0, max(0.0, area / lam))


def interval_clip(
    video: VideoAnnotation, offset: float, fps: float
) -> Optional[tuple[int, int]]:
    """The 0.5 s positive clip ending ``offset`` seconds before the accident.

    None when the clip would start before frame 0 or before the anomaly onset.
    """
    start = video.accident_frame - int(round((offset + CLIP_SECONDS) * fps))
    end = video.accident_frame - int(round(offset * fps)) - 1
    if start < 0 or start < video.anomaly_frame or end < start:
        return None
    return start, end


def _negative_clip_pool(
    manifest: DatasetManifest, clip_len: int
) -> list[tuple[VideoAnnotation, int]]:
    """(video, number of clip starts) for every video able to host a negative clip."""
    pool = [
        (video, video.num_frames - clip_len + 1)
        for video in manifest.safe_videos()
        if video.num_frames >= clip_len
    ]
    if pool:
        return pool
    return [
        (video, video.anomaly_frame - clip_len + 1)
        for video in manifest.accident_videos()
        if video.anomaly_frame >= clip_len
    ]


def interval_samples(
    manifest: DatasetManifest,
    scores: Mapping[str, ScoreMatrix],
    offset: float,
    seed: int = 0,
) -> tuple[list[float], list[float]]:
    """Positive clips ``offset`` seconds before each accident and as many negative clips."""
    fps = manifest.fps
    positives: list[float] = []
    for video in manifest.accident_videos():
        clip = interval_clip(video, offset, fps)
        if clip is None:
            continue
        positives.append(segment_score(_matrix_for(scores, video), *clip))
    if not positives:
        raise NoIntervalPositivesError(offset)

    clip_len = int(round(CLIP_SECONDS * fps))
    pool = _negative_clip_pool(manifest, clip_len)
    if not pool:
        raise ValueError(f"no source of {clip_len}-frame negative clips")

    cumulative = np.cumsum([starts for _, starts in pool])
    rng = np.random.default_rng(derive_seed(seed, f"interval-negatives:{horizon_label(offset)}"))
    picks = rng.integers(0, int(cumulative[-1]), size=len(positives))
    negatives: list[float] = []
    for pick in picks:
        index = int(np.searchsorted(cumulative, pick, side="right"))
        video, _ = pool[index]
        start = int(pick) - (int(cumulative[index - 1]) if index else 0)
        negatives.append(
            segment_score(_matrix_for(scores, video), start, start + clip_len - 1)
        )
    return positives, negatives


def mauc(auc_05: float, auc_10: float, auc_15: float) -> float:
    return (auc_05 + auc_10 + auc_15) / 3.0


def far_at(negatives: Sequence[float], tau: float) -> float:
    values = np.asarray(negatives, dtype=np.float64)
    if not values.size:
        raise ValueError("FAR needs at least one negative sample")
    return float(np.count_nonzero(values >= tau)) / values.size


def operating_threshold(
    negatives: Sequence[float], lam: float, candidates: Iterable[float] = ()
) -> float:
    """Smallest candidate threshold whose FAR over ``negatives`` stays within ``lam``.

    Candidates are the positive negative scores, any extra positive ``candidates`` and +inf.
    A threshold of 0 alarms on every frame and is never an operating point.
    """
    values = np.sort(np.asarray(negatives, dtype=np.float64))
    if not values.size:
        raise ValueError("operating threshold needs at least one negative sample")
    pool = np.unique(np.concatenate([values, np.asarray(list(candidates), dtype=np.float64)]))
    pool = pool[pool > 0.0]
    firing = values.size - np.searchsorted(values, pool, side="left")
    admissible = pool[firing <= lam * values.size + FAR_TOLERANCE]
    if not admissible.size:
        return math.inf
    return float(admissible[0])


def threshold_candidates(
    manifest: DatasetManifest, scores: Mapping[str, ScoreMatrix]
) -> np.ndarray:
    """Every per-frame peak inside accident videos up to the accident frame."""
    peaks = [
        _matrix_for(scores, video).window(0, video.accident_frame)[1]
        for video in manifest.accident_videos()
    ]
    if not peaks:
        return np.zeros(0, dtype=np.float64)
    return np.unique(np.concatenate(peaks))


def tta(
    matrix: ScoreMatrix, video: VideoAnnotation, tau: float, mode: TtaMode = TtaMode.REVISED
) -> float:
    """Seconds from the first qualifying alarm to the accident; 0 on a miss.

    Revised mode only accepts alarms at or after the anomaly onset.
    """
    if not video.has_accident:
        raise ValueError(f"video '{video.video_id}' is accident-free; TTA is undefined")
    first = video.anomaly_frame if TtaMode(mode) is TtaMode.REVISED else 0
    frames, peaks = matrix.window(first, video.accident_frame)
    hits = np.flatnonzero(peaks >= tau)
    if not hits.size:
        return 0.0
    return (video.accident_frame - int(frames[hits[0]])) / video.fps


def per_video_tta(
    manifest: DatasetManifest,
    scores: Mapping[str, ScoreMatrix],
    tau: float,
    mode: TtaMode,
    workers: int = 1,
) -> list[tuple[str, float]]:
    """(video_id, TTA) for every accident video in video_id order."""
    videos = manifest.accident_videos()
    matrices = [_matrix_for(scores, video) for video in videos]

    def run(pair: tuple[ScoreMatrix, VideoAnnotation]) -> float:
        return tta(pair[0], pair[1], tau, mode)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            values = list(executor.map(run, zip(matrices, videos)))
    else:
        values = [run(pair) for pair in zip(matrices, videos)]
    return [(video.video_id, value) for video, value in zip(videos, values)]


def _mean(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    return math.fsum(values) / len(values)


def operating_point(
    manifest: DatasetManifest, scores: Mapping[str, ScoreMatrix], lam: float
) -> float:
    """tau* for ``lam`` over the main negatives."""
    _, negatives = main_samples(manifest, scores)
    return operating_threshold(negatives, lam, threshold_candidates(manifest, scores))


def mtta(
    manifest: DatasetManifest,
    scores: Mapping[str, ScoreMatrix],
    lam: float,
    mode: TtaMode = TtaMode.REVISED,
    workers: int = 1,
) -> float:
    """Mean TTA over all accident videos at the most sensitive threshold with FAR <= lam."""
    if not manifest.accident_videos():
        raise ValueError("mTTA needs at least one accident video")
    tau = operating_point(manifest, scores, lam)
    return _mean([value for _, value in per_video_tta(manifest, scores, tau, mode, workers)])


def false_alarms_per_minute(
    manifest: DatasetManifest, scores: Mapping[str, ScoreMatrix], tau: float
) -> float:
    """Alarm events per minute of negative footage.

    An event is a maximal run of consecutive alarming frames. Absent frames do not alarm,
    so a gap between two present rows ends the run.
    """
    events = 0
    negative_frames = 0
    for video in manifest.ordered():
        segment = negative_segment(video)
        if segment is None:
            continue
        first, last = segment
        negative_frames += last - first + 1
        frames, peaks = _matrix_for(scores, video).window(first, last)
        alarms = peaks >= tau
        if alarms.size:
            adjacent = np.diff(frames) == 1
            continued = alarms[:-1] & adjacent
            events += int(alarms[0]) + int(np.count_nonzero(alarms[1:] & ~continued))
    if negative_frames == 0:
        raise ValueError("no negative footage to measure false alarms on")
    return events / (negative_frames / manifest.fps / 60.0)


def roc_curves(
    manifest: DatasetManifest, scores: Mapping[str, ScoreMatrix], seed: int = 0
) -> dict[str, RocCurve]:
    """Main (0.0 s) curve plus one curve per pre-accident interval.

    An interval no accident video can host a positive clip for gets no curve.
    """
    positives, negatives = main_samples(manifest, scores)
    curves = {MAIN_HORIZON: build_roc(positives, negatives)}
    for offset in INTERVAL_OFFSETS:
        try:
            samples = interval_samples(manifest, scores, offset, seed)
        except NoIntervalPositivesError as exc:
            logger.warning("Skipping the %s ROC curve: %s", horizon_label(offset), exc)
            continue
        curves[horizon_label(offset)] = build_roc(*samples)
    return curves


def _horizon_auc(curves: Mapping[str, RocCurve], offset: float, lam: float) -> float:
    curve = curves.get(horizon_label(offset))
    if curve is None:
        return math.nan
    return truncated_auc(curve, lam)


def _defined_mauc(per_horizon: Sequence[float]) -> float:
    """mAUC over the intervals that have a curve; NaN when none has."""
    defined = [value for value in per_horizon if not math.isnan(value)]
    if len(defined) == len(per_horizon):
        return mauc(*per_horizon)
    if not defined:
        return math.nan
    logger.warning(
        "mAUC averages %s of %s intervals; the others have no positive clips",
        len(defined),
        len(per_horizon),
    )
    return math.fsum(defined) / len(defined)


def evaluate(
    manifest: DatasetManifest,
    scores: Mapping[str, ScoreMatrix],
    lam: float,
    seed: int = 0,
    workers: int = 1,
    curves: Optional[Mapping[str, RocCurve]] = None,
) -> MetricsReport:
    """Full FAR-constrained protocol for one bound ``lam``."""
    if not manifest.accident_videos():
        raise ValueError("evaluation needs at least one accident video")
    positives, negatives = main_samples(manifest, scores)
    curves = curves or roc_curves(manifest, scores, seed)
    horizon_counts = {
        horizon_label(offset): sum(
            interval_clip(video, offset, manifest.fps) is not None
            for video in manifest.accident_videos()
        )
        for offset in INTERVAL_OFFSETS
    }

    per_horizon = [_horizon_auc(curves, offset, lam) for offset in INTERVAL_OFFSETS]
    tau = operating_threshold(negatives, lam, threshold_candidates(manifest, scores))
    revised = per_video_tta(manifest, scores, tau, TtaMode.REVISED, workers)
    legacy = per_video_tta(manifest, scores, tau, TtaMode.LEGACY, workers)
    bound = _mean([anomaly_interval_seconds(video) for video in manifest.accident_videos()])

    report = MetricsReport(
        lam=lam,
        auc=truncated_auc(curves[MAIN_HORIZON], lam),
        auc_0_5s=per_horizon[0],
        auc_1_0s=per_horizon[1],
        auc_1_5s=per_horizon[2],
        mauc=_defined_mauc(per_horizon),
        operating_threshold=tau,
        far_at_threshold=far_at(negatives, tau),
        mtta_revised=_mean([value for _, value in revised]),
        mtta_legacy=_mean([value for _, value in legacy]),
        false_alarms_per_minute=false_alarms_per_minute(manifest, scores, tau),
        positive_count=len(positives),
        negative_count=len(negatives),
        mtta_upper_bound=bound,
        video_count=len(manifest.videos),
        seed=seed,
        horizon_positive_counts=horizon_counts,
    )
    logger.info(
        "Evaluated lambda=%s auc=%.4f mauc=%.4f tau=%s", lam, report.auc, report.mauc, tau
    )
    return report
