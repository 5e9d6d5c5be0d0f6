"""Evaluation harness shared by the CLI commands."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

import numpy as np
from pydantic import ConfigDict, Field, field_validator
from pydantic.dataclasses import dataclass as pydantic_dataclass

from src.config import settings
from src.engine.annotations import DatasetManifest, anomaly_interval_seconds
from src.engine.metrics import (
    MetricsReport,
    RocCurve,
    TtaMode,
    evaluate,
    operating_point,
    per_video_tta,
    roc_curves,
)
from src.engine.top_core import (
    ScoreMatrix,
    SnippetWindow,
    derive_seed,
    make_label_vector,
    sample_training_snippets,
    sliding_windows,
    weighted_bce_loss,
)
from src.ingestion.artifacts import format_float, render_json, render_roc_csv, render_table

TtaSelection = Literal["revised", "legacy", "both"]


@pydantic_dataclass(config=ConfigDict(extra="forbid"))
class RunConfig:
    """Inputs and knobs of one harness run."""

    manifest_path: Path
    output_path: Path
    scores_dir: Optional[Path] = None
    lambdas: list[float] = field(default_factory=lambda: [settings.default_lambda])
    tta_mode: TtaSelection = "both"
    stride: int = Field(default=settings.stride, ge=1)
    seed: int = settings.seed
    w_plus: float = Field(default=settings.w_plus, gt=0)
    samples_per_video: int = Field(default=settings.samples_per_video, ge=1)
    workers: int = Field(default=settings.workers, ge=1)
    write_roc: bool = False

    @field_validator("lambdas")
    @classmethod
    def _check_lambdas(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("at least one lambda is required")
        for lam in value:
            if not 0.0 < lam <= 1.0:
                raise ValueError(f"lambda must be in (0, 1], got {lam}")
        return value


@dataclass(frozen=True)
class EvaluationResult:
    reports: list[MetricsReport]
    curves: dict[str, RocCurve]


def report_filename(lam: float) -> str:
    return f"report_lambda_{lam:g}.json"


def run_evaluation(
    manifest: DatasetManifest, scores: Mapping[str, ScoreMatrix], cfg: RunConfig
) -> EvaluationResult:
    curves = roc_curves(manifest, scores, cfg.seed)
    reports = [
        evaluate(manifest, scores, lam, seed=cfg.seed, workers=cfg.workers, curves=curves)
        for lam in cfg.lambdas
    ]
    return EvaluationResult(reports=reports, curves=curves)


def _rounded(value: float) -> Any:
    if not math.isfinite(value):
        return ""
    return f"{value:.{settings.report_decimals}f}"


def render_evaluation(result: EvaluationResult, cfg: RunConfig) -> dict[str, str]:
    """Report JSON per lambda, plus the sweep table and ROC curves when asked for."""
    include_revised = cfg.tta_mode in ("revised", "both")
    include_legacy = cfg.tta_mode in ("legacy", "both")
    files: dict[str, str] = {}
    for report in result.reports:
        payload = report.to_payload(settings.report_decimals, include_legacy=include_legacy)
        if not include_revised:
            payload["mtta_revised"] = None
        files[report_filename(report.lam)] = render_json(payload)

    if len(result.reports) > 1:
        files["lambda_sweep.csv"] = render_table(
            [
                "lambda",
                "auc",
                "auc_0_5s",
                "auc_1_0s",
                "auc_1_5s",
                "mauc",
                "mtta_revised",
                "mtta_legacy",
            ],
            [
                [
                    f"{report.lam:g}",
                    _rounded(report.auc),
                    _rounded(report.auc_0_5s),
                    _rounded(report.auc_1_0s),
                    _rounded(report.auc_1_5s),
                    _rounded(report.mauc),
                    _rounded(report.mtta_revised) if include_revised else "",
                    _rounded(report.mtta_legacy) if include_legacy else "",
                ]
                for report in result.reports
            ],
        )

    if cfg.write_roc:
        for label, curve in result.curves.items():
            files[f"roc_{label}.csv"] = render_roc_csv(curve)
    return files


@dataclass(frozen=True)
class TtaComparisonRow:
    video_id: str
    interval_s: float
    tta_legacy_s: float
    tta_revised_s: float


@dataclass(frozen=True)
class TtaComparison:
    lam: float
    threshold: float
    rows: list[TtaComparisonRow] = field(default_factory=list)

    def mean(self, attribute: str) -> float:
        if not self.rows:
            return 0.0
        return math.fsum(getattr(row, attribute) for row in self.rows) / len(self.rows)


def compare_tta(
    manifest: DatasetManifest,
    scores: Mapping[str, ScoreMatrix],
    lam: float,
    workers: int = 1,
) -> TtaComparison:
    """Legacy and revised TTA per accident video at the lam operating threshold."""
    tau = operating_point(manifest, scores, lam)
    legacy = dict(per_video_tta(manifest, scores, tau, TtaMode.LEGACY, workers))
    revised = dict(per_video_tta(manifest, scores, tau, TtaMode.REVISED, workers))
    rows = [
        TtaComparisonRow(
            video_id=video.video_id,
            interval_s=anomaly_interval_seconds(video),
            tta_legacy_s=legacy[video.video_id],
            tta_revised_s=revised[video.video_id],
        )
        for video in manifest.accident_videos()
    ]
    return TtaComparison(lam=lam, threshold=tau, rows=rows)


def render_tta_comparison(comparison: TtaComparison) -> str:
    table = [
        [
            row.video_id,
            _rounded(row.interval_s),
            _rounded(row.tta_legacy_s),
            _rounded(row.tta_revised_s),
        ]
        for row in comparison.rows
    ]
    table.append(
        [
            "mean",
            _rounded(comparison.mean("interval_s")),
            _rounded(comparison.mean("tta_legacy_s")),
            _rounded(comparison.mean("tta_revised_s")),
        ]
    )
    return render_table(["video_id", "interval_s", "tta_legacy_s", "tta_revised_s"], table)


@dataclass(frozen=True)
class LabelRow:
    video_id: str
    t0: int
    accident_offset: Optional[int]
    values: tuple[int, ...]


@dataclass(frozen=True)
class LossAudit:
    mean_loss: float
    scored_rows: int
    skipped_rows: int

    def to_payload(self) -> dict[str, Any]:
        return {
            "mean_loss": round(self.mean_loss, settings.report_decimals),
            "scored_rows": self.scored_rows,
            "skipped_rows": self.skipped_rows,
        }


def _safe_snippets(
    windows: list[SnippetWindow], count: int, seed: int
) -> list[SnippetWindow]:
    rng = np.random.default_rng(seed)
    return [windows[int(index)] for index in rng.integers(0, len(windows), size=count)]


def build_label_rows(
    manifest: DatasetManifest, count: int, seed: int, stride: int = 1
) -> list[LabelRow]:
    """Seeded training snippets per video with their TOP label vectors.

    Accident videos sample windows ending at or before the accident; safe videos sample
    from the sliding windows taken every ``stride`` frames and always carry all-zero labels.
    """
    horizon = manifest.horizon
    rows: list[LabelRow] = []
    for video in manifest.ordered():
        video_seed = derive_seed(seed, f"labels:{video.video_id}")
        if video.has_accident:
            windows = sample_training_snippets(video, horizon, count, video_seed)
        else:
            windows = _safe_snippets(
                sliding_windows(video, horizon, stride), count, video_seed
            )
        for window in windows:
            label = make_label_vector(window.end_frame, video, horizon)
            rows.append(
                LabelRow(
                    video_id=video.video_id,
                    t0=window.end_frame,
                    accident_offset=label.accident_offset,
                    values=label.values,
                )
            )
    return rows


def render_label_rows(rows: list[LabelRow], steps: int) -> str:
    header = ["video_id", "t0", "A", *(f"y{step}" for step in range(1, steps + 1))]
    return render_table(
        header,
        [
            [
                row.video_id,
                row.t0,
                "" if row.accident_offset is None else row.accident_offset,
                *row.values,
            ]
            for row in rows
        ],
    )


def audit_loss(
    manifest: DatasetManifest,
    rows: list[LabelRow],
    scores: Mapping[str, ScoreMatrix],
    w_plus: float,
) -> LossAudit:
    """Mean weighted BCE of the supplied scores on the sampled label rows."""
    horizon = manifest.horizon
    losses: list[float] = []
    skipped = 0
    for row in rows:
        matrix = scores.get(row.video_id)
        predicted = matrix.row(row.t0) if matrix is not None else None
        if predicted is None or predicted.size != horizon.steps:
            skipped += 1
            continue
        label = make_label_vector(row.t0, manifest.video(row.video_id), horizon)
        losses.append(weighted_bce_loss(predicted, label, w_plus))
    mean_loss = math.fsum(losses) / len(losses) if losses else 0.0
    return LossAudit(mean_loss=mean_loss, scored_rows=len(losses), skipped_rows=skipped)


def render_score_trend(
    manifest: DatasetManifest, matrix: ScoreMatrix, tau: float
) -> str:
    """Per-frame peak score and alarm flag for plotting a single video."""
    fps = manifest.fps
    return render_table(
        ["frame", "time_s", "peak", "alarm"],
        [
            [
                int(frame),
                format_float(int(frame) / fps),
                format_float(float(peak)),
                int(peak >= tau),
            ]
            for frame, peak in zip(matrix.frames, matrix.peaks)
        ],
    )
