"""Tests for synthetic scenarios and reference predictors."""
from pathlib import Path

import numpy as np
import pytest

from src.engine.annotations import (
    HorizonConfig,
    VideoAnnotation,
    anomaly_interval_seconds,
    build_manifest,
)
from src.engine.metrics import TtaMode, evaluate, operating_point, per_video_tta
from src.engine.synthetic import (
    PredictorSpec,
    ScenarioConfig,
    ScenarioError,
    generate_dataset,
    generate_scores,
    load_scenario,
    mean_anomaly_interval,
    predict,
)
from tests.conftest import HORIZON, accident_video, safe_video

PREDICTOR_KINDS = ("oracle", "constant", "random", "early_false_alarm", "noisy_decay")


def test_generate_dataset_counts() -> None:
    manifest = generate_dataset(ScenarioConfig(n_accident_videos=2, n_safe_videos=1))
    assert len(manifest.videos) == 3
    assert len(manifest.accident_videos()) == 2
    assert [video.video_id for video in manifest.safe_videos()] == ["safe_0000"]


def test_generate_dataset_degenerate_interval_range() -> None:
    cfg = ScenarioConfig(n_accident_videos=20, anomaly_interval_seconds=(1.0, 1.0))
    for video in generate_dataset(cfg).accident_videos():
        assert anomaly_interval_seconds(video) == pytest.approx(1.0)


def test_generate_dataset_is_deterministic() -> None:
    cfg = ScenarioConfig(n_accident_videos=5, n_safe_videos=5, seed=11)
    assert generate_dataset(cfg) == generate_dataset(cfg)
    assert generate_dataset(cfg) != generate_dataset(ScenarioConfig(
        n_accident_videos=5, n_safe_videos=5, seed=12
    ))


def test_generate_dataset_videos_are_independent_of_count() -> None:
    small = generate_dataset(ScenarioConfig(n_accident_videos=3, n_safe_videos=0, seed=2))
    large = generate_dataset(ScenarioConfig(n_accident_videos=8, n_safe_videos=0, seed=2))
    assert small.video("accident_0002") == large.video("accident_0002")


def test_generate_dataset_respects_margin() -> None:
    cfg = ScenarioConfig(n_accident_videos=30, accident_margin_frames=40)
    for video in generate_dataset(cfg).accident_videos():
        assert video.anomaly_frame >= 40
        assert video.accident_end_frame < video.num_frames


def test_generate_dataset_rejects_infeasible_interval() -> None:
    cfg = ScenarioConfig(
        n_accident_videos=1, video_len_frames=(30, 40), anomaly_interval_seconds=(5.0, 6.0)
    )
    with pytest.raises(ScenarioError, match="infeasible"):
        generate_dataset(cfg)


def test_scenario_config_rejects_empty_range() -> None:
    with pytest.raises(ValueError, match="empty"):
        ScenarioConfig(video_len_frames=(200, 100))


def test_oracle_row_fires_at_accident_offset() -> None:
    matrix = predict(PredictorSpec(kind="oracle"), accident_video(), HORIZON)
    row = matrix.row(73)
    assert row.tolist() == [1.0 if step == 7 else 0.0 for step in range(1, 21)]
    assert matrix.row(49).sum() == 0.0
    assert matrix.row(85).sum() == 0.0


def test_oracle_is_silent_on_safe_videos() -> None:
    matrix = predict(PredictorSpec(kind="oracle"), safe_video(), HORIZON)
    assert matrix.values.sum() == 0.0
    assert matrix.steps == 20


def test_oracle_gate_silences_rows_before_anomaly() -> None:
    video = accident_video(anomaly=75, accident=80)
    gated = predict(PredictorSpec(kind="oracle"), video, HORIZON)
    ungated = predict(PredictorSpec(kind="oracle", gate_at_anomaly=False), video, HORIZON)
    assert gated.row(62).sum() == 0.0
    assert ungated.row(62).tolist() == [1.0 if step == 18 else 0.0 for step in range(1, 21)]
    assert gated.row(77).tolist() == ungated.row(77).tolist()
    assert ungated.row(59).sum() == 0.0


def test_early_false_alarm_short_intervals_still_evaluates() -> None:
    manifest = build_manifest(
        [
            accident_video("a1", num_frames=150, anomaly=65, accident=80),
            accident_video("a2", num_frames=150, anomaly=62, accident=80),
            *(safe_video(f"n{index}", num_frames=150) for index in range(30)),
        ],
        HORIZON,
    )
    spec = PredictorSpec(kind="early_false_alarm", lead_seconds=4.0, spike_len=5)
    report = evaluate(manifest, generate_scores(manifest, spec), 0.1)
    assert report.horizon_positive_counts["1.5s"] == 0
    assert report.mtta_legacy > 3.0
    assert report.mtta_revised == pytest.approx(1.65)


def test_constant_zero_never_alarms() -> None:
    matrix = predict(PredictorSpec(kind="constant", constant=0.0), accident_video(), HORIZON)
    assert not np.any(matrix.peaks >= 1e-9)


def test_early_false_alarm_spike_position() -> None:
    spec = PredictorSpec(kind="early_false_alarm", lead_seconds=4.0, spike_len=5)
    matrix = predict(spec, accident_video(), HORIZON)
    alarming = matrix.frames[matrix.peaks >= 1.0].tolist()
    assert alarming[:5] == [10, 11, 12, 13, 14]
    assert (80 - alarming[0]) / 10.0 == pytest.approx(7.0)


def test_early_false_alarm_spike_clamped_to_video_start() -> None:
    spec = PredictorSpec(kind="early_false_alarm", lead_seconds=30.0, spike_len=8)
    matrix = predict(spec, accident_video(), HORIZON)
    assert matrix.frames[matrix.peaks >= 1.0].tolist()[:4] == [4, 5, 6, 7]


def test_noisy_decay_ramps_toward_accident() -> None:
    spec = PredictorSpec(kind="noisy_decay", lead_seconds=2.0, noise_sigma=0.0)
    matrix = predict(spec, accident_video(), HORIZON)
    assert matrix.row(70)[9] == pytest.approx(1.0)
    assert matrix.row(70)[0] == pytest.approx(1.0 - 9 / 20)
    assert matrix.row(40).max() == 0.0


@pytest.mark.parametrize("kind", PREDICTOR_KINDS)
def test_predictors_stay_in_unit_interval(kind: str) -> None:
    spec = PredictorSpec(kind=kind, constant=0.4, noise_sigma=0.5, seed=3)
    for video in (accident_video(), safe_video()):
        matrix = predict(spec, video, HORIZON)
        assert matrix.values.shape[1] == HORIZON.steps
        assert np.all((matrix.values >= 0.0) & (matrix.values <= 1.0))


@pytest.mark.parametrize("kind", PREDICTOR_KINDS)
def test_predictors_are_deterministic(kind: str) -> None:
    spec = PredictorSpec(kind=kind, seed=5)
    assert predict(spec, accident_video(), HORIZON) == predict(spec, accident_video(), HORIZON)


def test_predict_honours_stride() -> None:
    matrix = predict(PredictorSpec(kind="random"), safe_video(num_frames=100), HORIZON, stride=10)
    assert matrix.frames.tolist() == list(range(4, 95, 10))


def test_generate_scores_parallel_matches_serial() -> None:
    manifest = generate_dataset(ScenarioConfig(n_accident_videos=4, n_safe_videos=4))
    spec = PredictorSpec(kind="random", seed=1)
    assert generate_scores(manifest, spec, workers=4) == generate_scores(manifest, spec)


@pytest.mark.parametrize(
    ("intervals", "expected"),
    [((3.0, 1.0), 2.0), ((1.86,), 1.86), ((0.0, 0.0), 0.0)],
)
def test_mean_anomaly_interval(intervals: tuple[float, ...], expected: float) -> None:
    videos = [
        VideoAnnotation(
            video_id=f"v{index}",
            fps=100.0,
            num_frames=400,
            anomaly_frame=300 - int(round(seconds * 100)),
            accident_frame=300,
        )
        for index, seconds in enumerate(intervals)
    ]
    manifest = build_manifest(videos, HorizonConfig(steps=20, snippet_len=5, fps=100.0))
    assert mean_anomaly_interval(manifest) == pytest.approx(expected)


def test_mean_anomaly_interval_requires_accidents() -> None:
    with pytest.raises(ValueError):
        mean_anomaly_interval(build_manifest([safe_video()], HORIZON))


def test_oracle_end_to_end_scores() -> None:
    manifest = generate_dataset(
        ScenarioConfig(n_accident_videos=100, n_safe_videos=100, seed=7)
    )
    scores = generate_scores(manifest, PredictorSpec(kind="oracle"))
    expected = np.mean(
        [min(anomaly_interval_seconds(video), 2.0) for video in manifest.accident_videos()]
    )
    for lam in (0.01, 0.1, 1.0):
        report = evaluate(manifest, scores, lam, seed=7)
        assert report.auc == 1.0
        assert report.mauc == 1.0
        assert report.mtta_revised == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("kind", PREDICTOR_KINDS)
def test_tta_bounded_by_interval_and_legacy_not_below_revised(kind: str) -> None:
    manifest = generate_dataset(ScenarioConfig(n_accident_videos=15, n_safe_videos=15, seed=1))
    scores = generate_scores(manifest, PredictorSpec(kind=kind, constant=0.6, seed=2))
    tau = operating_point(manifest, scores, 0.1)
    revised = dict(per_video_tta(manifest, scores, tau, TtaMode.REVISED))
    legacy = dict(per_video_tta(manifest, scores, tau, TtaMode.LEGACY))
    for video in manifest.accident_videos():
        assert revised[video.video_id] <= anomaly_interval_seconds(video) + 1e-12
        assert legacy[video.video_id] >= revised[video.video_id]


def test_early_false_alarm_inflates_legacy_tta() -> None:
    manifest = generate_dataset(
        ScenarioConfig(
            n_accident_videos=2,
            n_safe_videos=30,
            video_len_frames=(150, 200),
            anomaly_interval_seconds=(1.0, 3.0),
            accident_margin_frames=60,
            seed=3,
        )
    )
    spec = PredictorSpec(kind="early_false_alarm", lead_seconds=4.0, spike_len=5)
    report = evaluate(manifest, generate_scores(manifest, spec), 0.1)
    assert report.mtta_legacy > 3.0
    assert report.mtta_revised <= mean_anomaly_interval(manifest)


def test_random_predictor_interval_auc_near_chance() -> None:
    manifest = generate_dataset(
        ScenarioConfig(
            n_accident_videos=250,
            n_safe_videos=50,
            anomaly_interval_seconds=(2.0, 3.0),
            seed=21,
        )
    )
    report = evaluate(manifest, generate_scores(manifest, PredictorSpec(kind="random")), 1.0)
    assert report.horizon_positive_counts["1.5s"] == 250
    for value in (report.auc_0_5s, report.auc_1_0s, report.auc_1_5s):
        assert 0.4 <= value <= 0.6


def test_load_scenario_merges_yaml_and_overrides(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "scenario:\n  n_accident_videos: 4\n  fps: 10\npredictor:\n  kind: constant\n",
        encoding="utf-8",
    )
    scenario, predictor = load_scenario(
        path, {"scenario": {"seed": 9}, "predictor": {"constant": 0.25}}
    )
    assert scenario.n_accident_videos == 4
    assert scenario.seed == 9
    assert predictor.kind == "constant"
    assert predictor.constant == 0.25


def test_load_scenario_rejects_unknown_section(tmp_path: Path) -> None:
    path = tmp_path / "scenario.yaml"
    path.write_text("agents: []\n", encoding="utf-8")
    with pytest.raises(ScenarioError, match="unknown scenario sections"):
        load_scenario(path)


def test_load_scenario_rejects_unknown_field() -> None:
    with pytest.raises(ValueError):
        load_scenario(None, {"scenario": {"n_videos": 3}})
