"""CLI commands for the anticipation harness."""
from pathlib import Path
from typing import Any, NoReturn, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from src.config import settings
from src.engine.annotations import anomaly_interval_seconds
from src.engine.evaluation import (
    RunConfig,
    audit_loss,
    build_label_rows,
    compare_tta,
    render_evaluation,
    render_label_rows,
    render_score_trend,
    render_tta_comparison,
    run_evaluation,
)
from src.engine.metrics import operating_point
from src.engine.observability import generate_run_id, log_event
from src.engine.synthetic import (
    generate_dataset,
    generate_scores,
    load_scenario,
    mean_anomaly_interval,
)
from src.ingestion.artifacts import (
    load_scores,
    read_manifest,
    render_dataset,
    render_json,
    write_files,
)

simulate_app = typer.Typer(help="Synthetic scenario commands")
eval_app = typer.Typer(help="Evaluation commands")
labels_app = typer.Typer(help="Training label commands")
manifest_app = typer.Typer(help="Manifest commands")
console = Console()


def _fail(exc: Exception) -> NoReturn:
    """Print ``exc`` and exit: 2 for I/O failures, 1 for validation failures."""
    if isinstance(exc, OSError):
        console.print(f"[red]I/O error:[/red] {escape(str(exc))}", soft_wrap=True)
        raise typer.Exit(2)
    console.print(f"[red]Error:[/red] {escape(str(exc))}", soft_wrap=True)
    raise typer.Exit(1)


def _output_dir(output: Optional[Path], command: str) -> Path:
    return output if output is not None else settings.output_dir / command


def _parse_lambdas(raw: str) -> list[float]:
    return [float(item) for item in raw.split(",") if item.strip()]


@simulate_app.command("scenario")
def simulate_scenario(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Scenario YAML file"),
    accident_videos: Optional[int] = typer.Option(None, "--accident-videos"),
    safe_videos: Optional[int] = typer.Option(None, "--safe-videos"),
    fps: Optional[float] = typer.Option(None, "--fps"),
    horizon: Optional[int] = typer.Option(None, "--horizon", help="Horizon length T"),
    snippet_len: Optional[int] = typer.Option(None, "--snippet-len"),
    min_frames: Optional[int] = typer.Option(None, "--min-frames"),
    max_frames: Optional[int] = typer.Option(None, "--max-frames"),
    min_interval: Optional[float] = typer.Option(None, "--min-interval", help="Seconds"),
    max_interval: Optional[float] = typer.Option(None, "--max-interval", help="Seconds"),
    margin: Optional[int] = typer.Option(None, "--margin", help="Minimum anomaly frame"),
    predictor: Optional[str] = typer.Option(
        None,
        "--predictor",
        "-p",
        help="oracle, constant, random, early_false_alarm or noisy_decay",
    ),
    constant: Optional[float] = typer.Option(None, "--constant"),
    lead: Optional[float] = typer.Option(None, "--lead", help="Lead seconds"),
    spike_len: Optional[int] = typer.Option(None, "--spike-len"),
    noise: Optional[float] = typer.Option(None, "--noise", help="Noise sigma"),
    gate_at_anomaly: Optional[bool] = typer.Option(
        None,
        "--gate-at-anomaly/--no-gate-at-anomaly",
        help="Keep the oracle silent before the anomaly onset",
    ),
    stride: int = typer.Option(settings.stride, "--stride", min=1),
    seed: Optional[int] = typer.Option(None, "--seed"),
    workers: int = typer.Option(settings.workers, "--workers", min=1),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Output directory"),
):
    """Generate a synthetic manifest plus one score CSV per video.

    Examples:
        python -m src.cli simulate scenario --accident-videos 10 --safe-videos 10
        python -m src.cli simulate scenario -c scenario.yaml -p early_false_alarm --lead 4
    """
    run_id = generate_run_id()
    scenario_overrides: dict[str, Any] = {}
    for key, value in (
        ("n_accident_videos", accident_videos),
        ("n_safe_videos", safe_videos),
        ("fps", fps),
        ("horizon_steps", horizon),
        ("snippet_len", snippet_len),
        ("accident_margin_frames", margin),
        ("seed", seed),
    ):
        if value is not None:
            scenario_overrides[key] = value
    predictor_overrides: dict[str, Any] = {}
    for key, value in (
        ("kind", predictor),
        ("constant", constant),
        ("lead_seconds", lead),
        ("spike_len", spike_len),
        ("noise_sigma", noise),
        ("gate_at_anomaly", gate_at_anomaly),
        ("seed", seed),
    ):
        if value is not None:
            predictor_overrides[key] = value

    destination = _output_dir(output, "simulate")
    try:
        scenario_cfg, predictor_spec = load_scenario(config)
        base_len = scenario_cfg.video_len_frames
        base_interval = scenario_cfg.anomaly_interval_seconds
        if min_frames is not None or max_frames is not None:
            scenario_overrides["video_len_frames"] = [
                min_frames if min_frames is not None else base_len[0],
                max_frames if max_frames is not None else base_len[1],
            ]
        if min_interval is not None or max_interval is not None:
            scenario_overrides["anomaly_interval_seconds"] = [
                min_interval if min_interval is not None else base_interval[0],
                max_interval if max_interval is not None else base_interval[1],
            ]
        scenario_cfg, predictor_spec = load_scenario(
            config, {"scenario": scenario_overrides, "predictor": predictor_overrides}
        )
        log_event(
            "simulate.start",
            {"predictor": predictor_spec.kind, "seed": scenario_cfg.seed},
            run_id,
        )
        manifest = generate_dataset(scenario_cfg)
        scores = generate_scores(manifest, predictor_spec, stride=stride, workers=workers)
        written = write_files(destination, render_dataset(manifest, scores))
    except (ValueError, OSError) as exc:
        _fail(exc)

    log_event("simulate.finish", {"files": len(written)}, run_id)
    console.print(
        f"[green]✓[/green] Simulated [bold]{len(manifest.accident_videos())}[/bold] accident and "
        f"[bold]{len(manifest.safe_videos())}[/bold] safe videos "
        f"([yellow]{predictor_spec.kind}[/yellow])"
    )
    console.print(
        f"[green]✓[/green] Wrote {len(written)} files to [yellow]{destination}[/yellow]"
    )


def _run_config(
    manifest_path: Path,
    scores_dir: Optional[Path],
    lambdas: str,
    tta_mode: str,
    seed: int,
    output: Optional[Path],
    command: str,
    w_plus: float = settings.w_plus,
    samples_per_video: int = settings.samples_per_video,
    workers: int = settings.workers,
    write_roc: bool = False,
    stride: int = settings.stride,
) -> RunConfig:
    return RunConfig(
        manifest_path=manifest_path,
        scores_dir=scores_dir,
        output_path=_output_dir(output, command),
        lambdas=_parse_lambdas(lambdas),
        tta_mode=tta_mode,
        seed=seed,
        w_plus=w_plus,
        samples_per_video=samples_per_video,
        workers=workers,
        write_roc=write_roc,
        stride=stride,
    )


@eval_app.command("run")
def eval_run(
    manifest_path: Path = typer.Argument(..., help="Manifest JSON"),
    scores_dir: Path = typer.Argument(..., help="Directory of <video_id>.csv score files"),
    lambdas: str = typer.Option(
        str(settings.default_lambda), "--lambdas", "-l", help="Comma-separated FAR bounds"
    ),
    tta_mode: str = typer.Option("both", "--tta-mode", help="revised, legacy or both"),
    roc: bool = typer.Option(False, "--roc", help="Also write per-horizon ROC CSVs"),
    seed: int = typer.Option(settings.seed, "--seed"),
    workers: int = typer.Option(settings.workers, "--workers"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Output directory"),
):
    """Compute the FAR-constrained metric report for every lambda.

    Examples:
        python -m src.cli eval run runs/simulate/manifest.json runs/simulate/scores
        python -m src.cli eval run manifest.json scores -l 1,0.1,0.01 --roc
    """
    run_id = generate_run_id()
    try:
        cfg = _run_config(
            manifest_path, scores_dir, lambdas, tta_mode, seed, output, "evaluate",
            workers=workers, write_roc=roc,
        )
        log_event("evaluate.start", {"lambdas": cfg.lambdas, "seed": cfg.seed}, run_id)
        manifest = read_manifest(cfg.manifest_path)
        scores = load_scores(cfg.scores_dir, manifest)
        result = run_evaluation(manifest, scores, cfg)
        written = write_files(cfg.output_path, render_evaluation(result, cfg))
    except (ValueError, OSError) as exc:
        _fail(exc)

    table = Table(title=f"Metrics over {len(manifest.videos)} videos")
    columns = ("λ", "AUC", "AUC 0.5s", "AUC 1.0s", "AUC 1.5s", "mAUC", "mTTA (s)", "legacy (s)")
    for column in columns:
        table.add_column(column, justify="right")
    for report in result.reports:
        table.add_row(
            f"{report.lam:g}",
            f"{report.auc:.4f}",
            f"{report.auc_0_5s:.4f}",
            f"{report.auc_1_0s:.4f}",
            f"{report.auc_1_5s:.4f}",
            f"{report.mauc:.4f}",
            f"{report.mtta_revised:.4f}",
            f"{report.mtta_legacy:.4f}",
        )
    console.print(table)
    log_event("evaluate.finish", {"files": len(written)}, run_id)
    console.print(
        f"[green]✓[/green] Wrote {len(written)} files to [yellow]{cfg.output_path}[/yellow]"
    )


@eval_app.command("compare-tta")
def eval_compare_tta(
    manifest_path: Path = typer.Argument(..., help="Manifest JSON"),
    scores_dir: Path = typer.Argument(..., help="Directory of score files"),
    lam: float = typer.Option(settings.default_lambda, "--lambda", "-l", help="FAR bound"),
    seed: int = typer.Option(settings.seed, "--seed"),
    workers: int = typer.Option(settings.workers, "--workers"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Output directory"),
):
    """Tabulate legacy against revised TTA per accident video at the operating threshold."""
    run_id = generate_run_id()
    try:
        cfg = _run_config(
            manifest_path, scores_dir, str(lam), "both", seed, output, "compare-tta",
            workers=workers,
        )
        log_event("compare_tta.start", {"lambda": lam}, run_id)
        manifest = read_manifest(cfg.manifest_path)
        scores = load_scores(cfg.scores_dir, manifest)
        comparison = compare_tta(manifest, scores, lam, workers=cfg.workers)
        write_files(cfg.output_path, {"tta_comparison.csv": render_tta_comparison(comparison)})
    except (ValueError, OSError) as exc:
        _fail(exc)

    log_event("compare_tta.finish", {"videos": len(comparison.rows)}, run_id)
    console.print(f"Operating threshold τ*: [yellow]{comparison.threshold}[/yellow]")
    console.print(
        f"Mean interval [bold]{comparison.mean('interval_s'):.4f}s[/bold]  "
        f"legacy TTA [bold]{comparison.mean('tta_legacy_s'):.4f}s[/bold]  "
        f"revised TTA [bold]{comparison.mean('tta_revised_s'):.4f}s[/bold]"
    )
    target = cfg.output_path / "tta_comparison.csv"
    console.print(f"[green]✓[/green] Wrote [yellow]{target}[/yellow]")


@eval_app.command("trend")
def eval_trend(
    manifest_path: Path = typer.Argument(..., help="Manifest JSON"),
    scores_dir: Path = typer.Argument(..., help="Directory of score files"),
    video_id: str = typer.Argument(..., help="Video to export"),
    lam: float = typer.Option(settings.default_lambda, "--lambda", "-l", help="FAR bound"),
    tau: Optional[float] = typer.Option(None, "--tau", help="Fixed alarm threshold"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Output directory"),
):
    """Export one video's per-frame peak score and alarms for plotting."""
    try:
        manifest = read_manifest(manifest_path)
        try:
            video = manifest.video(video_id)
        except KeyError:
            raise ValueError(f"video '{video_id}' is not in {manifest_path}") from None
        scores = load_scores(scores_dir, manifest)
        threshold = tau if tau is not None else operating_point(manifest, scores, lam)
        destination = _output_dir(output, "trend")
        write_files(
            destination,
            {f"trend_{video_id}.csv": render_score_trend(manifest, scores[video_id], threshold)},
        )
    except (ValueError, OSError) as exc:
        _fail(exc)

    console.print(f"Threshold: [yellow]{threshold}[/yellow]")
    if video.has_accident:
        console.print(
            f"Anomaly frame [bold]{video.anomaly_frame}[/bold], accident frame "
            f"[bold]{video.accident_frame}[/bold], accident end "
            f"[bold]{video.accident_end_frame}[/bold]"
        )
    else:
        console.print("[dim]Accident-free video[/dim]")
    target = destination / f"trend_{video_id}.csv"
    console.print(f"[green]✓[/green] Wrote [yellow]{target}[/yellow]")


@labels_app.command("build")
def labels_build(
    manifest_path: Path = typer.Argument(..., help="Manifest JSON"),
    scores_dir: Optional[Path] = typer.Option(
        None, "--scores", help="Score files to audit the weighted BCE loss against"
    ),
    samples_per_video: int = typer.Option(settings.samples_per_video, "--samples-per-video"),
    w_plus: float = typer.Option(settings.w_plus, "--w-plus", help="Positive weight"),
    stride: int = typer.Option(
        settings.stride, "--stride", help="Window stride for accident-free videos"
    ),
    seed: int = typer.Option(settings.seed, "--seed"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Output directory"),
):
    """Sample training snippets and write their TOP label vectors."""
    run_id = generate_run_id()
    audit = None
    try:
        cfg = _run_config(
            manifest_path, scores_dir, str(settings.default_lambda), "both", seed, output,
            "labels", w_plus=w_plus, samples_per_video=samples_per_video, stride=stride,
        )
        manifest = read_manifest(cfg.manifest_path)
        rows = build_label_rows(manifest, cfg.samples_per_video, cfg.seed, cfg.stride)
        files = {"labels.csv": render_label_rows(rows, manifest.horizon.steps)}
        if cfg.scores_dir is not None:
            scores = load_scores(cfg.scores_dir, manifest)
            audit = audit_loss(manifest, rows, scores, cfg.w_plus)
            files["label_loss.json"] = render_json(audit.to_payload())
        write_files(cfg.output_path, files)
    except (ValueError, OSError) as exc:
        _fail(exc)

    positives = sum(1 for row in rows if row.accident_offset is not None)
    log_event("labels.finish", {"rows": len(rows), "positives": positives}, run_id)
    console.print(f"[green]✓[/green] {len(rows)} label rows ({positives} positive)")
    if audit is not None:
        console.print(
            f"Mean weighted BCE: [bold]{audit.mean_loss:.6f}[/bold] "
            f"over {audit.scored_rows} rows ({audit.skipped_rows} without scores)"
        )
    console.print(f"[green]✓[/green] Wrote to [yellow]{cfg.output_path}[/yellow]")


@manifest_app.command("validate")
def manifest_validate(
    manifest_path: Path = typer.Argument(..., help="Manifest JSON"),
):
    """Validate a manifest and summarize it."""
    try:
        manifest = read_manifest(manifest_path)
    except (ValueError, OSError) as exc:
        _fail(exc)

    accident_videos = manifest.accident_videos()
    console.print("[green]✓[/green] Manifest validation passed.")
    console.print(f"  Videos:            {len(manifest.videos)}")
    console.print(f"  Accident videos:   {len(accident_videos)}")
    console.print(f"  FPS:               {manifest.fps:g}")
    console.print(
        f"  Horizon:           T={manifest.horizon.steps} "
        f"({manifest.horizon.horizon_seconds:g}s), S={manifest.horizon.snippet_len}"
    )
    if accident_videos:
        longest = max(accident_videos, key=anomaly_interval_seconds)
        console.print(f"  Mean interval:     {mean_anomaly_interval(manifest):.4f}s")
        console.print(
            f"  Longest interval:  {anomaly_interval_seconds(longest):.4f}s ({longest.video_id})"
        )
