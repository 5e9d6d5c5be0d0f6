"""File formats: manifest JSON, per-video score CSVs, ROC CSVs and staged output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Mapping

import numpy as np

from src.engine.annotations import (
    DatasetManifest,
    ManifestError,
    parse_manifest,
    serialize_manifest,
)
from src.engine.metrics import RocCurve
from src.engine.top_core import ScoreMatrix


class ScoreFileError(ValueError):
    """A score file is missing or violates the score CSV schema."""

    def __init__(self, path: Path, rule: str):
        self.path = path
        self.rule = rule
        super().__init__(f"{path}: {rule}")


def format_float(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def read_manifest(path: Path) -> DatasetManifest:
    text = path.read_text(encoding="utf-8")
    try:
        return parse_manifest(text)
    except ManifestError as exc:
        raise ManifestError(f"{path}: {exc}") from exc


def render_score_csv(matrix: ScoreMatrix) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["frame", *(f"a{step}" for step in range(1, matrix.steps + 1))])
    for frame, row in zip(matrix.frames, matrix.values):
        writer.writerow([int(frame), *(format_float(value) for value in row)])
    return buffer.getvalue()


def read_score_file(path: Path, video_id: str | None = None) -> ScoreMatrix:
    """Parse ``<video_id>.csv``; the header fixes the horizon length."""
    video_id = video_id or path.stem
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "frame" or len(header) < 2:
            raise ScoreFileError(path, "header must be 'frame,a1,...,aT'")
        steps = len(header) - 1
        expected = [f"a{step}" for step in range(1, steps + 1)]
        if header[1:] != expected:
            raise ScoreFileError(path, f"header columns must be {','.join(expected)}")

        frames: list[int] = []
        rows: list[list[float]] = []
        for line_number, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != steps + 1:
                raise ScoreFileError(
                    path, f"line {line_number}: expected {steps + 1} fields, got {len(record)}"
                )
            try:
                frame = int(record[0])
                values = [float(value) for value in record[1:]]
            except ValueError as exc:
                raise ScoreFileError(path, f"line {line_number}: {exc}") from exc
            if frames and frame <= frames[-1]:
                raise ScoreFileError(path, f"line {line_number}: frames must be ascending")
            if any(not 0.0 <= value <= 1.0 for value in values):
                raise ScoreFileError(path, f"line {line_number}: scores must lie in [0, 1]")
            frames.append(frame)
            rows.append(values)

    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), steps)
    try:
        return ScoreMatrix.from_arrays(video_id, np.asarray(frames, dtype=np.int64), values)
    except ValueError as exc:
        raise ScoreFileError(path, str(exc)) from exc


def load_scores(scores_dir: Path, manifest: DatasetManifest) -> dict[str, ScoreMatrix]:
    """Read one score file per manifest video and check it against the annotation.

    Rows must have length T, or length 1 for per-frame risk scores.
    """
    scores: dict[str, ScoreMatrix] = {}
    for video in manifest.ordered():
        path = scores_dir / f"{video.video_id}.csv"
        if not path.is_file():
            raise ScoreFileError(path, f"missing score file for video '{video.video_id}'")
        matrix = read_score_file(path, video.video_id)
        if matrix.steps not in (manifest.horizon.steps, 1):
            raise ScoreFileError(
                path, f"rows have length {matrix.steps}, expected {manifest.horizon.steps}"
            )
        if matrix.frames.size and int(matrix.frames[-1]) >= video.num_frames:
            raise ScoreFileError(
                path, f"frame {int(matrix.frames[-1])} >= num_frames {video.num_frames}"
            )
        scores[video.video_id] = matrix
    return scores


def render_roc_csv(curve: RocCurve) -> str:
    lines = ["threshold,fpr,tpr"]
    lines.extend(
        f"{format_float(threshold)},{format_float(fpr)},{format_float(tpr)}"
        for threshold, fpr, tpr in curve.rows()
    )
    return "\n".join(lines) + "\n"


def render_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_table(header: list[str], rows: list[list[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def render_dataset(
    manifest: DatasetManifest, scores: Mapping[str, ScoreMatrix]
) -> dict[str, str]:
    """Relative path -> text for a manifest plus one score file per video."""
    files = {"manifest.json": serialize_manifest(manifest)}
    for video in manifest.ordered():
        files[f"scores/{video.video_id}.csv"] = render_score_csv(scores[video.video_id])
    return files


@contextmanager
def staged_output(destination: Path) -> Iterator[Path]:
    """Yield a scratch directory whose files move into ``destination`` only on success."""
    destination = destination.resolve()
    destination.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=destination.parent))
    try:
        yield staging
        destination.mkdir(parents=True, exist_ok=True)
        for source in sorted(staging.rglob("*")):
            if source.is_dir():
                continue
            target = destination / source.relative_to(staging)
            target.parent.mkdir(parents=True, exist_ok=True)
            os.replace(source, target)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def write_files(destination: Path, files: Mapping[str, str]) -> list[Path]:
    """Write every ``relative path -> text`` entry under ``destination`` all-or-nothing."""
    with staged_output(destination) as staging:
        for relative, text in files.items():
            path = staging / relative
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
    return [destination / relative for relative in files]
