"""Temporal Occurrence Prediction primitives: labels, snippets, loss and alarms."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional, Sequence

import numpy as np

from src.engine.annotations import HorizonConfig, VideoAnnotation

LOG_EPSILON = 1e-7


def derive_seed(master_seed: int, key: str) -> int:
    """Stable 64-bit sub-seed for ``key`` under ``master_seed``."""
    digest = hashlib.sha256(f"{master_seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class LabelVector:
    values: tuple[int, ...]
    accident_offset: Optional[int] = None

    @property
    def steps(self) -> int:
        return len(self.values)

    @property
    def is_positive(self) -> bool:
        return self.accident_offset is not None


@dataclass(frozen=True)
class SnippetWindow:
    start_frame: int
    end_frame: int

    @property
    def current_frame(self) -> int:
        return self.end_frame

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Future accident scores per current frame.

    ``frames`` holds the ascending current-frame indices that have a score row;
    ``values[k]`` is the row a_1..a_T for ``frames[k]``.
    """

    video_id: str
    frames: np.ndarray
    values: np.ndarray

    @classmethod
    def from_rows(
        cls, video_id: str, rows: Mapping[int, Sequence[float]], steps: int
    ) -> "ScoreMatrix":
        frames = sorted(int(frame) for frame in rows)
        values = np.zeros((len(frames), steps), dtype=np.float64)
        for index, frame in enumerate(frames):
            if frame < 0:
                raise ValueError(f"{video_id}: negative frame index {frame}")
            row = rows[frame]
            if len(row) != steps:
                raise ValueError(
                    f"{video_id}: row at frame {frame} has length {len(row)}, expected {steps}"
                )
            values[index] = row
        return cls.from_arrays(video_id, np.asarray(frames, dtype=np.int64), values)

    @classmethod
    def from_arrays(cls, video_id: str, frames: np.ndarray, values: np.ndarray) -> "ScoreMatrix":
        frames = np.asarray(frames, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != frames.shape[0] or values.shape[1] < 1:
            raise ValueError(f"{video_id}: score array shape {values.shape} does not match frames")
        if frames.size and (np.any(np.diff(frames) <= 0) or frames[0] < 0):
            raise ValueError(f"{video_id}: frame indices must be unique, ascending and >= 0")
        if not np.all((values >= 0.0) & (values <= 1.0)):
            raise ValueError(f"{video_id}: scores must lie in [0, 1]")
        return cls(video_id=video_id, frames=frames, values=values)

    @property
    def steps(self) -> int:
        return int(self.values.shape[1])

    @cached_property
    def peaks(self) -> np.ndarray:
        """max_i a_i(t0) for every present row."""
        if not self.frames.size:
            return np.zeros(0, dtype=np.float64)
        return self.values.max(axis=1)

    def row(self, frame: int) -> Optional[np.ndarray]:
        index = int(np.searchsorted(self.frames, frame))
        if index < self.frames.size and self.frames[index] == frame:
            return self.values[index]
        return None

    def window(self, first: int, last: int) -> tuple[np.ndarray, np.ndarray]:
        """(frames, peaks) of the present rows with first <= frame <= last."""
        lo = int(np.searchsorted(self.frames, first, side="left"))
        hi = int(np.searchsorted(self.frames, last, side="right"))
        return self.frames[lo:hi], self.peaks[lo:hi]

    def rows(self) -> dict[int, tuple[float, ...]]:
        return {
            int(frame): tuple(float(v) for v in row) for frame, row in zip(self.frames, self.values)
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoreMatrix):
            return NotImplemented
        return (
            self.video_id == other.video_id
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.values, other.values)
        )


def _check_frame(frame: int, annotation: VideoAnnotation) -> None:
    if frame < 0 or frame >= annotation.num_frames:
        raise ValueError(
            f"frame {frame} outside video '{annotation.video_id}' "
            f"(0..{annotation.num_frames - 1})"
        )


def make_label_vector(
    t0: int, annotation: VideoAnnotation, horizon: HorizonConfig
) -> LabelVector:
    """Unit vector at offset A = accident_frame - t0 when 1 <= A <= T, else all-zero."""
    _check_frame(t0, annotation)
    zeros = (0,) * horizon.steps
    if not annotation.has_accident:
        return LabelVector(values=zeros)
    if t0 > annotation.accident_frame:
        raise ValueError(
            f"t0={t0} is after the accident of '{annotation.video_id}' "
            f"({annotation.accident_frame}); training samples end at the accident"
        )

    offset = annotation.accident_frame - t0
    if not 1 <= offset <= horizon.steps:
        return LabelVector(values=zeros)
    values = tuple(1 if step == offset else 0 for step in range(1, horizon.steps + 1))
    return LabelVector(values=values, accident_offset=offset)


def sample_training_snippets(
    annotation: VideoAnnotation, horizon: HorizonConfig, count: int, seed: int
) -> list[SnippetWindow]:
    """Draw ``count`` windows uniformly, with replacement, ending at or before the accident."""
    if not annotation.has_accident:
        raise ValueError(f"video '{annotation.video_id}' has no accident to sample before")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    first_end = horizon.snippet_len - 1
    last_end = annotation.accident_frame
    if last_end < first_end:
        raise ValueError(
            f"video '{annotation.video_id}' is too short for a {horizon.snippet_len}-frame "
            f"snippet before its accident at frame {last_end}"
        )
    rng = np.random.default_rng(seed)
    ends = rng.integers(first_end, last_end + 1, size=count)
    return [
        SnippetWindow(start_frame=int(end) - first_end, end_frame=int(end)) for end in ends
    ]


def sliding_windows(
    annotation: VideoAnnotation, horizon: HorizonConfig, stride: int = 1
) -> list[SnippetWindow]:
    """Test-time windows across the whole video, before, during and after the accident."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    first_end = horizon.snippet_len - 1
    if annotation.num_frames < horizon.snippet_len:
        raise ValueError(
            f"video '{annotation.video_id}' has {annotation.num_frames} frames, "
            f"shorter than snippet length {horizon.snippet_len}"
        )
    return [
        SnippetWindow(start_frame=end - first_end, end_frame=end)
        for end in range(first_end, annotation.num_frames, stride)
    ]


def weighted_bce_loss(
    scores: Sequence[float], labels: LabelVector, w_plus: float = 10.0
) -> float:
    """Positive-weighted binary cross-entropy averaged over the T horizon steps."""
    if w_plus <= 0:
        raise ValueError(f"w_plus must be > 0, got {w_plus}")
    predicted = np.asarray(scores, dtype=np.float64)
    if predicted.shape != (labels.steps,):
        raise ValueError(
            f"score length {predicted.size} does not match label length {labels.steps}"
        )
    predicted = np.clip(predicted, LOG_EPSILON, 1.0 - LOG_EPSILON)
    target = np.asarray(labels.values, dtype=bool)

    total = float(np.log1p(-predicted[~target]).sum())
    if labels.accident_offset is not None:
        total += w_plus * math.log(predicted[labels.accident_offset - 1])
    return max(0.0, -total / labels.steps)


def frame_alarm_series(matrix: ScoreMatrix, tau: float) -> dict[int, bool]:
    """Alarm at t0 iff any a_i(t0) >= tau; frames without a row never alarm."""
    return {
        int(frame): bool(peak >= tau) for frame, peak in zip(matrix.frames, matrix.peaks)
    }


def collapse_to_risk(matrix: ScoreMatrix) -> ScoreMatrix:
    """Per-frame risk r_0(t0) = max_i a_i(t0), the T=1 form of ``matrix``."""
    return ScoreMatrix.from_arrays(
        matrix.video_id, matrix.frames.copy(), matrix.peaks.reshape(-1, 1).copy()
    )
