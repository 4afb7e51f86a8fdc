"""Windowing, hold-out splitting, normalization, and corpus statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from armsense.frames import (
    CHANNEL_NAMES,
    HandSide,
    MotionType,
    RecordingSession,
    SensorFrame,
)

NUM_CLASSES = len(MotionType)
DEFAULT_ROWS_PER_SECOND = 7.0
DEFAULT_REPS_PER_MOTION = 8.0
NORMALIZATION_EPS = 1e-8


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SequenceWindow:
    """A fixed-length block of frames projected onto the selected features.

    values is a (T, F) float64 matrix of raw (un-normalized) channel values.
    """

    values: np.ndarray
    label: MotionType
    side: HandSide
    respondent: str
    session_id: str
    offset: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise DatasetError("window values must be finite")


@dataclass(frozen=True)
class DatasetStats:
    """Per-side corpus statistics and the quotients derived from them."""

    total_rows: int
    students: int
    motions: int
    rows_per_second: float
    reps_per_motion: float

    @property
    def rows_per_student(self) -> float:
        return self.total_rows / self.students

    @property
    def rows_per_student_per_motion(self) -> float:
        return self.rows_per_student / self.motions

    @property
    def seconds_per_student_per_motion(self) -> float:
        return self.rows_per_student_per_motion / self.rows_per_second

    @property
    def seconds_per_repetition(self) -> float:
        return self.seconds_per_student_per_motion / self.reps_per_motion

    @property
    def rounded_rows_per_student_per_motion(self) -> int:
        return round(self.rows_per_student_per_motion)


def stats_from_counts(
    total_rows: int,
    students: int,
    motions: int = NUM_CLASSES,
    rows_per_second: float = DEFAULT_ROWS_PER_SECOND,
    reps_per_motion: float = DEFAULT_REPS_PER_MOTION,
) -> DatasetStats:
    if students <= 0 or motions <= 0:
        raise DatasetError("student and motion counts must be positive")
    if rows_per_second <= 0 or reps_per_motion <= 0:
        raise DatasetError("rate parameters must be positive")
    return DatasetStats(
        total_rows=int(total_rows),
        students=int(students),
        motions=int(motions),
        rows_per_second=float(rows_per_second),
        reps_per_motion=float(reps_per_motion),
    )


def stats_by_side(
    frames: Iterable[SensorFrame],
    students: int | None = None,
    motions: int | None = None,
) -> dict[HandSide, DatasetStats]:
    """Compute per-side statistics from raw frames.

    Student and motion counts default to the distinct respondents and
    motions observed on each side.
    """
    rows: dict[HandSide, int] = {}
    respondents: dict[HandSide, set[str]] = {}
    seen_motions: dict[HandSide, set[MotionType]] = {}
    for frame in frames:
        rows[frame.side] = rows.get(frame.side, 0) + 1
        respondents.setdefault(frame.side, set()).add(frame.respondent)
        seen_motions.setdefault(frame.side, set()).add(frame.motion_type)
    if not rows:
        raise DatasetError("no frames supplied")
    return {
        side: stats_from_counts(
            total_rows=rows[side],
            students=students if students is not None else len(respondents[side]),
            motions=motions if motions is not None else len(seen_motions[side]),
        )
        for side in sorted(rows, key=lambda s: s.value)
    }


def recommended_window(per_side: Mapping[HandSide, DatasetStats]) -> int:
    """Cross-side mean of the rounded per-motion row averages, rounded."""
    if not per_side:
        raise DatasetError("need statistics for at least one side")
    rounded = [stats.rounded_rows_per_student_per_motion for stats in per_side.values()]
    return round(sum(rounded) / len(rounded))


def one_hot(motion: MotionType) -> np.ndarray:
    vec = np.zeros(NUM_CLASSES, dtype=np.float64)
    vec[motion.index] = 1.0
    return vec


def window_count(n_frames: int, length: int, stride: int) -> int:
    """Number of windows a session of n_frames yields."""
    if n_frames < length:
        return 0
    return (n_frames - length) // stride + 1


def window_sessions(
    sessions: Sequence[RecordingSession],
    feature_names: Sequence[str],
    length: int = 150,
    stride: int | None = None,
) -> list[SequenceWindow]:
    """Cut every session into fixed-length windows of the selected features.

    Windows start at offsets 0, stride, 2*stride, ... within a session;
    the trailing remainder shorter than `length` is dropped, and no window
    ever spans a session boundary. Output is ordered by
    (respondent, session_id, offset).
    """
    if length < 1:
        raise DatasetError(f"window length must be >= 1, got {length}")
    stride = length if stride is None else stride
    if stride < 1:
        raise DatasetError(f"stride must be >= 1, got {stride}")
    unknown = [name for name in feature_names if name not in CHANNEL_NAMES]
    if unknown:
        raise DatasetError(f"unknown feature names: {unknown}")
    columns = [CHANNEL_NAMES.index(name) for name in feature_names]

    windows: list[SequenceWindow] = []
    for session in sorted(sessions, key=lambda s: (s.respondent, s.started_at, s.session_id)):
        n = len(session.frames)
        if n < length:
            continue
        matrix = np.array([f.channels() for f in session.frames], dtype=np.float64)[:, columns]
        for offset in range(0, n - length + 1, stride):
            windows.append(
                SequenceWindow(
                    values=matrix[offset : offset + length].copy(),
                    label=session.motion_type,
                    side=session.side,
                    respondent=session.respondent,
                    session_id=session.session_id,
                    offset=offset,
                )
            )
    return windows


@dataclass
class SplitDataset:
    """Stratified hold-out split with train-only normalization statistics.

    Window values stay raw; `train_arrays` / `test_arrays` apply the
    z-score using the train statistics, so normalization happens exactly
    once on the way into the model.
    """

    train: list[SequenceWindow]
    test: list[SequenceWindow]
    feature_names: tuple[str, ...]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    ratio: float
    seed: int

    def _arrays(self, windows: list[SequenceWindow]) -> tuple[np.ndarray, np.ndarray]:
        if not windows:
            f = len(self.feature_names)
            return np.zeros((0, 0, f)), np.zeros((0,), dtype=np.int64)
        x = np.stack([w.values for w in windows]).astype(np.float64)
        x = (x - self.feature_mean) / (self.feature_std + NORMALIZATION_EPS)
        y = np.array([w.label.index for w in windows], dtype=np.int64)
        return x, y

    def train_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self._arrays(self.train)

    def test_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self._arrays(self.test)


def split_holdout(
    windows: Sequence[SequenceWindow],
    ratio: float,
    seed: int,
    feature_names: Sequence[str],
) -> SplitDataset:
    """Deterministic, class-stratified hold-out split.

    Train counts are assigned by largest remainder so the overall train
    fraction is within one window of `ratio` and every class is within one
    window of it too. Normalization statistics come from train windows only.
    """
    if not windows:
        raise DatasetError("cannot split an empty window set")
    if not 0.0 < ratio < 1.0:
        raise DatasetError(f"ratio must be in (0, 1), got {ratio}")

    rng = np.random.Generator(np.random.PCG64(seed))
    by_class: dict[int, list[int]] = {}
    for idx, window in enumerate(windows):
        by_class.setdefault(window.label.index, []).append(idx)

    class_ids = sorted(by_class)
    total_train = round(ratio * len(windows))
    floors = {c: int(np.floor(ratio * len(by_class[c]))) for c in class_ids}
    remainder = total_train - sum(floors.values())
    fractions = sorted(
        class_ids,
        key=lambda c: (-(ratio * len(by_class[c]) - floors[c]), c),
    )
    take = dict(floors)
    for c in fractions[: max(0, remainder)]:
        if take[c] < len(by_class[c]):
            take[c] += 1

    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in class_ids:
        members = np.array(by_class[c], dtype=np.int64)
        order = rng.permutation(len(members))
        shuffled = members[order]
        train_idx.extend(int(i) for i in shuffled[: take[c]])
        test_idx.extend(int(i) for i in shuffled[take[c] :])

    train = [windows[i] for i in sorted(train_idx)]
    test = [windows[i] for i in sorted(test_idx)]
    if not train:
        raise DatasetError("split produced an empty training set")

    stacked = np.concatenate([w.values for w in train], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)

    return SplitDataset(
        train=train,
        test=test,
        feature_names=tuple(feature_names),
        feature_mean=mean,
        feature_std=std,
        ratio=float(ratio),
        seed=int(seed),
    )


# Intermediate dataset file: a JSON header line followed by one JSON
# record per window, so a windowed corpus can be reused without re-parsing
# the frame CSV.

DATASET_SCHEMA_VERSION = 1


def save_windows(path: str | Path, windows: Sequence[SequenceWindow], feature_names: Sequence[str], seed: int) -> None:
    if windows and windows[0].values.shape[1] != len(feature_names):
        raise DatasetError("feature_names length does not match window width")
    header = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "window": int(windows[0].values.shape[0]) if windows else 0,
        "features": list(feature_names),
        "seed": int(seed),
        "count": len(windows),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for w in windows:
            record = {
                "respondent": w.respondent,
                "session_id": w.session_id,
                "offset": w.offset,
                "motion_type": w.label.label,
                "side": w.side.value,
                "values": w.values.tolist(),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_windows(path: str | Path) -> tuple[list[SequenceWindow], tuple[str, ...], int]:
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise DatasetError("empty dataset file")
        header = json.loads(header_line)
        if header.get("schema_version") != DATASET_SCHEMA_VERSION:
            raise DatasetError(f"unsupported dataset schema_version {header.get('schema_version')!r}")
        features = tuple(header["features"])
        windows: list[SequenceWindow] = []
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            windows.append(
                SequenceWindow(
                    values=np.array(rec["values"], dtype=np.float64),
                    label=MotionType.from_label(rec["motion_type"]),
                    side=HandSide.from_label(rec["side"]),
                    respondent=rec["respondent"],
                    session_id=rec["session_id"],
                    offset=int(rec["offset"]),
                )
            )
    return windows, features, int(header["seed"])
