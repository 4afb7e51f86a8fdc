"""Windowing arithmetic, the statistics quotients, and the stratified split."""

import numpy as np
import pytest

from armsense.dataset import (
    DatasetError,
    load_windows,
    one_hot,
    recommended_window,
    save_windows,
    split_holdout,
    stats_by_side,
    stats_from_counts,
    window_count,
    window_sessions,
)
from armsense.frames import HandSide, MotionType, RecordingSession, SessionStatus
from conftest import random_frame


def _session(rng, motion, count, respondent="S01", side=HandSide.LEFT, start=1000.0, session_id=None):
    frames = [
        random_frame(rng, motion=motion, side=side, respondent=respondent, timestamp=start + i / 7)
        for i in range(count)
    ]
    return RecordingSession(
        session_id=session_id or f"{respondent}-{motion.label}-{count}",
        respondent=respondent,
        motion_type=motion,
        side=side,
        started_at=start,
        status=SessionStatus.FINISHED,
        frames=frames,
    )


def test_left_side_statistics_match_published_quotients():
    stats = stats_from_counts(total_rows=36_792, students=25, motions=9)
    assert round(stats.rows_per_student, 2) == 1471.68
    assert round(stats.rows_per_student_per_motion, 2) == 163.52
    assert round(stats.seconds_per_student_per_motion, 2) == 23.36
    assert round(stats.seconds_per_repetition, 2) == 2.92
    assert stats.rounded_rows_per_student_per_motion == 164


def test_right_side_statistics_match_published_quotients():
    stats = stats_from_counts(total_rows=32_296, students=25, motions=9)
    assert round(stats.rows_per_student, 2) == 1291.84
    assert round(stats.rows_per_student_per_motion, 2) == 143.54
    assert round(stats.seconds_per_student_per_motion, 2) == 20.51
    assert round(stats.seconds_per_repetition, 2) == 2.56
    assert stats.rounded_rows_per_student_per_motion == 144


def test_recommended_window_is_cross_side_mean_of_rounded():
    per_side = {
        HandSide.LEFT: stats_from_counts(36_792, 25, 9),
        HandSide.RIGHT: stats_from_counts(32_296, 25, 9),
    }
    assert recommended_window(per_side) == 154


def test_stats_rejects_degenerate_counts():
    with pytest.raises(DatasetError):
        stats_from_counts(100, students=0, motions=9)
    with pytest.raises(DatasetError):
        stats_from_counts(100, students=5, motions=0)


def test_stats_by_side_infers_counts(frame_rng):
    frames = []
    for r in ("S01", "S02"):
        for motion in (MotionType.BICEP_CURLS, MotionType.SEATED_ROWS):
            frames.extend(
                random_frame(frame_rng, motion=motion, respondent=r, timestamp=100.0 + i)
                for i in range(10)
            )
    per_side = stats_by_side(frames)
    stats = per_side[HandSide.LEFT]
    assert stats.total_rows == 40
    assert stats.students == 2
    assert stats.motions == 2
    assert stats.rows_per_student == 20.0


def test_one_hot():
    v = one_hot(MotionType.OVERHEAD_PRESS)
    assert v.tolist() == [1, 0, 0, 0, 0, 0, 0, 0, 0]
    v = one_hot(MotionType.MODIFIED_SKULL_CRUSHERS)
    assert v.tolist() == [0, 0, 0, 0, 0, 0, 0, 0, 1]
    for motion in MotionType:
        assert one_hot(motion).sum() == 1.0


def test_window_count_against_bruteforce_enumeration():
    rng = np.random.Generator(np.random.PCG64(5))
    for _ in range(300):
        n = int(rng.integers(0, 1000))
        length = int(rng.integers(1, 200))
        stride = int(rng.integers(1, 200))
        # oracle: enumerate all start offsets
        expected = len([o for o in range(0, max(0, n - length) + 1, stride) if o + length <= n])
        if n < length:
            expected = 0
        assert window_count(n, length, stride) == expected


def test_window_arithmetic_examples(frame_rng):
    session = _session(frame_rng, MotionType.BICEP_CURLS, 1472)
    windows = window_sessions([session], ("accelerometer_x",), length=150, stride=150)
    assert len(windows) == 9
    dropped = 1472 - 9 * 150
    assert dropped == 122

    short = _session(frame_rng, MotionType.BICEP_CURLS, 149)
    assert window_sessions([short], ("accelerometer_x",), length=150) == []

    overlapping = _session(frame_rng, MotionType.BICEP_CURLS, 300)
    windows = window_sessions([overlapping], ("accelerometer_x",), length=150, stride=75)
    assert [w.offset for w in windows] == [0, 75, 150]


def test_windows_never_span_sessions(frame_rng):
    a = _session(frame_rng, MotionType.BICEP_CURLS, 160, start=1000.0, session_id="a")
    b = _session(frame_rng, MotionType.SEATED_ROWS, 160, start=2000.0, session_id="b")
    windows = window_sessions([a, b], ("accelerometer_x", "gyroscope_z"), length=150)
    assert len(windows) == 2
    by_id = {w.session_id: w for w in windows}
    assert by_id["a"].label is MotionType.BICEP_CURLS
    assert by_id["b"].label is MotionType.SEATED_ROWS
    # values come from the right session's frames
    first = np.array([f.channel("accelerometer_x") for f in a.frames[:150]])
    np.testing.assert_array_equal(by_id["a"].values[:, 0], first)


def test_window_feature_projection(frame_rng):
    session = _session(frame_rng, MotionType.BICEP_CURLS, 150)
    windows = window_sessions([session], ("gravity_y", "euler_z"), length=150)
    assert windows[0].values.shape == (150, 2)
    expected = np.array([[f.channel("gravity_y"), f.channel("euler_z")] for f in session.frames])
    np.testing.assert_array_equal(windows[0].values, expected)
    with pytest.raises(DatasetError):
        window_sessions([session], ("bogus_channel",), length=150)


def _balanced_windows(rng, per_class=10, length=20):
    sessions = []
    for i, motion in enumerate(MotionType):
        for j in range(per_class):
            sessions.append(
                _session(rng, motion, length, respondent=f"S{j:02d}", start=1000.0 * i + j,
                         session_id=f"{motion.label}-{j}")
            )
    return window_sessions(sessions, ("accelerometer_x", "magnetometer_y"), length=length)


def test_split_is_stratified_and_deterministic(frame_rng):
    windows = _balanced_windows(frame_rng)
    split = split_holdout(windows, 0.8, seed=13, feature_names=("accelerometer_x", "magnetometer_y"))
    assert len(split.train) == 72
    assert len(split.test) == 18
    for motion in MotionType:
        assert sum(1 for w in split.train if w.label is motion) == 8
        assert sum(1 for w in split.test if w.label is motion) == 2

    again = split_holdout(windows, 0.8, seed=13, feature_names=("accelerometer_x", "magnetometer_y"))
    assert [id(w) for w in again.train] == [id(w) for w in split.train]
    assert [id(w) for w in again.test] == [id(w) for w in split.test]

    different = split_holdout(windows, 0.8, seed=14, feature_names=("accelerometer_x", "magnetometer_y"))
    assert [id(w) for w in different.train] != [id(w) for w in split.train]


def test_split_train_test_disjoint_and_ratio(frame_rng):
    windows = _balanced_windows(frame_rng, per_class=7)
    split = split_holdout(windows, 0.8, seed=1, feature_names=("accelerometer_x", "magnetometer_y"))
    train_ids = {id(w) for w in split.train}
    test_ids = {id(w) for w in split.test}
    assert not train_ids & test_ids
    assert len(train_ids) + len(test_ids) == len(windows)
    assert abs(len(split.train) - 0.8 * len(windows)) <= 1.0
    for motion in MotionType:
        n_class = sum(1 for w in windows if w.label is motion)
        n_train = sum(1 for w in split.train if w.label is motion)
        assert abs(n_train - 0.8 * n_class) <= 1.0


def test_normalization_moments_against_two_pass_oracle(frame_rng):
    windows = _balanced_windows(frame_rng)
    names = ("accelerometer_x", "magnetometer_y")
    split = split_holdout(windows, 0.8, seed=3, feature_names=names)
    x_train, _ = split.train_arrays()
    flat = x_train.reshape(-1, len(names))
    # oracle: plain two-pass moments of the normalized values
    mean = flat.sum(axis=0) / flat.shape[0]
    std = np.sqrt(((flat - mean) ** 2).sum(axis=0) / flat.shape[0])
    np.testing.assert_allclose(mean, 0.0, atol=1e-9)
    np.testing.assert_allclose(std, 1.0, atol=1e-6)

    # test windows are scaled with the *train* statistics
    x_test, _ = split.test_arrays()
    raw_test = np.stack([w.values for w in split.test])
    np.testing.assert_allclose(
        x_test, (raw_test - split.feature_mean) / (split.feature_std + 1e-8), atol=0
    )


def test_split_rejects_bad_input(frame_rng):
    with pytest.raises(DatasetError):
        split_holdout([], 0.8, seed=0, feature_names=("accelerometer_x",))
    windows = _balanced_windows(frame_rng, per_class=2)
    with pytest.raises(DatasetError):
        split_holdout(windows, 1.0, seed=0, feature_names=("accelerometer_x", "magnetometer_y"))


def test_dataset_file_roundtrip(tmp_path, frame_rng):
    windows = _balanced_windows(frame_rng, per_class=2, length=12)
    names = ("accelerometer_x", "magnetometer_y")
    path = tmp_path / "windows.jsonl"
    save_windows(path, windows, names, seed=9)
    loaded, features, seed = load_windows(path)
    assert features == names
    assert seed == 9
    assert len(loaded) == len(windows)
    for got, want in zip(loaded, windows):
        np.testing.assert_array_equal(got.values, want.values)
        assert got.label is want.label
        assert got.side is want.side
        assert got.respondent == want.respondent
