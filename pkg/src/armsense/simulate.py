"""Deterministic synthetic sensor sessions for the nine training motions.

Each motion class is a quasi-periodic sinusoid mixture with a distinct
repetition tempo, dominant accelerometer_x harmonic, and amplitude, so the
classes are separable by construction. A subset of channels is phase-locked
to the accelerometer_x oscillation (the feature-selection anchor), with the
locked set differing between hands, so the Pearson filter produces a
non-trivial side-asymmetric report. Orientation channels are generated as
Euler angles and the quaternion / inverse-quaternion / gravity groups are
derived from them, never synthesized independently.

Generation is pure: (respondent, motion, side, seed) fully determine every
frame, including timestamps.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from armsense.frames import (
    FULL_AVAILABILITY,
    HandSide,
    MotionType,
    RecordingSession,
    SensorFrame,
    SessionStatus,
)
from armsense.rotations import euler_to_quaternion, gravity_from_euler, quaternion_inverse

RATE_HZ = 7.0
REPS_PER_SESSION = 8
BASE_TIME = 1_700_000_000.0

# Right-hand sessions run shorter on average, mirroring the rounded
# per-motion row averages of the two hands (144 vs 164).
SIDE_DURATION_FACTOR = {HandSide.LEFT: 1.0, HandSide.RIGHT: 144.0 / 164.0}
SIDE_AMPLITUDE_FACTOR = {HandSide.LEFT: 1.0, HandSide.RIGHT: 0.9}

DURATION_JITTER = 0.10
AMPLITUDE_JITTER = 0.10


@dataclass(frozen=True)
class MotionProfile:
    """Per-class signal constants.

    The repetition tempos are pairwise distinct and every class drives the
    anchor channel at its own harmonic of the repetition frequency, so
    dominant accelerometer_x frequencies are spread well apart (~0.33 Hz
    gaps) and stay below the 3.5 Hz Nyquist limit of the 7 Hz capture rate.
    posture_offset models the different average arm attitude each exercise
    holds; it rides on the anchor stream, so the channels locked to the
    anchor share it and their correlations survive.
    """

    motion: MotionType
    rep_duration_s: float
    dominant_harmonic: int
    anchor_amplitude: float
    posture_offset: float
    secondary_phase: float

    @property
    def base_frequency(self) -> float:
        return 1.0 / self.rep_duration_s

    @property
    def anchor_frequency(self) -> float:
        return self.dominant_harmonic * self.base_frequency


MOTION_PROFILES: dict[MotionType, MotionProfile] = {
    motion: MotionProfile(
        motion=motion,
        rep_duration_s=2.98 + 0.005 * motion.index,
        dominant_harmonic=motion.index + 1,
        anchor_amplitude=2.0 + 0.25 * motion.index,
        posture_offset=0.75 * (motion.index - 4),
        secondary_phase=2.0 * math.pi * motion.index / 9.0,
    )
    for motion in MotionType
}


def _child_seed(*parts) -> int:
    text = "|".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _rng(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_child_seed(*parts)))


def _channel_plan(profile: MotionProfile, side: HandSide, anchor_amp: float, posture_amp: float, resp_amp: float):
    """(name, baseline, amplitude, frequency, anchor_locked, offset_gain, noise_sigma) rows.

    anchor_locked channels share the anchor oscillation's frequency and
    per-session phase, which is what makes them correlate with it; their
    offset_gain scales the class posture offset into the channel's units.
    """
    f = profile.base_frequency
    nu = profile.anchor_frequency
    right = side is HandSide.RIGHT
    return (
        ("accelerometer_x", 0.0, anchor_amp, nu, True, posture_amp, 0.30),
        ("accelerometer_y", 0.0, 1.0 * resp_amp, f, False, 0.0, 0.30),
        ("accelerometer_z", 9.3, 0.8 * resp_amp, f, False, 0.0, 0.30),
        ("magnetometer_x", 30.0, 0.8 * anchor_amp if right else 1.1, nu if right else f, right, 0.8 * posture_amp if right else 0.0, 0.40),
        ("magnetometer_y", 12.0, 0.9, f, False, 0.0, 0.40),
        ("magnetometer_z", -25.0, 0.7, f, False, 0.0, 0.40),
        ("gyroscope_x", 0.0, 1.4 * resp_amp, f, False, 0.0, 0.20),
        ("gyroscope_y", 0.0, 1.1 * resp_amp, f, False, 0.0, 0.20),
        ("gyroscope_z", 0.0, 0.9 * resp_amp, f, False, 0.0, 0.20),
        ("linear_accelerometer_x", 0.0, 0.8 * anchor_amp, nu, True, 0.8 * posture_amp, 0.25),
        ("linear_accelerometer_y", 0.0, 0.7 * resp_amp, f, False, 0.0, 0.25),
        ("linear_accelerometer_z", 0.0, 0.6 * resp_amp, f, False, 0.0, 0.25),
        ("euler_x", 0.0, 0.25, nu, True, 0.20, 0.03),
        ("euler_y", 0.0, 0.20, f, False, 0.0, 0.03),
        ("euler_z", 0.0, 0.30, nu if not right else f, not right, 0.25 if not right else 0.0, 0.03),
        ("relative_orientation_x", 0.0, 0.30, f, False, 0.0, 0.05),
        ("relative_orientation_y", 0.0, 0.30, f, False, 0.0, 0.05),
        ("relative_orientation_z", 0.0, 0.25 * resp_amp, nu, True, 2.00, 0.05),
    )


def synth_session(respondent: str, motion: MotionType, side: HandSide, seed: int) -> RecordingSession:
    """Generate one finished session of ~8 repetitions at 7 frames/s.

    The respondent code carries its own duration and amplitude jitter
    (same for all of that respondent's sessions); everything else varies
    per (respondent, motion, side).
    """
    profile = MOTION_PROFILES[motion]

    resp_rng = _rng(seed, respondent)
    duration_jitter = resp_rng.uniform(1.0 - DURATION_JITTER, 1.0 + DURATION_JITTER)
    resp_amp = resp_rng.uniform(1.0 - AMPLITUDE_JITTER, 1.0 + AMPLITUDE_JITTER)

    rng = _rng(seed, respondent, motion.label, side.value)
    started_at = BASE_TIME + float(_child_seed(seed, respondent, motion.label, side.value) % 2_592_000)

    duration = REPS_PER_SESSION * profile.rep_duration_s * SIDE_DURATION_FACTOR[side] * duration_jitter
    n = int(round(duration * RATE_HZ))
    t = np.arange(n) / RATE_HZ

    anchor_amp = profile.anchor_amplitude * resp_amp * SIDE_AMPLITUDE_FACTOR[side]
    # Posture offsets carry class identity; keep them free of the
    # respondent amplitude jitter so class means stay tight.
    posture_amp = profile.anchor_amplitude * SIDE_AMPLITUDE_FACTOR[side]
    anchor_phase = rng.uniform(0.0, 2.0 * math.pi)

    signals: dict[str, np.ndarray] = {}
    for name, baseline, amplitude, freq, locked, offset_gain, sigma in _channel_plan(
        profile, side, anchor_amp, posture_amp, resp_amp
    ):
        phase = anchor_phase if locked else rng.uniform(0.0, 2.0 * math.pi)
        wave = baseline + offset_gain * profile.posture_offset
        wave = wave + amplitude * np.sin(2.0 * math.pi * freq * t + phase)
        if name == "relative_orientation_z":
            wave = wave + 0.1 * resp_amp * np.sin(
                2.0 * math.pi * (2.0 * profile.anchor_frequency) * t + profile.secondary_phase
            )
        signals[name] = wave + rng.normal(0.0, sigma, n)

    frames: list[SensorFrame] = []
    for j in range(n):
        euler = (
            float(signals["euler_x"][j]),
            float(signals["euler_y"][j]),
            float(signals["euler_z"][j]),
        )
        quaternion = euler_to_quaternion(euler)
        frames.append(
            SensorFrame(
                respondent=respondent,
                timestamp=started_at + j / RATE_HZ,
                accelerometer=(
                    float(signals["accelerometer_x"][j]),
                    float(signals["accelerometer_y"][j]),
                    float(signals["accelerometer_z"][j]),
                ),
                magnetometer=(
                    float(signals["magnetometer_x"][j]),
                    float(signals["magnetometer_y"][j]),
                    float(signals["magnetometer_z"][j]),
                ),
                gyroscope=(
                    float(signals["gyroscope_x"][j]),
                    float(signals["gyroscope_y"][j]),
                    float(signals["gyroscope_z"][j]),
                ),
                linear_accelerometer=(
                    float(signals["linear_accelerometer_x"][j]),
                    float(signals["linear_accelerometer_y"][j]),
                    float(signals["linear_accelerometer_z"][j]),
                ),
                gravity=gravity_from_euler(euler),
                euler=euler,
                quaternion=quaternion,
                inverse_quaternion=quaternion_inverse(quaternion),
                relative_orientation=(
                    float(signals["relative_orientation_x"][j]),
                    float(signals["relative_orientation_y"][j]),
                    float(signals["relative_orientation_z"][j]),
                ),
                motion_type=motion,
                side=side,
                availability_mask=FULL_AVAILABILITY,
            )
        )

    return RecordingSession(
        session_id=f"sim-{respondent}-{motion.label}-{side.value}",
        respondent=respondent,
        motion_type=motion,
        side=side,
        started_at=started_at,
        finished_at=frames[-1].timestamp if frames else started_at,
        status=SessionStatus.FINISHED,
        frames=frames,
    )


def respondent_codes(n: int) -> list[str]:
    return [f"S{i + 1:02d}" for i in range(n)]


def synth_corpus(
    n_respondents: int,
    sides: Sequence[HandSide] = (HandSide.LEFT, HandSide.RIGHT),
    seed: int = 0,
) -> list[RecordingSession]:
    """n_respondents x 9 motions x len(sides) sessions, deterministically seeded."""
    if n_respondents < 1:
        raise ValueError("need at least one respondent")
    sessions: list[RecordingSession] = []
    for code in respondent_codes(n_respondents):
        for side in sides:
            for motion in MotionType:
                sessions.append(synth_session(code, motion, side, seed))
    return sessions
