"""Frame and session domain types plus the canonical CSV wire format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from armsense.rotations import Quat, Vec3


class MotionType(Enum):
    """The nine supported strength-training motions, indexed 0..8."""

    OVERHEAD_PRESS = 0
    BICEP_CURLS = 1
    LATERAL_RAISE = 2
    OVERHEAD_TRICEPS = 3
    DIAGONAL_SHOULDER_RAISE = 4
    FORWARD_PUNCHES = 5
    REVERSE_FLY = 6
    SEATED_ROWS = 7
    MODIFIED_SKULL_CRUSHERS = 8

    @property
    def index(self) -> int:
        return self.value

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "MotionType":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            valid = ", ".join(m.label for m in cls)
            raise ValueError(f"unknown motion type {label!r}; expected one of: {valid}") from None

    @classmethod
    def from_index(cls, index: int) -> "MotionType":
        try:
            return cls(index)
        except ValueError:
            raise ValueError(f"motion index must be 0..8, got {index!r}") from None


class HandSide(Enum):
    LEFT = "left"
    RIGHT = "right"

    @classmethod
    def from_label(cls, label: str) -> "HandSide":
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise ValueError(f"unknown side {label!r}; expected 'left' or 'right'") from None


# Sensor groups in canonical column order; the availability mask assigns
# one bit per group (bit i set = group i was genuinely measured).
SENSOR_GROUPS: tuple[tuple[str, int], ...] = (
    ("accelerometer", 3),
    ("magnetometer", 3),
    ("gyroscope", 3),
    ("linear_accelerometer", 3),
    ("gravity", 3),
    ("euler", 3),
    ("quaternion", 4),
    ("inverse_quaternion", 4),
    ("relative_orientation", 3),
)

GROUP_NAMES: tuple[str, ...] = tuple(name for name, _ in SENSOR_GROUPS)
FULL_AVAILABILITY: int = (1 << len(SENSOR_GROUPS)) - 1

_AXES = "xyzw"

CHANNEL_NAMES: tuple[str, ...] = tuple(
    f"{group}_{_AXES[i]}" for group, width in SENSOR_GROUPS for i in range(width)
)
NUM_CHANNELS = len(CHANNEL_NAMES)  # 29

CSV_COLUMNS: tuple[str, ...] = ("respondent_name", "timestamp") + CHANNEL_NAMES + ("motion_type", "side")


class SessionStatus(Enum):
    OPEN = "open"
    FINISHED = "finished"
    SYNCED = "synced"


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped sample of all 29 sensor channels plus identity metadata.

    Vector groups are stored as tuples in (x, y, z[, w]) order. Timestamps
    are fractional Unix seconds (UTC). Groups that the capture device could
    not measure are zero-filled and have their availability bit cleared.
    """

    respondent: str
    timestamp: float
    accelerometer: Vec3
    magnetometer: Vec3
    gyroscope: Vec3
    linear_accelerometer: Vec3
    gravity: Vec3
    euler: Vec3
    quaternion: Quat
    inverse_quaternion: Quat
    relative_orientation: Vec3
    motion_type: MotionType
    side: HandSide
    availability_mask: int = FULL_AVAILABILITY

    def group(self, name: str) -> tuple[float, ...]:
        return getattr(self, name)

    def is_available(self, group: str) -> bool:
        return bool(self.availability_mask & (1 << GROUP_NAMES.index(group)))

    def channels(self) -> tuple[float, ...]:
        """All 29 numeric channels in canonical column order."""
        return (
            self.accelerometer
            + self.magnetometer
            + self.gyroscope
            + self.linear_accelerometer
            + self.gravity
            + self.euler
            + self.quaternion
            + self.inverse_quaternion
            + self.relative_orientation
        )

    def channel(self, name: str) -> float:
        return self.channels()[CHANNEL_NAMES.index(name)]


@dataclass(frozen=True)
class Violation:
    field: str
    message: str


def validate_frame(frame: SensorFrame) -> list[Violation]:
    """Check every frame invariant; returns [] when the frame is valid.

    Violations are reported in field order, so the first entry is the
    first violated field. Never raises.
    """
    violations: list[Violation] = []
    if not frame.respondent:
        violations.append(Violation("respondent", "respondent code must be non-empty"))
    elif any(ch in frame.respondent for ch in ',"\n\r'):
        violations.append(Violation("respondent", "respondent code must not contain commas, quotes, or newlines"))

    if not (math.isfinite(frame.timestamp) and frame.timestamp > 0):
        violations.append(Violation("timestamp", f"timestamp must be positive and finite, got {frame.timestamp!r}"))

    for group, width in SENSOR_GROUPS:
        values = frame.group(group)
        if len(values) != width:
            violations.append(Violation(group, f"{group} must have {width} components"))
            continue
        if not all(math.isfinite(v) for v in values):
            violations.append(Violation(group, f"{group} contains a non-finite value"))
            continue
        if group == "quaternion" and frame.is_available("quaternion"):
            if not sum(v * v for v in values) > 0.0:
                violations.append(Violation(group, "available quaternion must have positive norm"))

    if not 0 <= frame.availability_mask <= FULL_AVAILABILITY:
        violations.append(Violation("availability_mask", f"mask must be within 0..{FULL_AVAILABILITY}"))

    return violations


def format_number(value: float) -> str:
    """Round-trip-exact decimal rendering (shortest repr)."""
    return repr(float(value))


def csv_header() -> str:
    return ",".join(CSV_COLUMNS)


def frame_to_csv_row(frame: SensorFrame) -> str:
    """Serialize a frame as the canonical 33-column CSV row.

    The availability mask is not a column; on parse, a group is treated
    as unavailable iff all of its channels are exactly zero.
    """
    parts = [frame.respondent, format_number(frame.timestamp)]
    parts.extend(format_number(v) for v in frame.channels())
    parts.append(frame.motion_type.label)
    parts.append(frame.side.value)
    return ",".join(parts)


class CsvFormatError(ValueError):
    pass


def parse_csv_row(row: str) -> SensorFrame:
    """Inverse of frame_to_csv_row."""
    parts = row.rstrip("\n").split(",")
    if len(parts) != len(CSV_COLUMNS):
        raise CsvFormatError(f"expected {len(CSV_COLUMNS)} columns, got {len(parts)}")
    respondent = parts[0]
    try:
        timestamp = float(parts[1])
        values = [float(p) for p in parts[2 : 2 + NUM_CHANNELS]]
    except ValueError as exc:
        raise CsvFormatError(f"non-numeric value in row: {exc}") from None
    motion = MotionType.from_label(parts[-2])
    side = HandSide.from_label(parts[-1])

    groups: dict[str, tuple[float, ...]] = {}
    mask = 0
    offset = 0
    for bit, (group, width) in enumerate(SENSOR_GROUPS):
        chunk = tuple(values[offset : offset + width])
        offset += width
        groups[group] = chunk
        if any(v != 0.0 for v in chunk):
            mask |= 1 << bit

    return SensorFrame(
        respondent=respondent,
        timestamp=timestamp,
        motion_type=motion,
        side=side,
        availability_mask=mask,
        **groups,
    )


def parse_csv(text: str) -> list[SensorFrame]:
    """Parse a full export document (header + rows)."""
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise CsvFormatError("empty document")
    if lines[0] != csv_header():
        raise CsvFormatError("missing or unexpected header row")
    return [parse_csv_row(ln) for ln in lines[1:]]


@dataclass
class RecordingSession:
    """A labeled start/stop capture of frames for one respondent, motion, and side."""

    session_id: str
    respondent: str
    motion_type: MotionType
    side: HandSide
    started_at: float
    finished_at: float | None = None
    status: SessionStatus = SessionStatus.OPEN
    frames: list[SensorFrame] = field(default_factory=list)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def duration_s(self) -> float:
        if not self.frames:
            return 0.0
        return self.frames[-1].timestamp - self.frames[0].timestamp

    def check_consistency(self) -> list[Violation]:
        """Session-level invariants: labels uniform, timestamps non-decreasing."""
        problems: list[Violation] = []
        last_ts = -math.inf
        for i, frame in enumerate(self.frames):
            if frame.respondent != self.respondent:
                problems.append(Violation("respondent", f"frame {i} respondent differs from session"))
            if frame.motion_type is not self.motion_type:
                problems.append(Violation("motion_type", f"frame {i} motion differs from session"))
            if frame.side is not self.side:
                problems.append(Violation("side", f"frame {i} side differs from session"))
            if frame.timestamp < last_ts:
                problems.append(Violation("timestamp", f"frame {i} timestamp decreases"))
            last_ts = frame.timestamp
        return problems


def group_frames_into_sessions(frames: Iterable[SensorFrame]) -> list[RecordingSession]:
    """Group an ordered frame stream into sessions.

    Frames belong to the same session while (respondent, motion, side)
    stays constant; each maximal run becomes one session whose start is
    its first frame timestamp. This is the inverse of export
    concatenation for stores where each labeling appears in one session.
    """
    sessions: list[RecordingSession] = []
    current: RecordingSession | None = None
    for frame in frames:
        key = (frame.respondent, frame.motion_type, frame.side)
        if current is None or key != (current.respondent, current.motion_type, current.side):
            current = RecordingSession(
                session_id=f"{frame.respondent}-{frame.motion_type.label}-{frame.side.value}-{len(sessions):04d}",
                respondent=frame.respondent,
                motion_type=frame.motion_type,
                side=frame.side,
                started_at=frame.timestamp,
                status=SessionStatus.FINISHED,
            )
            sessions.append(current)
        current.frames.append(frame)
    for session in sessions:
        session.finished_at = session.frames[-1].timestamp if session.frames else session.started_at
    return sessions


# JSON wire format (HTTP batches and the store's append-only log).

_IDENTITY_KEYS = ("respondent", "motion_type", "side")


class FrameFieldError(ValueError):
    """A frame dict failed structural validation; carries the offending field."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(message)
        self.field = fieldname


def frame_to_json_dict(frame: SensorFrame, include_identity: bool = False) -> dict:
    doc: dict = {"timestamp": frame.timestamp}
    for group, _ in SENSOR_GROUPS:
        doc[group] = list(frame.group(group))
    doc["availability_mask"] = frame.availability_mask
    if include_identity:
        doc["respondent"] = frame.respondent
        doc["motion_type"] = frame.motion_type.label
        doc["side"] = frame.side.value
    return doc


def frame_from_json_dict(
    doc: dict,
    respondent: str,
    motion_type: MotionType,
    side: HandSide,
) -> SensorFrame:
    """Build a frame from its wire dict, filling identity from the session.

    Identity keys present in the dict must match the session labels.
    Raises FrameFieldError naming the first offending field.
    """
    if not isinstance(doc, dict):
        raise FrameFieldError("frame", "frame must be a JSON object")

    for key, expected in zip(_IDENTITY_KEYS, (respondent, motion_type.label, side.value)):
        if key in doc and doc[key] != expected:
            raise FrameFieldError(key, f"{key} {doc[key]!r} does not match session {expected!r}")

    ts = doc.get("timestamp")
    if not isinstance(ts, (int, float)) or isinstance(ts, bool):
        raise FrameFieldError("timestamp", "timestamp must be a number")

    groups: dict[str, tuple[float, ...]] = {}
    for group, width in SENSOR_GROUPS:
        raw = doc.get(group)
        if raw is None:
            raise FrameFieldError(group, f"missing sensor group {group!r}")
        if not isinstance(raw, (list, tuple)) or len(raw) != width:
            raise FrameFieldError(group, f"{group} must be a list of {width} numbers")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            raise FrameFieldError(group, f"{group} must contain only numbers")
        groups[group] = tuple(float(v) for v in raw)

    mask = doc.get("availability_mask", FULL_AVAILABILITY)
    if not isinstance(mask, int) or isinstance(mask, bool) or not 0 <= mask <= FULL_AVAILABILITY:
        raise FrameFieldError("availability_mask", f"availability_mask must be an integer in 0..{FULL_AVAILABILITY}")

    return SensorFrame(
        respondent=respondent,
        timestamp=float(ts),
        motion_type=motion_type,
        side=side,
        availability_mask=mask,
        **groups,
    )


def frames_to_csv(frames: Iterable[SensorFrame]) -> Iterator[str]:
    """Header plus one row per frame, each line newline-terminated."""
    yield csv_header() + "\n"
    for frame in frames:
        yield frame_to_csv_row(frame) + "\n"
