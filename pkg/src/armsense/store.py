"""Durable session store: per-session append-only batch logs plus index metadata.

Layout under the data root:

    sessions/<id>.meta.json   session metadata, rewritten atomically
    sessions/<id>.log         newline-delimited JSON, one accepted batch per line

A batch is validated fully before anything is written, then appended as a
single line and fsynced before the call returns. A truncated trailing line
(crash mid-write) is ignored on load, so an un-acknowledged batch simply
disappears and can be retried; acknowledged batches survive any restart.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from armsense.frames import (
    HandSide,
    MotionType,
    RecordingSession,
    SensorFrame,
    SessionStatus,
    FrameFieldError,
    frame_from_json_dict,
    frame_to_csv_row,
    frame_to_json_dict,
    csv_header,
    validate_frame,
)

log = logging.getLogger(__name__)


class StoreError(Exception):
    pass


class UnknownSessionError(StoreError):
    pass


class SessionConflictError(StoreError):
    """Operation not allowed in the session's current status."""


class StoreCorruptError(StoreError):
    pass


class BatchValidationError(StoreError):
    """A batch was rejected; nothing was written.

    index is the offending frame's position within the batch (None for
    batch-level problems), field names the first violated field.
    """

    def __init__(self, message: str, field: str, index: int | None = None):
        super().__init__(message)
        self.field = field
        self.index = index


@dataclass
class SessionMeta:
    session_id: str
    respondent: str
    motion_type: MotionType
    side: HandSide
    started_at: float
    finished_at: float | None
    status: SessionStatus

    def to_json_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "respondent": self.respondent,
            "motion_type": self.motion_type.label,
            "side": self.side.value,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status.value,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SessionMeta":
        return cls(
            session_id=doc["session_id"],
            respondent=doc["respondent"],
            motion_type=MotionType.from_label(doc["motion_type"]),
            side=HandSide.from_label(doc["side"]),
            started_at=float(doc["started_at"]),
            finished_at=None if doc.get("finished_at") is None else float(doc["finished_at"]),
            status=SessionStatus(doc["status"]),
        )


class SessionStore:
    """Thread-safe session persistence with at-least-once batch idempotency.

    Appends within one session are serialized by a per-session lock;
    different sessions append concurrently. Exports read completed log
    lines only, so they always see a consistent prefix.
    """

    def __init__(self, root: str | Path, durable: bool = True):
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.durable = durable
        self._index: dict[str, SessionMeta] = {}
        self._applied_seqs: dict[str, set[int]] = {}
        self._index_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}
        self._load_index()

    # -- filesystem helpers -------------------------------------------------

    def _meta_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.meta.json"

    def _log_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.log"

    def _load_index(self) -> None:
        for meta_file in sorted(self.sessions_dir.glob("*.meta.json")):
            try:
                meta = SessionMeta.from_json_dict(json.loads(meta_file.read_text()))
            except (ValueError, KeyError) as exc:
                raise StoreCorruptError(f"unreadable session metadata {meta_file.name}: {exc}") from exc
            self._index[meta.session_id] = meta

    def _write_meta(self, meta: SessionMeta) -> None:
        path = self._meta_path(meta.session_id)
        tmp = path.with_suffix(".json.tmp")
        data = json.dumps(meta.to_json_dict(), sort_keys=True)
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(data)
            fh.flush()
            if self.durable:
                os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._index_lock:
            lock = self._session_locks.get(session_id)
            if lock is None:
                lock = self._session_locks[session_id] = threading.Lock()
            return lock

    def _read_batches(self, session_id: str) -> list[dict]:
        """All complete batch records, tolerating a truncated final line."""
        path = self._log_path(session_id)
        if not path.exists():
            return []
        batches: list[dict] = []
        lines = path.read_bytes().split(b"\n")
        # A complete append always ends with a newline, so the final split
        # element is either empty or a torn partial write.
        for i, line in enumerate(lines):
            if not line:
                continue
            try:
                batches.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    log.warning("dropping truncated trailing batch line in %s", path.name)
                    continue
                raise StoreCorruptError(f"corrupt batch record at line {i + 1} of {path.name}") from None
        return batches

    def _applied_for(self, session_id: str) -> set[int]:
        seqs = self._applied_seqs.get(session_id)
        if seqs is None:
            seqs = {
                b["batch_seq"]
                for b in self._read_batches(session_id)
                if b.get("batch_seq") is not None
            }
            self._applied_seqs[session_id] = seqs
        return seqs

    # -- public API ---------------------------------------------------------

    def create_session(
        self,
        respondent: str,
        motion_type: MotionType,
        side: HandSide,
        started_at: float | None = None,
    ) -> SessionMeta:
        if not isinstance(respondent, str) or not respondent.strip():
            raise BatchValidationError("respondent code must be non-empty", field="respondent")
        if any(ch in respondent for ch in ',"\n\r'):
            raise BatchValidationError("respondent code must not contain commas, quotes, or newlines", field="respondent")
        if not isinstance(motion_type, MotionType):
            raise BatchValidationError("motion_type must be a valid motion label", field="motion_type")
        if not isinstance(side, HandSide):
            raise BatchValidationError("side must be 'left' or 'right'", field="side")

        meta = SessionMeta(
            session_id=uuid.uuid4().hex,
            respondent=respondent.strip(),
            motion_type=motion_type,
            side=side,
            started_at=time.time() if started_at is None else float(started_at),
            finished_at=None,
            status=SessionStatus.OPEN,
        )
        with self._index_lock:
            self._index[meta.session_id] = meta
        self._write_meta(meta)
        return meta

    def get_session(self, session_id: str) -> SessionMeta:
        with self._index_lock:
            meta = self._index.get(session_id)
        if meta is None:
            raise UnknownSessionError(f"unknown session {session_id!r}")
        return meta

    def list_sessions(self) -> list[SessionMeta]:
        with self._index_lock:
            return sorted(self._index.values(), key=lambda m: (m.respondent, m.started_at, m.session_id))

    def append_frames(
        self,
        session_id: str,
        frames: list[SensorFrame] | list[dict],
        batch_seq: int | None = None,
    ) -> int:
        """Validate and durably append a batch; returns the accepted count.

        A batch whose batch_seq was already applied is acknowledged with
        count 0 and no write. Any invalid frame rejects the whole batch
        before anything touches disk.
        """
        meta = self.get_session(session_id)
        lock = self._session_lock(session_id)
        with lock:
            if meta.status is not SessionStatus.OPEN:
                raise SessionConflictError(f"session {session_id} is {meta.status.value}; no further frames accepted")
            if not frames:
                raise BatchValidationError("batch must contain at least one frame", field="frames")
            if batch_seq is not None and (not isinstance(batch_seq, int) or isinstance(batch_seq, bool)):
                raise BatchValidationError("batch_seq must be an integer", field="batch_seq")

            resolved: list[SensorFrame] = []
            for i, item in enumerate(frames):
                if isinstance(item, SensorFrame):
                    frame = item
                    for key, got, expected in (
                        ("respondent", frame.respondent, meta.respondent),
                        ("motion_type", frame.motion_type, meta.motion_type),
                        ("side", frame.side, meta.side),
                    ):
                        if got != expected:
                            raise BatchValidationError(
                                f"frame {i} {key} does not match session", field=key, index=i
                            )
                else:
                    try:
                        frame = frame_from_json_dict(item, meta.respondent, meta.motion_type, meta.side)
                    except FrameFieldError as exc:
                        raise BatchValidationError(f"frame {i}: {exc}", field=exc.field, index=i) from None
                violations = validate_frame(frame)
                if violations:
                    first = violations[0]
                    raise BatchValidationError(
                        f"frame {i}: {first.message}", field=first.field, index=i
                    )
                resolved.append(frame)

            applied = self._applied_for(session_id)
            if batch_seq is not None and batch_seq in applied:
                return 0

            record = {
                "batch_seq": batch_seq,
                "frames": [frame_to_json_dict(f) for f in resolved],
            }
            line = json.dumps(record, separators=(",", ":")) + "\n"
            with open(self._log_path(session_id), "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                if self.durable:
                    os.fsync(fh.fileno())
            if batch_seq is not None:
                applied.add(batch_seq)
            return len(resolved)

    def finish_session(self, session_id: str) -> dict:
        """Close the session; returns {"frame_count", "duration_s"}."""
        meta = self.get_session(session_id)
        lock = self._session_lock(session_id)
        with lock:
            if meta.status is not SessionStatus.OPEN:
                raise SessionConflictError(f"session {session_id} already {meta.status.value}")
            first_ts: float | None = None
            last_ts: float | None = None
            count = 0
            for frame in self.iter_frames(session_id):
                if first_ts is None:
                    first_ts = frame.timestamp
                last_ts = frame.timestamp
                count += 1
            meta.status = SessionStatus.FINISHED
            meta.finished_at = time.time()
            self._write_meta(meta)
            duration = 0.0 if count == 0 else float(last_ts - first_ts)
            return {"frame_count": count, "duration_s": duration}

    def iter_frames(self, session_id: str) -> Iterator[SensorFrame]:
        """Frames of one session in acceptance order."""
        meta = self.get_session(session_id)
        for batch in self._read_batches(session_id):
            for doc in batch["frames"]:
                yield frame_from_json_dict(doc, meta.respondent, meta.motion_type, meta.side)

    def session_frames(self, session_id: str) -> RecordingSession:
        meta = self.get_session(session_id)
        session = RecordingSession(
            session_id=meta.session_id,
            respondent=meta.respondent,
            motion_type=meta.motion_type,
            side=meta.side,
            started_at=meta.started_at,
            finished_at=meta.finished_at,
            status=meta.status,
            frames=list(self.iter_frames(session_id)),
        )
        return session

    def export_rows(
        self,
        side: HandSide | None = None,
        motion: MotionType | None = None,
        respondent: str | None = None,
    ) -> Iterator[str]:
        """CSV export of all finished sessions matching the filter.

        Yields the header then one newline-terminated row per frame,
        ordered by (respondent, session start, frame order) with the
        session id as a deterministic tiebreaker.
        """
        yield csv_header() + "\n"
        for meta in self.list_sessions():
            if meta.status is SessionStatus.OPEN:
                continue
            if side is not None and meta.side is not side:
                continue
            if motion is not None and meta.motion_type is not motion:
                continue
            if respondent is not None and meta.respondent != respondent:
                continue
            for frame in self.iter_frames(meta.session_id):
                yield frame_to_csv_row(frame) + "\n"

    def export_csv(self, **filters) -> str:
        return "".join(self.export_rows(**filters))
