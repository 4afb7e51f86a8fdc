"""HTTP face of the session store: JSON endpoints under /api/v1.

Handlers are plain sync functions (run in the framework's worker pool);
all shared state lives in the SessionStore, which does its own locking.
"""

from __future__ import annotations

from fastapi import Body, FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from armsense.frames import HandSide, MotionType
from armsense.store import (
    BatchValidationError,
    SessionConflictError,
    SessionStore,
    UnknownSessionError,
)


def _error(status_code: int, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status_code, content={"error": message, **extra})


def create_app(store: SessionStore) -> FastAPI:
    app = FastAPI(title="armsense ingest service", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    @app.get("/api/v1/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        respondent = payload.get("respondent")
        if not isinstance(respondent, str) or not respondent.strip():
            return _error(400, "respondent must be a non-empty string", field="respondent")
        try:
            motion = MotionType.from_label(str(payload.get("motion_type")))
        except ValueError as exc:
            return _error(400, str(exc), field="motion_type")
        try:
            side = HandSide.from_label(str(payload.get("side")))
        except ValueError as exc:
            return _error(400, str(exc), field="side")
        try:
            meta = store.create_session(respondent, motion, side)
        except BatchValidationError as exc:
            return _error(400, str(exc), field=exc.field)
        return JSONResponse(status_code=201, content={"session_id": meta.session_id})

    @app.post("/api/v1/sessions/{session_id}/frames", status_code=202)
    def append_frames(session_id: str, payload: dict = Body(...)):
        frames = payload.get("frames")
        if not isinstance(frames, list):
            return _error(400, "frames must be a list", field="frames")
        batch_seq = payload.get("batch_seq")
        try:
            accepted = store.append_frames(session_id, frames, batch_seq=batch_seq)
        except UnknownSessionError as exc:
            return _error(404, str(exc))
        except SessionConflictError as exc:
            return _error(409, str(exc))
        except BatchValidationError as exc:
            return _error(400, str(exc), field=exc.field, index=exc.index)
        return JSONResponse(status_code=202, content={"accepted": accepted})

    @app.post("/api/v1/sessions/{session_id}/finish")
    def finish_session(session_id: str):
        try:
            summary = store.finish_session(session_id)
        except UnknownSessionError as exc:
            return _error(404, str(exc))
        except SessionConflictError as exc:
            return _error(409, str(exc))
        return summary

    @app.get("/api/v1/export.csv")
    def export_csv(side: str | None = None, motion: str | None = None, respondent: str | None = None):
        try:
            side_filter = HandSide.from_label(side) if side else None
            motion_filter = MotionType.from_label(motion) if motion else None
        except ValueError as exc:
            return _error(400, str(exc))
        rows = store.export_rows(side=side_filter, motion=motion_filter, respondent=respondent or None)
        return StreamingResponse(rows, media_type="text/csv; charset=utf-8")

    return app


def serve(data_dir: str, port: int = 8080, host: str = "0.0.0.0") -> None:
    """Run the ingest service until interrupted."""
    import uvicorn

    app = create_app(SessionStore(data_dir))
    uvicorn.run(app, host=host, port=port, log_level="warning")
