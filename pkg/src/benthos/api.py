"""Local HTTP service exposing one review session to the browser UI.

The session store on disk stays the single source of truth: every mutation
goes through the review module's fold-and-append path and is acknowledged
only after the audit event is durably on disk. Reads serve the applied
state; a write arriving while another write is in flight gets 409 rather
than a queue (one inspector, local deployment).
"""

from __future__ import annotations

import io
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .detfuse import DEBRIS_CLASSES, VIEW_SLICES, embed_2d
from .errors import FormatError
from .ppm import read_ppm
from .review import SessionStore

THUMB_MAX_PX = 96

CLASS_COLORS = {
    "bottle": (66, 135, 245),
    "plastic": (240, 200, 66),
    "anchor": (120, 120, 130),
    "tire": (40, 40, 40),
    "metal": (160, 82, 45),
    "other": (150, 111, 214),
    "starfish": (235, 110, 160),
}


class MutationBody(BaseModel):
    ids: list[str] = Field(min_length=1)
    actor: str = "inspector"


class ReclassifyBody(MutationBody):
    new_class: str = Field(alias="class")

    model_config = {"populate_by_name": True}


def create_app(
    session_dir: str | Path,
    frames_dir: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    store = SessionStore(session_dir)
    session = store.open()
    frames_dir = Path(frames_dir) if frames_dir else None
    thumb_cache = Path(session_dir) / "thumbs"
    write_lock = threading.Lock()

    app = FastAPI(title="benthos review api")
    app.state.write_lock = write_lock  # exposed so tests can simulate contention
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"https?://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    def detection_rows() -> list[dict]:
        rows = []
        for det_id in sorted(session.detections):
            det = session.detections[det_id]
            state = session.states[det_id]
            rows.append(
                {
                    "id": det_id,
                    "x": det.embed_x,
                    "y": det.embed_y,
                    "thumb": f"/api/thumb/{det_id}",
                    "class": state["class"],
                    "state": state["state"],
                    "uncertainty": det.uncertainty,
                    "scores": det.raw.scores,
                    "spectrum_covered": det.spectrum_covered,
                }
            )
        return rows

    @app.get("/api/session")
    def get_session():
        return {
            "session_id": session.session_id,
            "classes": list(DEBRIS_CLASSES),
            "active_view": session.active_view,
            "audit_cursor": len(session.events),
            "detections": detection_rows(),
        }

    @app.get("/api/field")
    def get_field(view: str = "pattern"):
        if view not in VIEW_SLICES:
            return JSONResponse(
                status_code=400,
                content={"error": f"view must be one of {sorted(VIEW_SLICES)}"},
            )
        ids = sorted(session.detections)
        features = [session.detections[i].features[VIEW_SLICES[view]] for i in ids]
        coords = embed_2d(features) if ids else np.zeros((0, 2))
        session.set_active_view(view)
        return {
            "view": view,
            "points": [
                {"id": det_id, "x": float(x), "y": float(y)}
                for det_id, (x, y) in zip(ids, coords)
            ],
        }

    @app.get("/api/audit")
    def get_audit():
        return {"events": [e.to_json_dict() for e in session.events]}

    @app.get("/api/export")
    def get_export():
        return {
            "session_id": session.session_id,
            "detections": session.export_final(),
        }

    def render_thumb(det_id: str) -> bytes:
        from PIL import Image

        det = session.detections[det_id]
        patch = None
        if frames_dir is not None:
            frame_path = frames_dir / f"{det.raw.frame_id}.ppm"
            if frame_path.exists():
                frame = read_ppm(frame_path)
                x, y, w, h = (int(round(v)) for v in det.raw.bbox)
                x0, y0 = max(0, x), max(0, y)
                x1 = min(frame.shape[1], x + w)
                y1 = min(frame.shape[0], y + h)
                if x1 > x0 and y1 > y0:
                    patch = frame[y0:y1, x0:x1]
        if patch is None:
            color = CLASS_COLORS.get(session.states[det_id]["class"], (90, 90, 90))
            patch = np.tile(np.array(color, dtype=np.uint8), (24, 24, 1))
        image = Image.fromarray(patch)
        image.thumbnail((THUMB_MAX_PX, THUMB_MAX_PX))
        buffer = io.BytesIO()
        image.save(buffer, format="PNG")
        return buffer.getvalue()

    @app.get("/api/thumb/{det_id}")
    def get_thumb(det_id: str):
        if det_id not in session.detections:
            return JSONResponse(status_code=404, content={"error": f"unknown id {det_id}"})
        thumb_cache.mkdir(exist_ok=True)
        cached = thumb_cache / f"{det_id}.png"
        if not cached.exists():
            cached.write_bytes(render_thumb(det_id))
        return FileResponse(cached, media_type="image/png")

    def mutate(operation, *op_args) -> Response:
        if not write_lock.acquire(blocking=False):
            return JSONResponse(
                status_code=409, content={"error": "another write is in flight"}
            )
        try:
            event = operation(*op_args)
        except KeyError as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})
        except FormatError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        finally:
            write_lock.release()
        return JSONResponse(
            {"applied": event.to_json_dict(), "audit_cursor": len(session.events)}
        )

    @app.post("/api/reclassify")
    def post_reclassify(body: ReclassifyBody):
        return mutate(session.reclassify, body.ids, body.new_class, body.actor)

    @app.post("/api/reject")
    def post_reject(body: MutationBody):
        return mutate(session.reject, body.ids, body.actor)

    @app.post("/api/restore")
    def post_restore(body: MutationBody):
        return mutate(session.restore, body.ids, body.actor)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
