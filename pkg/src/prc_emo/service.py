"""HTTP JSON API backing the annotation UI.

Serves the label-masked verification workflow: annotators pull pending
samples with dialogue context, submit one of the five emotion labels, and
watch agreement/deficit tallies. Original labels never leave the store.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import HTMLResponse
from pydantic import BaseModel

from .augmentation import AnnotationStore
from .errors import DataError

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>annotation service</title></head>
<body><h1>Annotation service</h1>
<p>API: GET /api/queue?annotator=ID, POST /api/verdict, GET /api/progress,
GET /api/agreement.</p>
<p>Build the frontend and pass --ui to serve the full interface.</p>
</body></html>
"""


class VerdictIn(BaseModel):
    sample_id: str
    annotator: str
    label: str
    token: Optional[str] = None  # client idempotency token, echoed back


def create_app(store: AnnotationStore, ui_dir: Optional[str | Path] = None) -> FastAPI:
    app = FastAPI(title="annotation-service")

    @app.get("/api/queue")
    def queue(annotator: str = Query(..., min_length=1)) -> dict:
        return {"annotator": annotator, "items": store.pending_for(annotator)}

    @app.post("/api/verdict")
    def verdict(body: VerdictIn) -> dict:
        try:
            sample = store.record_verdict(body.sample_id, body.annotator, body.label)
        except DataError as exc:
            message = str(exc)
            if "unknown sample" in message:
                raise HTTPException(status_code=404, detail=message) from exc
            if "not one of the five categories" in message:
                raise HTTPException(status_code=422, detail=message) from exc
            raise HTTPException(status_code=409, detail=message) from exc
        return {
            "sample_id": sample.sample_id,
            "status": sample.status,
            "your_label": body.label,
            "token": body.token,
        }

    @app.get("/api/progress")
    def progress() -> dict:
        return store.progress()

    @app.get("/api/agreement")
    def agreement() -> dict:
        return store.agreement()

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return _FALLBACK_PAGE

    return app


def serve(
    store: AnnotationStore,
    host: str = "127.0.0.1",
    port: int = 8700,
    ui_dir: Optional[str | Path] = None,
) -> None:
    import uvicorn

    uvicorn.run(create_app(store, ui_dir=ui_dir), host=host, port=port, log_level="info")
