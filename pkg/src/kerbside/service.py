"""Local annotation and export HTTP service.

Serves batches of unlabeled frames for the keyboard-driven annotation UI,
persists ranged label decisions into the append-only LabelStore, reports
progress, and exports the current accessibility map. Localhost-only by
default; images are served by frame id, never by arbitrary path, so a raw
capture directory is never exposed.
"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Mapping, Optional

from fastapi import FastAPI, Query
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotation import AnnotationBatch, LabelStore, UnknownBatch, apply_labels, propose_batches
from .errors import KerbsideError
from .export import accessibility_feature_collection
from .imaging.classify import Prediction, PredictionSet
from .imaging.io import image_content_type
from .ingest import run_length_stats
from .segments import NoSegmentableFrames, derive_segments
from .taxonomy import (
    Accessibility,
    CLASS_ORDER,
    FrameSet,
    SurfaceClass,
    parse_surface_class,
    replace_frame,
)

DEFAULT_MAX_BATCH = 64


class BatchResponse(BaseModel):
    batch_id: str
    frame_ids: list[str]
    image_urls: list[str]
    classes: list[str] = Field(description="selectable classes, canonical order")


class LabelDecision(BaseModel):
    start: int
    end: int
    label: str


class LabelSubmission(BaseModel):
    decisions: list[LabelDecision]
    annotator: str = "ui"


class ProgressResponse(BaseModel):
    labeled: int
    total: int
    mean_run_length: float


_STATUS_BY_CODE = {
    "unknown_batch": 404,
    "unknown_frame_id": 404,
    "missing_image": 404,
    "unknown_class": 422,
    "range_gap": 422,
    "range_overlap": 422,
}


class ServiceState:
    def __init__(
        self,
        frames: FrameSet,
        image_root: str | Path,
        store: LabelStore,
        max_batch: int = DEFAULT_MAX_BATCH,
        collapse: Mapping[SurfaceClass, Accessibility] | None = None,
    ):
        self.frames = frames
        self.image_root = Path(image_root)
        self.store = store
        self.max_batch = max_batch
        self.collapse = collapse
        self.batches: dict[str, AnnotationBatch] = {}

    def effective_label(self, frame_id: str) -> Optional[SurfaceClass]:
        """Session labels override manifest labels."""
        label = self.store.current.get(frame_id)
        if label is not None:
            return label
        frame = self.frames.by_id(frame_id)
        return frame.true_label if frame else None

    def labeled_ids(self) -> set[str]:
        ids = {f.frame_id for f in self.frames if f.true_label is not None}
        ids |= self.store.labeled_ids()
        return ids

    def labeled_frame_set(self) -> FrameSet:
        """Frames that currently have a label, carrying the effective label."""
        out = []
        for f in self.frames:
            label = self.effective_label(f.frame_id)
            if label is not None:
                out.append(replace_frame(f, true_label=label))
        return self.frames.with_frames(out)


def create_app(state: ServiceState, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="kerbside annotation service")

    @app.exception_handler(KerbsideError)
    async def kerbside_error_handler(_, exc: KerbsideError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content=exc.to_dict())

    @app.get("/api/batches/next", response_model=BatchResponse)
    def next_batch(max_frames: Optional[int] = Query(default=None, ge=1, alias="max")):
        limit = max_frames or state.max_batch
        batches = propose_batches(state.frames, limit, labeled=state.store.labeled_ids())
        if not batches:
            return Response(status_code=204)
        batch = batches[0]
        state.batches[batch.batch_id] = batch
        return BatchResponse(
            batch_id=batch.batch_id,
            frame_ids=list(batch.frame_ids),
            image_urls=[f"/api/frames/{fid}/image" for fid in batch.frame_ids],
            classes=[c.value for c in CLASS_ORDER],
        )

    @app.post("/api/batches/{batch_id}/labels", status_code=204)
    def submit_labels(batch_id: str, submission: LabelSubmission):
        batch = state.batches.get(batch_id)
        if batch is None:
            raise UnknownBatch(batch_id)
        decisions = [
            (d.start, d.end, parse_surface_class(d.label)) for d in submission.decisions
        ]
        apply_labels(
            state.store,
            batch,
            decisions,
            annotator=submission.annotator,
            timestamp_ms=int(time.time() * 1000),
        )
        return Response(status_code=204)

    @app.get("/api/frames/{frame_id}/image")
    def frame_image(frame_id: str):
        frame = state.frames.by_id(frame_id)
        if frame is None:
            return JSONResponse(
                status_code=404,
                content={"error": "unknown_frame_id", "message": f"unknown frame: {frame_id}"},
            )
        path = (state.image_root / frame.image_ref).resolve()
        root = state.image_root.resolve()
        if root not in path.parents and path != root:
            return JSONResponse(
                status_code=404,
                content={"error": "missing_image", "message": "image outside image root"},
            )
        if not path.is_file():
            return JSONResponse(
                status_code=404,
                content={"error": "missing_image", "message": f"no image for frame {frame_id}"},
            )
        return FileResponse(path, media_type=image_content_type(path))

    @app.get("/api/progress", response_model=ProgressResponse)
    def progress():
        labeled_set = state.labeled_frame_set()
        labels = [f.true_label for f in labeled_set.time_ordered()]
        mean_run = 0.0
        if labels:
            _, mean_run = run_length_stats(labels)
        return ProgressResponse(
            labeled=len(labels), total=len(state.frames), mean_run_length=mean_run
        )

    @app.get("/api/export/geojson")
    def export_map():
        labeled_set = state.labeled_frame_set()
        try:
            segments = derive_segments(labeled_set, collapse=state.collapse)
        except NoSegmentableFrames:
            return {"type": "FeatureCollection", "features": []}
        predictions = PredictionSet(
            predictions={
                fid: Prediction(label=state.effective_label(fid))
                for seg in segments
                for fid in seg.frames
            }
        )
        return accessibility_feature_collection(segments, predictions, state.collapse)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
