"""HTTP review server backing the annotation UI.

Serves video metadata, single frames as PNG, detection documents, and
annotation documents over a corpus directory.  Annotation writes are
validated, serialized per video, and atomic (temp file + rename); nothing
on disk changes through any GET.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import cv2
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .annotations import ground_truth_from_dict
from .errors import SchemaError, SlidetransError
from .frames import load_sidecar, read_frame

log = logging.getLogger(__name__)


@dataclass
class VideoEntry:
    video_id: str
    directory: Path
    source: Path  # image directory or raw stream file
    fps: float | None
    frame_count: int | None
    crop: dict[str, Any] | None

    @property
    def detections_path(self) -> Path:
        return self.directory / "detections.json"

    @property
    def annotations_path(self) -> Path:
        return self.directory / "annotations.json"

    @property
    def ground_truth_path(self) -> Path:
        return self.directory / "ground_truth.json"


def _scan_entry(directory: Path) -> VideoEntry | None:
    streams = sorted(directory.glob("*.sltf"))
    has_images = any(directory.glob("00000000.*"))
    if not streams and not has_images:
        return None
    source = directory if has_images else streams[0]
    sidecar = load_sidecar(source)
    frame_count = sidecar.get("frame_count")
    if frame_count is None and has_images:
        frame_count = sum(1 for p in directory.iterdir()
                          if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    return VideoEntry(
        video_id=directory.name,
        directory=directory,
        source=source,
        fps=sidecar.get("fps"),
        frame_count=frame_count,
        crop=sidecar.get("crop"),
    )


def scan_corpus(corpus_dir: str | Path) -> dict[str, VideoEntry]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise SchemaError(f"corpus directory {root} does not exist")
    entries: dict[str, VideoEntry] = {}
    for child in sorted(root.iterdir()):
        if not child.is_dir():
            continue
        try:
            entry = _scan_entry(child)
        except SlidetransError as exc:
            log.warning("skipping corrupt corpus entry %s: %s", child.name, exc)
            continue
        if entry is not None:
            entries[entry.video_id] = entry
    return entries


class _FrameCache:
    """Tiny LRU of encoded PNG frames keyed by (video, index)."""

    def __init__(self, capacity: int = 128):
        self._items: OrderedDict[tuple[str, int], bytes] = OrderedDict()
        self._capacity = capacity
        self._lock = threading.Lock()

    def get(self, key: tuple[str, int]) -> bytes | None:
        with self._lock:
            if key not in self._items:
                return None
            self._items.move_to_end(key)
            return self._items[key]

    def put(self, key: tuple[str, int], value: bytes) -> None:
        with self._lock:
            self._items[key] = value
            self._items.move_to_end(key)
            while len(self._items) > self._capacity:
                self._items.popitem(last=False)


def create_app(corpus_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    entries = scan_corpus(corpus_dir)
    app = FastAPI(title="slidetrans review", version="1")
    cache = _FrameCache()
    write_locks: dict[str, threading.Lock] = {vid: threading.Lock() for vid in entries}

    def not_found(detail: str) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": detail})

    def entry_or_none(video_id: str) -> VideoEntry | None:
        return entries.get(video_id)

    @app.get("/api/videos")
    def list_videos() -> list[dict[str, Any]]:
        return [
            {"id": e.video_id, "frame_count": e.frame_count, "fps": e.fps}
            for e in entries.values()
        ]

    @app.get("/api/videos/{video_id}")
    def video_detail(video_id: str) -> Any:
        e = entry_or_none(video_id)
        if e is None:
            return not_found(f"unknown video {video_id!r}")
        return {
            "id": e.video_id,
            "frame_count": e.frame_count,
            "fps": e.fps,
            "crop": e.crop,
            "has_detections": e.detections_path.is_file(),
            "has_annotations": e.annotations_path.is_file(),
            "has_ground_truth": e.ground_truth_path.is_file(),
        }

    @app.get("/api/videos/{video_id}/frames/{index}")
    def frame_png(video_id: str, index: int) -> Any:
        e = entry_or_none(video_id)
        if e is None:
            return not_found(f"unknown video {video_id!r}")
        if index < 0 or (e.frame_count is not None and index >= e.frame_count):
            return not_found(f"frame {index} out of range")
        cached = cache.get((video_id, index))
        if cached is None:
            try:
                frame = read_frame(e.source, index)
            except SlidetransError as exc:
                return not_found(str(exc))
            ok, buf = cv2.imencode(".png", cv2.cvtColor(frame.data, cv2.COLOR_RGB2BGR))
            if not ok:
                return JSONResponse(status_code=500,
                                    content={"detail": "png encoding failed"})
            cached = buf.tobytes()
            cache.put((video_id, index), cached)
        return Response(content=cached, media_type="image/png")

    def serve_json(path: Path, what: str) -> Any:
        if not path.is_file():
            return not_found(f"no {what} for this video")
        return JSONResponse(content=json.loads(path.read_text(encoding="utf-8")))

    @app.get("/api/videos/{video_id}/detections")
    def detections(video_id: str) -> Any:
        e = entry_or_none(video_id)
        if e is None:
            return not_found(f"unknown video {video_id!r}")
        return serve_json(e.detections_path, "detections")

    @app.get("/api/videos/{video_id}/annotations")
    def annotations(video_id: str) -> Any:
        e = entry_or_none(video_id)
        if e is None:
            return not_found(f"unknown video {video_id!r}")
        return serve_json(e.annotations_path, "annotations")

    @app.put("/api/videos/{video_id}/annotations")
    async def put_annotations(video_id: str, request: Request) -> Any:
        e = entry_or_none(video_id)
        if e is None:
            return not_found(f"unknown video {video_id!r}")
        try:
            payload = await request.json()
        except json.JSONDecodeError as exc:
            return JSONResponse(status_code=422,
                                content={"detail": f"body is not valid JSON: {exc}"})
        try:
            doc = ground_truth_from_dict(payload)
        except SchemaError as exc:
            return JSONResponse(status_code=422,
                                content={"detail": str(exc), "field": exc.field})
        if doc.video != video_id:
            return JSONResponse(
                status_code=422,
                content={"detail": f"payload video {doc.video!r} does not match "
                                   f"{video_id!r}", "field": "video"},
            )
        # Extra keys (review flags like added_by_user) are preserved verbatim.
        body = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        lock = write_locks[video_id]
        with lock:
            tmp = e.annotations_path.with_name(f".annotations.{os.getpid()}.tmp")
            tmp.write_text(body, encoding="utf-8")
            os.replace(tmp, e.annotations_path)
        return {"ok": True, "transitions": len(doc.transitions)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index() -> Response:
            items = "".join(
                f"<li><code>{e.video_id}</code> ({e.frame_count} frames)</li>"
                for e in entries.values()
            )
            html = (
                "<!doctype html><title>slidetrans review</title>"
                "<h1>slidetrans review API</h1>"
                "<p>No UI bundle found; the REST API is live.</p>"
                f"<ul>{items}</ul>"
            )
            return Response(content=html, media_type="text/html")

    return app
