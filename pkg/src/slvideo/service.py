"""HTTP front end: search, thesaurus, annotation editing, reindexing.

Every response body is UTF-8 JSON; domain failures share one error
envelope {"code", "message"} with the module error's HTTP status.
Frame images are the only non-JSON responses (static PNG serving).
"""

from __future__ import annotations

import logging
import re
import socket
from dataclasses import asdict
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse

from .annotations import Annotation, Origin, TierRole
from .config import AppConfig
from .errors import (
    BindFailure,
    ConcurrentEditConflict,
    MediaMissing,
    SlvideoError,
    UnknownDocument,
)
from .ids import split_doc_id, validate_component
from .pipeline import Runtime, build_runtime, reindex
from .query import SearchRequest
from .segmenter import find_frames

logger = logging.getLogger(__name__)

USER_ID_PATTERN = re.compile(r"^u(\d+)$")


def _video_payload(video) -> dict:
    return {
        "video_id": video.video_id,
        "media_path": str(video.media_path) if video.media_path else None,
        "fps": video.fps,
        "duration_ms": video.duration_ms,
    }


def _error_response(exc: SlvideoError) -> JSONResponse:
    payload = {"code": exc.code, "message": exc.message}
    if isinstance(exc, ConcurrentEditConflict) and exc.current_revision is not None:
        payload["current_revision"] = exc.current_revision
    return JSONResponse(status_code=exc.http_status, content=payload)


def _next_user_annotation_id(store, video_id: str) -> str:
    taken = [
        a.annotation_id
        for a in store.annotations_for(video_id, include_deleted=True)
    ]
    numbers = [
        int(m.group(1)) for m in map(USER_ID_PATTERN.match, taken) if m
    ]
    return f"u{max(numbers, default=0) + 1}"


def _default_tier(store, video_id: str) -> str:
    for ann in store.annotations_for(video_id):
        if ann.tier_role is TierRole.FACIAL_EXPRESSION:
            return ann.tier_id
    return "USER-FACIAL"


def _annotation_from_body(store, body: dict, video_id: str,
                          annotation_id: str | None) -> Annotation:
    for key in ("gloss", "start_ms", "end_ms"):
        if key not in body:
            raise RequestValidationError(
                [{"loc": ("body", key), "msg": "field required"}])
    if annotation_id is None:
        annotation_id = body.get("annotation_id") or _next_user_annotation_id(
            store, video_id)
    validate_component(annotation_id, "annotation_id")
    tier_id = body.get("tier_id") or _default_tier(store, video_id)
    return Annotation(
        annotation_id=annotation_id,
        video_id=video_id,
        tier_id=tier_id,
        tier_role=TierRole(body.get("tier_role", "FacialExpression")),
        gloss=body["gloss"],
        start_ms=int(body["start_ms"]),
        end_ms=int(body["end_ms"]),
        revision=int(body.get("revision", 0)),
        origin=Origin.USER_CREATED,
    )


def create_app(runtime: Runtime) -> FastAPI:
    app = FastAPI(title="slvideo", docs_url=None, redoc_url=None)
    app.state.runtime = runtime

    @app.exception_handler(SlvideoError)
    async def domain_error(request: Request, exc: SlvideoError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "invalid_request", "message": str(exc.errors())},
        )

    @app.exception_handler(Exception)
    async def unexpected_error(request: Request, exc: Exception):
        logger.exception("unhandled error on %s", request.url.path)
        return JSONResponse(
            status_code=500,
            content={"code": "internal", "message": "internal error"},
        )

    # -- status and corpus browsing

    @app.get("/health")
    def health():
        rt = app.state.runtime
        return {
            "status": "ok",
            "doc_count": rt.index.doc_count,
            "encoder": {"kind": rt.encoder.kind, "dim": rt.encoder.dim},
        }

    @app.get("/videos")
    def videos():
        return [_video_payload(v) for v in app.state.runtime.store.videos()]

    @app.get("/videos/{video_id}/annotations")
    def annotations(video_id: str):
        store = app.state.runtime.store
        store.get_video(video_id)
        return [
            a.to_json_dict(with_video_id=True)
            for a in store.annotations_for(video_id)
        ]

    # -- search

    @app.post("/search")
    def search(body: dict = Body(...)):
        rt = app.state.runtime
        if "mode" not in body:
            raise RequestValidationError(
                [{"loc": ("body", "mode"), "msg": "field required"}])
        try:
            req = SearchRequest(
                mode=body["mode"],
                query_text=body.get("query"),
                k=int(body.get("k", rt.config.default_k)),
            )
        except (TypeError, ValueError) as exc:
            return JSONResponse(
                status_code=400,
                content={"code": "invalid_request", "message": str(exc)},
            )
        return [asdict(r) for r in rt.engine.search_text(req)]

    @app.get("/similar/{doc_id}")
    def similar(doc_id: str, field: str = "all", k: int | None = None):
        rt = app.state.runtime
        split_doc_id(doc_id)  # 400 on ill-formed ids, 404 on absent ones
        results = rt.engine.search_similar(
            doc_id, field=field, k=k or rt.config.default_k)
        return [asdict(r) for r in results]

    # -- annotation editing

    @app.post("/annotations", status_code=201)
    def create_annotation(body: dict = Body(...)):
        store = app.state.runtime.store
        if "video_id" not in body:
            raise RequestValidationError(
                [{"loc": ("body", "video_id"), "msg": "field required"}])
        ann = _annotation_from_body(store, body, body["video_id"], None)
        stored = store.upsert_annotation(ann)
        return stored.to_json_dict(with_video_id=True)

    @app.put("/annotations/{video_id}/{annotation_id}")
    def edit_annotation(video_id: str, annotation_id: str,
                        body: dict = Body(...)):
        store = app.state.runtime.store
        if "revision" not in body:
            raise RequestValidationError(
                [{"loc": ("body", "revision"), "msg": "field required"}])
        existing = store.get_annotation(video_id, annotation_id)
        if existing is not None and "tier_id" not in body:
            body = {**body, "tier_id": existing.tier_id,
                    "tier_role": existing.tier_role.value}
        ann = _annotation_from_body(store, body, video_id, annotation_id)
        stored = store.upsert_annotation(ann)
        return stored.to_json_dict(with_video_id=True)

    # -- maintenance

    @app.post("/admin/reindex")
    def admin_reindex():
        doc_count, skipped = reindex(app.state.runtime)
        return {"doc_count": doc_count, "skipped": skipped}

    # -- frame serving

    @app.get("/segments/{doc_id}/frames")
    def segment_frames(doc_id: str):
        rt = app.state.runtime
        video_id, annotation_id = split_doc_id(doc_id)
        if rt.store.get_annotation(video_id, annotation_id) is None:
            raise UnknownDocument(f"unknown document {doc_id!r}")
        frames = find_frames(rt.config.frames_dir, video_id, annotation_id)
        return [f"/frames/{p.name}" for p in frames]

    @app.get("/frames/{filename}")
    def frame_file(filename: str):
        rt = app.state.runtime
        if "/" in filename or "\\" in filename or ".." in filename:
            raise MediaMissing(f"bad frame name {filename!r}")
        path = Path(rt.config.frames_dir) / filename
        if not path.is_file():
            raise MediaMissing(f"no such frame {filename!r}")
        return FileResponse(path, media_type="image/png")

    return app


def serve(config: AppConfig) -> None:
    """Build the runtime and block serving HTTP until interrupted."""
    import uvicorn

    runtime = build_runtime(config)
    app = create_app(runtime)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((config.host, config.port))
    except OSError as exc:
        raise BindFailure(
            f"cannot bind {config.host}:{config.port}: {exc}") from exc
    finally:
        probe.close()
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
