"""End-to-end corpus plumbing shared by the CLI and the HTTP service.

Pre-processing phase: ingest EAF files into a corpus directory, extract
keyframes, embed and index every facial-expression sign.  Query phase:
build a Runtime (store + index + encoder + engine) from an AppConfig.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .annotations import (
    ANNOTATIONS_DIR,
    AnnotationStore,
    TierRole,
    TierRoleConfig,
    VideoRecord,
    parse_eaf,
    write_parsed_json,
)
from .config import AppConfig
from .embedder import Encoder, build_sign_embeddings, make_encoder
from .errors import ConfigInvalid, EmptyInput
from .evaluation import Evaluator
from .ids import make_doc_id
from .index import SignDocument, VectorIndex
from .query import QueryEngine
from .segmenter import (
    DEFAULT_EXTRACT_TEMPLATE,
    PreprocessPipeline,
    Segment,
    extract_all,
    find_frames,
    plan_keyframes,
)

logger = logging.getLogger(__name__)

VIDEOS_FILE = "videos.json"


def _read_manifest(video_dir: Path) -> dict[str, dict]:
    manifest_path = video_dir / VIDEOS_FILE
    if not manifest_path.is_file():
        raise ConfigInvalid(
            f"video manifest not found: {manifest_path} "
            "(expected {\"videos\": [{\"video_id\", \"media_path\", \"fps\", "
            "\"duration_ms\"}]})"
        )
    raw = json.loads(manifest_path.read_text("utf-8"))
    entries = {}
    for entry in raw.get("videos", []):
        for key in ("video_id", "fps", "duration_ms"):
            if key not in entry:
                raise ConfigInvalid(
                    f"manifest entry missing {key!r}: {entry}")
        entries[entry["video_id"]] = entry
    return entries


def ingest_corpus(eaf_dir: Path | str, video_dir: Path | str,
                  tier_config_path: Path | str, out_dir: Path | str) -> int:
    """Parse every .eaf under eaf_dir into parsed-annotation JSON files.

    Video timing metadata (fps, duration) comes from a videos.json
    manifest next to the media files; media paths are resolved against
    the manifest's directory.  Returns the number of videos ingested.
    """
    eaf_dir, video_dir = Path(eaf_dir), Path(video_dir)
    out_dir = Path(out_dir)
    config = TierRoleConfig.from_file(tier_config_path)
    manifest = _read_manifest(video_dir)

    eaf_files = sorted(eaf_dir.glob("*.eaf"))
    if not eaf_files:
        raise EmptyInput(f"no .eaf files under {eaf_dir}")
    (out_dir / ANNOTATIONS_DIR).mkdir(parents=True, exist_ok=True)

    resolved = []
    for eaf_path in eaf_files:
        video_id = eaf_path.stem
        if video_id not in manifest:
            raise ConfigInvalid(
                f"no manifest entry for video {video_id!r} "
                f"(from {eaf_path.name})")
        entry = manifest[video_id]
        media = entry.get("media_path")
        media_path = None
        if media:
            media_path = Path(media)
            if not media_path.is_absolute():
                media_path = video_dir / media_path
        video = VideoRecord(
            video_id=video_id,
            media_path=media_path,
            fps=float(entry["fps"]),
            duration_ms=int(entry["duration_ms"]),
        )
        annotations = parse_eaf(eaf_path.read_bytes(), video_id, config)
        out_path = out_dir / ANNOTATIONS_DIR / f"{video_id}.json"
        out_path.write_bytes(write_parsed_json(annotations, video))
        resolved.append({
            "video_id": video_id,
            "media_path": str(media_path) if media_path else None,
            "fps": video.fps,
            "duration_ms": video.duration_ms,
        })
    (out_dir / VIDEOS_FILE).write_text(
        json.dumps({"videos": resolved}, indent=2, sort_keys=True) + "\n",
        "utf-8",
    )
    return len(resolved)


def plan_corpus_segments(store: AnnotationStore) -> list[Segment]:
    """One keyframe plan per live facial-expression annotation."""
    segments = []
    for ann in store.facial_annotations():
        fps = store.get_video(ann.video_id).fps
        segments.append(plan_keyframes(ann, fps))
    return segments


def extract_corpus_frames(
    store: AnnotationStore,
    frames_dir: Path | str,
    extract_template: str = DEFAULT_EXTRACT_TEMPLATE,
    preprocess: PreprocessPipeline = PreprocessPipeline(),
    workers: int = 4,
) -> int:
    """Extract keyframes for every facial sign; returns the frame count."""
    segments = plan_corpus_segments(store)
    videos = {v.video_id: v for v in store.videos()}
    done = extract_all(
        segments, videos, preprocess, frames_dir,
        extract_template=extract_template, workers=workers,
    )
    return sum(len(seg.frame_paths) for seg in done)


def build_index_from_frames(
    store: AnnotationStore,
    frames_dir: Path | str,
    encoder: Encoder,
) -> tuple[VectorIndex, list[str]]:
    """Embed every facial sign whose frames exist and index it.

    Signs with no extracted frames are skipped (they stay searchable via
    plain text only); their doc_ids are returned for reporting.
    """
    index = VectorIndex(encoder.dim)
    skipped = []
    for ann in store.facial_annotations():
        doc_id = make_doc_id(ann.video_id, ann.annotation_id)
        # frames extracted before an annotation was re-timed may fall
        # outside the current window; only in-window frames count
        pairs = [
            (ts, path)
            for ts, path in (
                (int(p.stem.rsplit("_", 1)[1]), p)
                for p in find_frames(frames_dir, ann.video_id, ann.annotation_id)
            )
            if ann.start_ms <= ts <= ann.end_ms
        ]
        if not pairs:
            skipped.append(doc_id)
            logger.warning("no frames for %s; not indexed", doc_id)
            continue
        seg = Segment(
            video_id=ann.video_id, annotation_id=ann.annotation_id,
            start_ms=ann.start_ms, end_ms=ann.end_ms,
            frame_timestamps_ms=tuple(ts for ts, _ in pairs),
            frame_paths=tuple(path for _, path in pairs),
        )
        emb = build_sign_embeddings(encoder, seg, ann.gloss)
        index.index_document(SignDocument(seg.doc_id, emb))
    return index, skipped


@dataclass
class Runtime:
    """Everything the query phase needs, built from one AppConfig."""

    config: AppConfig
    store: AnnotationStore
    index: VectorIndex
    encoder: Encoder
    engine: QueryEngine
    evaluator: Evaluator


def build_runtime(config: AppConfig) -> Runtime:
    if not config.corpus_dir.is_dir():
        raise ConfigInvalid(f"corpus_dir does not exist: {config.corpus_dir}")
    store = AnnotationStore.load(config.corpus_dir)
    encoder = make_encoder(
        config.encoder.kind, config.encoder.endpoint, config.encoder.dim)
    if config.index_path.is_file():
        index = VectorIndex.load(config.index_path)
    else:
        index = VectorIndex(encoder.dim)
    engine = QueryEngine(store, index, encoder)
    return Runtime(
        config=config,
        store=store,
        index=index,
        encoder=encoder,
        engine=engine,
        evaluator=Evaluator(
            engine, k=config.default_k, median_options=config.median_options),
    )


def reindex(runtime: Runtime) -> tuple[int, list[str]]:
    """Rebuild the index from the store and persist it; swaps the live
    index so in-flight engines see the new snapshot."""
    index, skipped = build_index_from_frames(
        runtime.store, runtime.config.frames_dir, runtime.encoder)
    index.persist(runtime.config.index_path)
    runtime.index = index
    runtime.engine.index = index
    return index.doc_count, skipped
