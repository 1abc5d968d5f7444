"""Annotation store: EAF parsing, parsed-JSON projection, edit overlay.

The store is the system's source of truth for per-video annotation records.
Source EAF files are never mutated; user edits and creations live in a JSON
overlay file keyed by (video_id, annotation_id) and guarded by a revision
counter.  Readers always receive immutable snapshots.

Supported EAF subset: ANNOTATION_DOCUMENT root, TIME_ORDER/TIME_SLOT,
TIER/ANNOTATION/ALIGNABLE_ANNOTATION with ANNOTATION_VALUE.  REF_ANNOTATION
elements are skipped with a warning.
"""

from __future__ import annotations

import fnmatch
import json
import logging
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable
from xml.etree import ElementTree as ET

from .errors import (
    ConcurrentEditConflict,
    DanglingReference,
    EmptyGloss,
    EmptyQuery,
    InvalidInterval,
    MalformedEaf,
    UnknownVideo,
    UnresolvedTimeSlot,
)
from .ids import validate_component
from .textnorm import normalize

logger = logging.getLogger(__name__)

ANNOTATIONS_DIR = "annotations"
OVERLAY_FILE = "overlay.json"
VIDEOS_FILE = "videos.json"


class TierRole(str, Enum):
    FACIAL_EXPRESSION = "FacialExpression"
    MANUAL_GLOSS = "ManualGloss"
    TRANSLATION = "Translation"
    OTHER = "Other"


class Origin(str, Enum):
    PARSED = "Parsed"
    USER_CREATED = "UserCreated"
    USER_EDITED = "UserEdited"


@dataclass(frozen=True)
class TimeSlot:
    """One TIME_SLOT entry; time_ms may be absent until resolved."""

    slot_id: str
    time_ms: int | None = None


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    video_id: str
    tier_id: str
    tier_role: TierRole
    gloss: str
    start_ms: int
    end_ms: int
    revision: int = 0
    origin: Origin = Origin.PARSED

    def to_json_dict(self, with_video_id: bool = False) -> dict:
        d = {
            "annotation_id": self.annotation_id,
            "tier_id": self.tier_id,
            "tier_role": self.tier_role.value,
            "gloss": self.gloss,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "revision": self.revision,
            "origin": self.origin.value,
        }
        if with_video_id:
            d["video_id"] = self.video_id
        return d

    @classmethod
    def from_json_dict(cls, d: dict, video_id: str | None = None) -> "Annotation":
        return cls(
            annotation_id=d["annotation_id"],
            video_id=video_id if video_id is not None else d["video_id"],
            tier_id=d["tier_id"],
            tier_role=TierRole(d["tier_role"]),
            gloss=d["gloss"],
            start_ms=int(d["start_ms"]),
            end_ms=int(d["end_ms"]),
            revision=int(d.get("revision", 0)),
            origin=Origin(d.get("origin", "Parsed")),
        )


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    media_path: Path | None
    fps: float
    duration_ms: int

    def __post_init__(self):
        if self.fps <= 0:
            raise InvalidInterval(f"fps must be positive, got {self.fps}")
        if self.duration_ms <= 0:
            raise InvalidInterval(
                f"duration_ms must be positive, got {self.duration_ms}"
            )


@dataclass(frozen=True)
class TierRoleConfig:
    """Ordered glob patterns mapping tier ids to roles; first match wins."""

    patterns: tuple[tuple[str, TierRole], ...]

    def __post_init__(self):
        facial = [p for p, role in self.patterns if role is TierRole.FACIAL_EXPRESSION]
        if len(facial) != 1:
            raise MalformedEaf(
                "tier config must designate exactly one FacialExpression pattern, "
                f"found {len(facial)}"
            )

    def resolve(self, tier_id: str) -> TierRole:
        for pattern, role in self.patterns:
            if fnmatch.fnmatchcase(tier_id, pattern):
                return role
        return TierRole.OTHER

    @classmethod
    def from_json_bytes(cls, raw: bytes) -> "TierRoleConfig":
        try:
            payload = json.loads(raw)
            entries = payload["tier_patterns"]
            patterns = tuple(
                (e["pattern"], TierRole(e["role"])) for e in entries
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedEaf(f"invalid tier config: {exc}") from exc
        return cls(patterns)

    @classmethod
    def from_file(cls, path: Path | str) -> "TierRoleConfig":
        return cls.from_json_bytes(Path(path).read_bytes())


# --- EAF parsing ---------------------------------------------------------

def parse_eaf(eaf_bytes: bytes, video_id: str, config: TierRoleConfig) -> list[Annotation]:
    """Parse the supported EAF subset into Annotation records.

    Output is sorted by (tier_id, start_ms, annotation_id), so it does not
    depend on element order in the XML.
    """
    validate_component(video_id, "video_id")
    try:
        root = ET.fromstring(eaf_bytes)
    except ET.ParseError as exc:
        raise MalformedEaf(f"XML parse error: {exc}") from exc
    if root.tag != "ANNOTATION_DOCUMENT":
        raise MalformedEaf(f"unexpected root element {root.tag!r}")

    slots: dict[str, TimeSlot] = {}
    for ts in root.iter("TIME_SLOT"):
        slot_id = ts.get("TIME_SLOT_ID")
        if not slot_id:
            raise MalformedEaf("TIME_SLOT without TIME_SLOT_ID")
        if slot_id in slots:
            raise MalformedEaf(f"duplicate TIME_SLOT_ID {slot_id!r}")
        raw_value = ts.get("TIME_VALUE")
        time_ms: int | None = None
        if raw_value is not None:
            try:
                time_ms = int(raw_value)
            except ValueError as exc:
                raise MalformedEaf(
                    f"non-integer TIME_VALUE {raw_value!r} on slot {slot_id!r}"
                ) from exc
            if time_ms < 0:
                raise MalformedEaf(f"negative TIME_VALUE on slot {slot_id!r}")
        slots[slot_id] = TimeSlot(slot_id, time_ms)

    def resolve_slot(ref: str | None, ann_id: str) -> int:
        if not ref:
            raise MalformedEaf(f"annotation {ann_id!r} missing a TIME_SLOT_REF")
        slot = slots.get(ref)
        if slot is None:
            raise DanglingReference(
                f"annotation {ann_id!r} references unknown slot {ref!r}"
            )
        if slot.time_ms is None:
            raise UnresolvedTimeSlot(
                f"slot {ref!r} referenced by {ann_id!r} has no TIME_VALUE"
            )
        return slot.time_ms

    annotations: list[Annotation] = []
    seen_ids: set[str] = set()
    for tier in root.iter("TIER"):
        tier_id = tier.get("TIER_ID")
        if not tier_id:
            raise MalformedEaf("TIER without TIER_ID")
        role = config.resolve(tier_id)
        for wrapper in tier.findall("ANNOTATION"):
            ref_ann = wrapper.find("REF_ANNOTATION")
            if ref_ann is not None:
                logger.warning(
                    "skipping REF_ANNOTATION %s on tier %s (unsupported)",
                    ref_ann.get("ANNOTATION_ID"), tier_id,
                )
                continue
            alignable = wrapper.find("ALIGNABLE_ANNOTATION")
            if alignable is None:
                continue
            ann_id = alignable.get("ANNOTATION_ID")
            if not ann_id:
                raise MalformedEaf(f"ALIGNABLE_ANNOTATION without id on tier {tier_id!r}")
            if ann_id in seen_ids:
                raise MalformedEaf(f"duplicate ANNOTATION_ID {ann_id!r}")
            seen_ids.add(ann_id)
            start_ms = resolve_slot(alignable.get("TIME_SLOT_REF1"), ann_id)
            end_ms = resolve_slot(alignable.get("TIME_SLOT_REF2"), ann_id)
            if start_ms >= end_ms:
                raise MalformedEaf(
                    f"annotation {ann_id!r} has non-positive interval "
                    f"[{start_ms}, {end_ms}]"
                )
            value = alignable.find("ANNOTATION_VALUE")
            gloss = (value.text or "") if value is not None else ""
            annotations.append(Annotation(
                annotation_id=ann_id,
                video_id=video_id,
                tier_id=tier_id,
                tier_role=role,
                gloss=gloss,
                start_ms=start_ms,
                end_ms=end_ms,
                revision=0,
                origin=Origin.PARSED,
            ))

    annotations.sort(key=lambda a: (a.tier_id, a.start_ms, a.annotation_id))
    return annotations


def write_parsed_json(annotations: Iterable[Annotation], video: VideoRecord) -> bytes:
    """Serialize the parsed-annotation JSON for one video; byte-deterministic."""
    anns = list(annotations)
    for ann in anns:
        if ann.video_id != video.video_id:
            raise UnknownVideo(
                f"annotation {ann.annotation_id!r} belongs to {ann.video_id!r}, "
                f"not {video.video_id!r}"
            )
    payload = {
        "video_id": video.video_id,
        "fps": video.fps,
        "duration_ms": video.duration_ms,
        "annotations": [a.to_json_dict() for a in anns],
    }
    return (json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n").encode("utf-8")


def read_parsed_json(raw: bytes) -> tuple[VideoRecord, list[Annotation]]:
    try:
        payload = json.loads(raw)
        video = VideoRecord(
            video_id=payload["video_id"],
            media_path=None,
            fps=float(payload["fps"]),
            duration_ms=int(payload["duration_ms"]),
        )
        anns = [Annotation.from_json_dict(d, video.video_id) for d in payload["annotations"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedEaf(f"invalid parsed-annotation JSON: {exc}") from exc
    return video, anns


# --- store ---------------------------------------------------------------

class AnnotationStore:
    """Parsed annotations plus the user-edit overlay for one corpus.

    Many concurrent readers; writes are serialized by an internal lock and
    flushed to the overlay file before the mutating call returns.
    """

    def __init__(self, overlay_path: Path | None = None):
        self._videos: dict[str, VideoRecord] = {}
        self._annotations: dict[str, dict[str, Annotation]] = {}
        self._deleted: set[tuple[str, str]] = set()
        self._overlay_path = Path(overlay_path) if overlay_path else None
        self._lock = threading.Lock()

    # -- loading / registration

    @classmethod
    def load(cls, corpus_dir: Path | str) -> "AnnotationStore":
        """Load a corpus directory: annotations/*.json, videos.json, overlay.json."""
        corpus_dir = Path(corpus_dir)
        store = cls(overlay_path=corpus_dir / OVERLAY_FILE)
        media_info: dict[str, str] = {}
        manifest = corpus_dir / VIDEOS_FILE
        if manifest.exists():
            media_info = {
                v["video_id"]: v.get("media_path")
                for v in json.loads(manifest.read_text("utf-8"))["videos"]
            }
        ann_dir = corpus_dir / ANNOTATIONS_DIR
        if ann_dir.is_dir():
            for path in sorted(ann_dir.glob("*.json")):
                video, anns = read_parsed_json(path.read_bytes())
                media = media_info.get(video.video_id)
                if media:
                    video = replace(video, media_path=Path(media))
                store.add_video(video, anns)
        store._apply_overlay()
        return store

    def add_video(self, video: VideoRecord, annotations: Iterable[Annotation]) -> None:
        anns = list(annotations)
        max_end = max((a.end_ms for a in anns), default=0)
        if video.duration_ms < max_end:
            raise InvalidInterval(
                f"video {video.video_id!r} duration {video.duration_ms} ms is "
                f"shorter than last annotation end {max_end} ms"
            )
        for ann in anns:
            if ann.video_id != video.video_id:
                raise UnknownVideo(
                    f"annotation {ann.annotation_id!r} does not belong to "
                    f"{video.video_id!r}"
                )
        with self._lock:
            self._videos[video.video_id] = video
            by_id = self._annotations.setdefault(video.video_id, {})
            for ann in anns:
                by_id[ann.annotation_id] = ann

    def _apply_overlay(self) -> None:
        if self._overlay_path is None or not self._overlay_path.exists():
            return
        payload = json.loads(self._overlay_path.read_text("utf-8"))
        for entry in payload.get("annotations", []):
            ann = Annotation.from_json_dict(entry)
            self._annotations.setdefault(ann.video_id, {})[ann.annotation_id] = ann
            key = (ann.video_id, ann.annotation_id)
            if entry.get("deleted", False):
                self._deleted.add(key)
            else:
                self._deleted.discard(key)

    def _persist_overlay_locked(self) -> None:
        if self._overlay_path is None:
            return
        entries = []
        for video_id in sorted(self._annotations):
            for ann_id in sorted(self._annotations[video_id]):
                ann = self._annotations[video_id][ann_id]
                deleted = (video_id, ann_id) in self._deleted
                if ann.origin is Origin.PARSED and not deleted:
                    continue
                d = ann.to_json_dict(with_video_id=True)
                d["deleted"] = deleted
                entries.append(d)
        payload = {"annotations": entries}
        self._overlay_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self._overlay_path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            "utf-8",
        )
        tmp.replace(self._overlay_path)

    # -- read access

    def videos(self) -> list[VideoRecord]:
        with self._lock:
            return sorted(self._videos.values(), key=lambda v: v.video_id)

    def get_video(self, video_id: str) -> VideoRecord:
        with self._lock:
            video = self._videos.get(video_id)
        if video is None:
            raise UnknownVideo(f"unknown video {video_id!r}")
        return video

    def annotations_for(self, video_id: str, include_deleted: bool = False) -> list[Annotation]:
        with self._lock:
            if video_id not in self._videos:
                raise UnknownVideo(f"unknown video {video_id!r}")
            anns = list(self._annotations.get(video_id, {}).values())
            deleted = set(self._deleted)
        if not include_deleted:
            anns = [a for a in anns if (video_id, a.annotation_id) not in deleted]
        anns.sort(key=lambda a: (a.tier_id, a.start_ms, a.annotation_id))
        return anns

    def get_annotation(self, video_id: str, annotation_id: str) -> Annotation | None:
        """Return the live annotation, or None if absent or tombstoned."""
        with self._lock:
            if (video_id, annotation_id) in self._deleted:
                return None
            return self._annotations.get(video_id, {}).get(annotation_id)

    def facial_annotations(self) -> list[Annotation]:
        """All live FacialExpression annotations across the corpus."""
        out = []
        for video_id in sorted(self._annotations):
            for ann in self.annotations_for(video_id):
                if ann.tier_role is TierRole.FACIAL_EXPRESSION:
                    out.append(ann)
        return out

    # -- editing

    def upsert_annotation(self, ann: Annotation) -> Annotation:
        """Create or edit an annotation; overlay is flushed before returning.

        For edits, ann.revision must equal the stored revision (stale
        revisions raise ConcurrentEditConflict).
        """
        if ann.start_ms >= ann.end_ms:
            raise InvalidInterval(
                f"start_ms {ann.start_ms} must be < end_ms {ann.end_ms}"
            )
        if not ann.gloss.strip():
            raise EmptyGloss("gloss must be non-empty")
        validate_component(ann.annotation_id, "annotation_id")
        with self._lock:
            if ann.video_id not in self._videos:
                raise UnknownVideo(f"unknown video {ann.video_id!r}")
            existing = self._annotations.get(ann.video_id, {}).get(ann.annotation_id)
            if existing is None:
                stored = replace(ann, revision=0, origin=Origin.USER_CREATED)
            else:
                if ann.revision != existing.revision:
                    raise ConcurrentEditConflict(
                        f"annotation {ann.annotation_id!r} is at revision "
                        f"{existing.revision}, caller supplied {ann.revision}",
                        current_revision=existing.revision,
                    )
                stored = replace(
                    ann, revision=existing.revision + 1, origin=Origin.USER_EDITED
                )
            self._annotations.setdefault(ann.video_id, {})[ann.annotation_id] = stored
            self._deleted.discard((ann.video_id, ann.annotation_id))
            self._persist_overlay_locked()
        return stored

    def mark_deleted(self, video_id: str, annotation_id: str, revision: int) -> None:
        """Tombstone an annotation (source EAF rows are never removed)."""
        with self._lock:
            existing = self._annotations.get(video_id, {}).get(annotation_id)
            if existing is None:
                raise UnknownVideo(
                    f"no annotation {annotation_id!r} in video {video_id!r}"
                )
            if revision != existing.revision:
                raise ConcurrentEditConflict(
                    f"annotation {annotation_id!r} is at revision "
                    f"{existing.revision}, caller supplied {revision}",
                    current_revision=existing.revision,
                )
            self._deleted.add((video_id, annotation_id))
            self._persist_overlay_locked()

    # -- export

    def export_eaf(self, video_id: str) -> bytes:
        """Serialize the video's live annotations back to the EAF subset.

        Round-trip contract: parse_eaf(export_eaf(v)) reproduces the store's
        annotations for v on the canonical fields.
        """
        anns = self.annotations_for(video_id)
        root = ET.Element("ANNOTATION_DOCUMENT", {"AUTHOR": "slvideo", "FORMAT": "3.0", "VERSION": "3.0"})
        time_order = ET.SubElement(root, "TIME_ORDER")
        slot_ids: dict[int, str] = {}
        for t in sorted({a.start_ms for a in anns} | {a.end_ms for a in anns}):
            slot_id = f"ts{len(slot_ids) + 1}"
            slot_ids[t] = slot_id
            ET.SubElement(time_order, "TIME_SLOT", {
                "TIME_SLOT_ID": slot_id,
                "TIME_VALUE": str(t),
            })
        by_tier: dict[str, list[Annotation]] = {}
        for ann in anns:
            by_tier.setdefault(ann.tier_id, []).append(ann)
        for tier_id in sorted(by_tier):
            tier_el = ET.SubElement(root, "TIER", {"TIER_ID": tier_id})
            for ann in sorted(by_tier[tier_id], key=lambda a: (a.start_ms, a.annotation_id)):
                wrapper = ET.SubElement(tier_el, "ANNOTATION")
                alignable = ET.SubElement(wrapper, "ALIGNABLE_ANNOTATION", {
                    "ANNOTATION_ID": ann.annotation_id,
                    "TIME_SLOT_REF1": slot_ids[ann.start_ms],
                    "TIME_SLOT_REF2": slot_ids[ann.end_ms],
                })
                value = ET.SubElement(alignable, "ANNOTATION_VALUE")
                value.text = ann.gloss
        ET.indent(root)
        return ET.tostring(root, encoding="utf-8", xml_declaration=True)

    # -- plain-text search

    def plain_text_lookup(self, query: str) -> list[Annotation]:
        """Exact normalized gloss match on sign tiers, substring on translations."""
        if not query.strip():
            raise EmptyQuery("query must be non-empty")
        needle = normalize(query)
        matches = []
        with self._lock:
            video_ids = sorted(self._annotations)
        for video_id in video_ids:
            for ann in self.annotations_for(video_id):
                haystack = normalize(ann.gloss)
                if ann.tier_role in (TierRole.FACIAL_EXPRESSION, TierRole.MANUAL_GLOSS):
                    if needle == haystack:
                        matches.append(ann)
                elif ann.tier_role is TierRole.TRANSLATION:
                    if needle in haystack:
                        matches.append(ann)
        matches.sort(key=lambda a: (a.video_id, a.start_ms, a.annotation_id))
        return matches
