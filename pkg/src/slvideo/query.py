"""User-facing query modes over the annotation store and vector index.

Eight modes: plain-text gloss lookup, six single-field embedding searches,
and a fused search over the base/average/best fields.  A thesaurus flow
("more like this segment") re-queries the index with a stored vector.
Results are hydrated with segment metadata from the annotation store.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

from .annotations import AnnotationStore, Annotation
from .embedder import Encoder, encode_text, normalize_unit
from .errors import EmptyQuery, UnknownMode
from .ids import make_doc_id, split_doc_id
from .index import COMBINED_FIELDS, SearchHit, VectorIndex

logger = logging.getLogger(__name__)

DEFAULT_K = 10


class SearchMode(str, Enum):
    TEXT_PLAIN = "TextPlain"
    FRAME_BASE = "FrameBase"
    FRAME_AVERAGE = "FrameAverage"
    FRAME_BEST = "FrameBest"
    FRAME_SUMMED = "FrameSummed"
    FRAME_ALL = "FrameAll"
    ANNOTATION = "Annotation"
    COMBINED = "Combined"


# which index fields each embedding mode touches
MODE_FIELDS: dict[SearchMode, tuple[str, ...]] = {
    SearchMode.FRAME_BASE: ("base",),
    SearchMode.FRAME_AVERAGE: ("average",),
    SearchMode.FRAME_BEST: ("best",),
    SearchMode.FRAME_SUMMED: ("summed",),
    SearchMode.FRAME_ALL: ("all",),
    SearchMode.ANNOTATION: ("annotation",),
    SearchMode.COMBINED: COMBINED_FIELDS,
}

EMBEDDING_MODES = tuple(MODE_FIELDS)


def coerce_mode(mode: SearchMode | str) -> SearchMode:
    try:
        return SearchMode(mode)
    except ValueError:
        raise UnknownMode(
            f"unknown search mode {mode!r}; expected one of "
            f"{[m.value for m in SearchMode]}"
        ) from None


@dataclass(frozen=True)
class SearchRequest:
    mode: SearchMode
    query_text: str | None = None
    query_doc_id: str | None = None
    k: int = DEFAULT_K
    field_override: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", coerce_mode(self.mode))
        if (self.query_text is None) == (self.query_doc_id is None):
            raise EmptyQuery(
                "exactly one of query_text / query_doc_id must be given")
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")


@dataclass(frozen=True)
class SearchResult:
    doc_id: str
    video_id: str
    annotation_id: str
    gloss: str
    start_ms: int
    end_ms: int
    score: float
    rank: int


def _result_from(ann: Annotation, score: float, rank: int) -> SearchResult:
    return SearchResult(
        doc_id=make_doc_id(ann.video_id, ann.annotation_id),
        video_id=ann.video_id,
        annotation_id=ann.annotation_id,
        gloss=ann.gloss,
        start_ms=ann.start_ms,
        end_ms=ann.end_ms,
        score=score,
        rank=rank,
    )


class QueryEngine:
    def __init__(self, store: AnnotationStore, index: VectorIndex, encoder: Encoder):
        self.store = store
        self.index = index
        self.encoder = encoder

    # -- text-initiated search

    def search_text(self, req: SearchRequest) -> list[SearchResult]:
        mode = coerce_mode(req.mode)
        if req.query_text is None or not req.query_text.strip():
            raise EmptyQuery("query text is required for text-initiated search")
        if mode is SearchMode.TEXT_PLAIN:
            return self._plain_text(req.query_text)
        q = normalize_unit(encode_text(self.encoder, req.query_text))
        fields = MODE_FIELDS[mode]
        if len(fields) == 1:
            hits = self.index.knn_search(q, fields[0], k=req.k)
        else:
            hits = self.index.multi_field_search(q, fields, k=req.k)
        return self.hydrate(hits)

    def _plain_text(self, query: str) -> list[SearchResult]:
        # every exact/substring match, not just the top k; score is not
        # graded for literal matches
        matches = self.store.plain_text_lookup(query)
        return [
            _result_from(ann, score=1.0, rank=rank)
            for rank, ann in enumerate(matches, start=1)
        ]

    # -- thesaurus flow: similar segments to a stored one

    def search_similar(self, doc_id: str, field: str = "all",
                       k: int = DEFAULT_K) -> list[SearchResult]:
        if k <= 0:
            raise ValueError(f"k must be positive, got {k}")
        q = self.index.fetch_vectors(doc_id, field)
        hits = self.index.knn_search(q, field, k=k + 1)
        kept = [h for h in hits if h.doc_id != doc_id][:k]
        reranked = [
            SearchHit(doc_id=h.doc_id, score=h.score, rank=rank)
            for rank, h in enumerate(kept, start=1)
        ]
        return self.hydrate(reranked)

    # -- metadata assembly

    def hydrate(self, hits: list[SearchHit]) -> list[SearchResult]:
        """Join hits with the annotation store; stale hits are dropped."""
        results: list[SearchResult] = []
        for hit in hits:
            video_id, annotation_id = split_doc_id(hit.doc_id)
            ann = self.store.get_annotation(video_id, annotation_id)
            if ann is None:
                logger.warning(
                    "dropping stale hit %s: annotation no longer in store",
                    hit.doc_id,
                )
                continue
            results.append(_result_from(ann, hit.score, rank=len(results) + 1))
        return results
