"""Exact cosine k-NN index over six-vector sign documents.

Scores use the (1 + cos)/2 convention, so identical vectors score 1.0,
orthogonal 0.5, antipodal 0.0.  Search is an exact full scan; at corpus
scale (thousands of signs) that is both fast enough and trivially correct.

Storage form: each field is quantized to float32 on insert (the same
little-endian float32 payload the index file holds), and scoring uses
float64 unit vectors derived from that payload.  Deriving scores from the
quantized form makes save/load a bitwise no-op for search behavior.

Concurrency: searches run against an immutable snapshot; mutations rebuild
and swap the snapshot atomically under a lock.
"""

from __future__ import annotations

import struct
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .embedder import FIELD_NAMES, SignEmbeddings
from .errors import (
    CorruptIndexFile,
    DimensionMismatch,
    NotNormalized,
    UnknownDocument,
    UnknownField,
    VersionMismatch,
)

MAGIC = b"SLVX"
FORMAT_VERSION = 1
COMBINED_FIELDS = ("base", "average", "best")


@dataclass(frozen=True)
class SignDocument:
    doc_id: str
    embeddings: SignEmbeddings | Mapping[str, np.ndarray]

    def field(self, name: str) -> np.ndarray:
        if isinstance(self.embeddings, Mapping):
            return self.embeddings[name]
        return getattr(self.embeddings, name)


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class IndexMeta:
    dim: int
    field_names: tuple[str, ...]
    doc_count: int


class _Snapshot:
    """Frozen view used by searches: doc ids plus per-field score matrices.

    Byte-identical stored vectors are collapsed to one matrix row and
    score via the same computed float. A full matrix product may
    accumulate different rows in different SIMD orders, so without the
    collapse two identical documents can score one ulp apart and the
    doc_id tie-break silently stops applying to them.
    """

    def __init__(self, docs: dict[str, dict[str, np.ndarray]], dim: int):
        self.doc_ids = tuple(sorted(docs))
        self.matrices: dict[str, np.ndarray] = {}
        self.inverses: dict[str, np.ndarray] = {}
        for field in FIELD_NAMES:
            if self.doc_ids:
                rows: list[np.ndarray] = []
                positions: dict[bytes, int] = {}
                inverse = np.empty(len(self.doc_ids), dtype=np.intp)
                for i, doc_id in enumerate(self.doc_ids):
                    stored = docs[doc_id][field]
                    pos = positions.setdefault(stored.tobytes(), len(rows))
                    if pos == len(rows):
                        rows.append(stored.astype(np.float64))
                    inverse[i] = pos
                mat = np.stack(rows)
                mat /= np.linalg.norm(mat, axis=1, keepdims=True)
            else:
                mat = np.empty((0, dim), dtype=np.float64)
                inverse = np.empty(0, dtype=np.intp)
            self.matrices[field] = mat
            self.inverses[field] = inverse

    def field_scores(self, field: str, q: np.ndarray) -> np.ndarray:
        """Per-document scores (1 + cos)/2 clipped to [0, 1]."""
        unique = np.clip((1.0 + self.matrices[field] @ q) / 2.0, 0.0, 1.0)
        return unique[self.inverses[field]]


class VectorIndex:
    def __init__(self, dim: int):
        if dim <= 0:
            raise DimensionMismatch(f"dim must be positive, got {dim}")
        self.dim = dim
        self._docs: dict[str, dict[str, np.ndarray]] = {}
        self._snapshot: _Snapshot | None = _Snapshot({}, dim)
        self._lock = threading.Lock()

    # -- bookkeeping

    @property
    def doc_count(self) -> int:
        return len(self._docs)

    def meta(self) -> IndexMeta:
        return IndexMeta(dim=self.dim, field_names=FIELD_NAMES,
                         doc_count=self.doc_count)

    def doc_ids(self) -> list[str]:
        return sorted(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    # -- mutation

    def index_document(self, doc: SignDocument) -> None:
        """Insert or atomically replace one document."""
        quantized: dict[str, np.ndarray] = {}
        for field in FIELD_NAMES:
            vec = np.asarray(doc.field(field), dtype=np.float64)
            if vec.shape != (self.dim,):
                raise DimensionMismatch(
                    f"field {field!r} of {doc.doc_id!r} has shape {vec.shape}, "
                    f"expected ({self.dim},)"
                )
            norm = float(np.linalg.norm(vec))
            if not abs(norm - 1.0) <= 1e-6:
                raise NotNormalized(
                    f"field {field!r} of {doc.doc_id!r} has norm {norm}, "
                    "expected 1 +- 1e-6"
                )
            quantized[field] = vec.astype(np.float32)
        with self._lock:
            self._docs[doc.doc_id] = quantized
            self._snapshot = None

    def remove_document(self, doc_id: str) -> None:
        with self._lock:
            if doc_id not in self._docs:
                raise UnknownDocument(f"unknown document {doc_id!r}")
            del self._docs[doc_id]
            self._snapshot = None

    def _current_snapshot(self) -> _Snapshot:
        snap = self._snapshot
        if snap is None:
            with self._lock:
                snap = self._snapshot
                if snap is None:
                    snap = _Snapshot(self._docs, self.dim)
                    self._snapshot = snap
        return snap

    # -- search

    def _prepare_query(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatch(
                f"query has shape {q.shape}, expected ({self.dim},)"
            )
        norm = float(np.linalg.norm(q))
        if norm < 1e-12:
            raise NotNormalized("query vector has near-zero norm")
        return q / norm

    @staticmethod
    def _check_field(field: str) -> None:
        if field not in FIELD_NAMES:
            raise UnknownField(f"unknown field {field!r}; expected one of {FIELD_NAMES}")

    @staticmethod
    def _rank(doc_ids, scores, k: int) -> list[SearchHit]:
        order = sorted(range(len(doc_ids)), key=lambda i: (-scores[i], doc_ids[i]))
        return [
            SearchHit(doc_id=doc_ids[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(order[:k], start=1)
        ]

    def knn_search(self, query, field: str, k: int = 10) -> list[SearchHit]:
        """Exact top-min(k, doc_count) by (1 + cos)/2, ties by doc_id."""
        self._check_field(field)
        if k <= 0:
            raise ValueError(f"k must be positive, got {k}")
        q = self._prepare_query(query)
        snap = self._current_snapshot()
        if not snap.doc_ids:
            return []
        scores = snap.field_scores(field, q)
        return self._rank(snap.doc_ids, scores, k)

    def multi_field_search(self, query, fields=COMBINED_FIELDS, k: int = 10) -> list[SearchHit]:
        """Fused search: per-document arithmetic mean of the per-field scores."""
        fields = tuple(fields)
        if not fields:
            raise UnknownField("fields must be non-empty")
        for field in fields:
            self._check_field(field)
        if k <= 0:
            raise ValueError(f"k must be positive, got {k}")
        q = self._prepare_query(query)
        snap = self._current_snapshot()
        if not snap.doc_ids:
            return []
        per_field = [snap.field_scores(field, q) for field in fields]
        fused = np.mean(per_field, axis=0)
        return self._rank(snap.doc_ids, fused, k)

    def fetch_vectors(self, doc_id: str, field: str) -> np.ndarray:
        """The stored (float32) vector, unmodified."""
        self._check_field(field)
        doc = self._docs.get(doc_id)
        if doc is None:
            raise UnknownDocument(f"unknown document {doc_id!r}")
        return doc[field].copy()

    # -- persistence

    def persist(self, path: Path | str) -> None:
        """Single-file binary dump; see module docstring for the layout."""
        buf = bytearray()
        buf += MAGIC
        buf += struct.pack("<III", FORMAT_VERSION, self.dim, self.doc_count)
        for doc_id in sorted(self._docs):
            id_bytes = doc_id.encode("utf-8")
            buf += struct.pack("<I", len(id_bytes))
            buf += id_bytes
            for field in FIELD_NAMES:
                buf += self._docs[doc_id][field].astype("<f4").tobytes()
        buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(bytes(buf))
        tmp.replace(path)

    @classmethod
    def load(cls, path: Path | str) -> "VectorIndex":
        raw = Path(path).read_bytes()
        if len(raw) < 4 + 12 + 4:
            raise CorruptIndexFile(f"index file too short ({len(raw)} bytes)")
        if raw[:4] != MAGIC:
            raise CorruptIndexFile("bad magic; not an index file")
        body, (stored_crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
        if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
            raise CorruptIndexFile("checksum mismatch")
        version, dim, doc_count = struct.unpack_from("<III", body, 4)
        if version != FORMAT_VERSION:
            raise VersionMismatch(
                f"index file version {version}, expected {FORMAT_VERSION}"
            )
        index = cls(dim)
        offset = 16
        vec_bytes = 4 * dim
        for _ in range(doc_count):
            try:
                (id_len,) = struct.unpack_from("<I", body, offset)
                offset += 4
                doc_id = body[offset:offset + id_len].decode("utf-8")
                if len(body[offset:offset + id_len]) != id_len:
                    raise CorruptIndexFile("truncated doc id")
                offset += id_len
                fields = {}
                for field in FIELD_NAMES:
                    chunk = body[offset:offset + vec_bytes]
                    if len(chunk) != vec_bytes:
                        raise CorruptIndexFile("truncated vector data")
                    fields[field] = np.frombuffer(chunk, dtype="<f4").astype(np.float32)
                    offset += vec_bytes
            except struct.error as exc:
                raise CorruptIndexFile(f"truncated index file: {exc}") from exc
            index._docs[doc_id] = fields
        if offset != len(body):
            raise CorruptIndexFile(
                f"{len(body) - offset} trailing bytes after {doc_count} documents"
            )
        index._snapshot = None
        return index
