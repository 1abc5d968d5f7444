"""Embedding generation: pluggable encoders plus the six per-sign
aggregation methods.

Aggregations operate on the encoder's raw per-frame vectors; only the final
stored form of each method is unit-normalized.  That order matters: the
best-frame method ranks frames by raw norm, which normalized inputs would
erase.

The six methods per sign:
  base        sum of the selected frames (first, middle, last)
  average     elementwise mean of all frames
  best        the single frame with the largest L2 norm
  summed      base + average + best
  all         sum of all frames
  annotation  text embedding of the sign's gloss
"""

from __future__ import annotations

import hashlib
import logging
from base64 import b64encode
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import (
    DegenerateEmbedding,
    DimensionMismatch,
    EmptyGloss,
    EmptyInput,
    EncoderUnavailable,
    UnreadableFrame,
)
from .segmenter import Segment

logger = logging.getLogger(__name__)

DEFAULT_DIM = 512

FIELD_NAMES = ("base", "average", "best", "summed", "all", "annotation")


class Encoder(Protocol):
    kind: str
    model_name: str
    dim: int

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray: ...

    def encode_images(self, images: Sequence[bytes]) -> np.ndarray: ...


class MockEncoder:
    """Deterministic stand-in for a real image-text encoder.

    Each input's bytes seed a PCG64 stream whose first `dim` normal draws,
    unit-normalized, form the vector.  Byte-identical input gives a
    bitwise-identical vector on every run.
    """

    kind = "mock"

    def __init__(self, dim: int = DEFAULT_DIM, model_name: str = "mock-encoder"):
        if dim <= 0:
            raise DimensionMismatch(f"dim must be positive, got {dim}")
        self.dim = dim
        self.model_name = model_name

    def _vector(self, payload: bytes) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._vector(t.encode("utf-8")) for t in texts])

    def encode_images(self, images: Sequence[bytes]) -> np.ndarray:
        return np.stack([self._vector(img) for img in images])


class RemoteEncoder:
    """Client for the encoder wire protocol (see the encoder service)."""

    kind = "remote"

    def __init__(self, endpoint: str, timeout: float = 60.0,
                 batch_size: int = 32):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.batch_size = batch_size
        info = self._get_json("/v1/info")
        self.model_name = str(info.get("model", "unknown"))
        self.dim = int(info["dim"])

    def _get_json(self, path: str) -> dict:
        try:
            resp = requests.get(self.endpoint + path, timeout=self.timeout)
        except requests.RequestException as exc:
            raise EncoderUnavailable(f"GET {path} failed: {exc}") from exc
        if resp.status_code != 200:
            raise EncoderUnavailable(f"GET {path} returned {resp.status_code}")
        return resp.json()

    def _post_vectors(self, path: str, body: dict, count: int) -> np.ndarray:
        try:
            resp = requests.post(self.endpoint + path, json=body,
                                 timeout=self.timeout)
        except requests.RequestException as exc:
            raise EncoderUnavailable(f"POST {path} failed: {exc}") from exc
        if resp.status_code != 200:
            raise EncoderUnavailable(
                f"POST {path} returned {resp.status_code}: {resp.text[:200]}"
            )
        vectors = np.asarray(resp.json()["vectors"], dtype=np.float64)
        if vectors.shape != (count, self.dim):
            raise DimensionMismatch(
                f"encoder returned shape {vectors.shape}, "
                f"expected ({count}, {self.dim})"
            )
        return vectors

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        chunks = []
        for i in range(0, len(texts), self.batch_size):
            batch = list(texts[i:i + self.batch_size])
            chunks.append(self._post_vectors(
                "/v1/encode_text", {"texts": batch}, len(batch)))
        return np.concatenate(chunks)

    def encode_images(self, images: Sequence[bytes]) -> np.ndarray:
        chunks = []
        for i in range(0, len(images), self.batch_size):
            batch = [b64encode(img).decode("ascii")
                     for img in images[i:i + self.batch_size]]
            chunks.append(self._post_vectors(
                "/v1/encode_image", {"images_b64": batch}, len(batch)))
        return np.concatenate(chunks)


def make_encoder(kind: str, endpoint: str | None = None,
                 dim: int = DEFAULT_DIM, model_name: str = "mock-encoder") -> Encoder:
    if kind == "mock":
        return MockEncoder(dim=dim, model_name=model_name)
    if kind == "remote":
        if not endpoint:
            raise EncoderUnavailable("remote encoder requires an endpoint")
        return RemoteEncoder(endpoint)
    raise EncoderUnavailable(f"unknown encoder kind {kind!r}")


# --- encoding operations --------------------------------------------------

def encode_text(enc: Encoder, text: str) -> np.ndarray:
    if not text:
        raise EmptyGloss("text must be non-empty")
    vectors = enc.encode_texts([text])
    _check_dim(vectors, enc.dim)
    return vectors[0]


def encode_frames(enc: Encoder, frame_paths: Sequence[Path | str]) -> np.ndarray:
    """One raw vector per frame file, order-preserving."""
    if not frame_paths:
        raise EmptyInput("frame_paths must be non-empty")
    payloads = []
    for path in frame_paths:
        try:
            payloads.append(Path(path).read_bytes())
        except OSError as exc:
            raise UnreadableFrame(f"cannot read frame {path}: {exc}") from exc
    vectors = enc.encode_images(payloads)
    _check_dim(vectors, enc.dim)
    return vectors


def annotation_embedding(enc: Encoder, gloss: str) -> np.ndarray:
    if not gloss.strip():
        raise EmptyGloss("gloss must be non-empty")
    return encode_text(enc, gloss)


def _check_dim(vectors: np.ndarray, dim: int) -> None:
    if vectors.ndim != 2 or vectors.shape[1] != dim:
        raise DimensionMismatch(
            f"expected vectors of dimension {dim}, got shape {vectors.shape}"
        )


# --- aggregation methods --------------------------------------------------

def _as_matrix(frames) -> np.ndarray:
    mat = np.asarray(frames, dtype=np.float64)
    if mat.size == 0:
        raise EmptyInput("at least one frame vector is required")
    if mat.ndim == 1:
        mat = mat[np.newaxis, :]
    if mat.ndim != 2:
        raise DimensionMismatch(f"expected a list of vectors, got shape {mat.shape}")
    return mat


def agg_base(frames) -> np.ndarray:
    """Sum of the selected frames: first, middle, last (duplicates collapse)."""
    mat = _as_matrix(frames)
    n = mat.shape[0]
    indices = sorted({0, (n - 1) // 2, n - 1})
    return mat[indices].sum(axis=0)


def agg_average(frames) -> np.ndarray:
    return _as_matrix(frames).mean(axis=0)


def agg_best(frames) -> np.ndarray:
    """The raw frame with maximum L2 norm; ties go to the lowest index."""
    mat = _as_matrix(frames)
    norms = np.linalg.norm(mat, axis=1)
    return mat[int(np.argmax(norms))].copy()


def agg_summed(base: np.ndarray, average: np.ndarray, best: np.ndarray) -> np.ndarray:
    base, average, best = (np.asarray(v, dtype=np.float64) for v in (base, average, best))
    if not (base.shape == average.shape == best.shape):
        raise DimensionMismatch(
            f"shape mismatch: {base.shape}, {average.shape}, {best.shape}"
        )
    return base + average + best


def agg_all(frames) -> np.ndarray:
    return _as_matrix(frames).sum(axis=0)


def normalize_unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise DegenerateEmbedding(f"norm {norm} is below 1e-12")
    return v / norm


# --- per-sign composition -------------------------------------------------

@dataclass(frozen=True)
class SignEmbeddings:
    """The six unit-normalized vectors stored for one sign document."""

    doc_id: str
    base: np.ndarray
    average: np.ndarray
    best: np.ndarray
    summed: np.ndarray
    all: np.ndarray
    annotation: np.ndarray

    def __post_init__(self):
        for name in FIELD_NAMES:
            vec = getattr(self, name)
            norm = float(np.linalg.norm(vec))
            if abs(norm - 1.0) > 1e-6:
                raise DegenerateEmbedding(
                    f"field {name!r} has norm {norm}, expected 1 +- 1e-6"
                )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in FIELD_NAMES}


def build_sign_embeddings(enc: Encoder, seg: Segment, gloss: str) -> SignEmbeddings:
    """Encode the segment's frames once and derive all six stored vectors."""
    if not seg.frame_paths:
        raise EmptyInput(f"segment {seg.doc_id} has no extracted frames")
    raw = encode_frames(enc, seg.frame_paths)
    base = agg_base(raw)
    average = agg_average(raw)
    best = agg_best(raw)
    return SignEmbeddings(
        doc_id=seg.doc_id,
        base=normalize_unit(base),
        average=normalize_unit(average),
        best=normalize_unit(best),
        summed=normalize_unit(agg_summed(base, average, best)),
        all=normalize_unit(agg_all(raw)),
        annotation=normalize_unit(annotation_embedding(enc, gloss)),
    )
