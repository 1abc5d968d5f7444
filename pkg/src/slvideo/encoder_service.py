"""Embedding encoder HTTP service.

Serves a pretrained image-text model behind the wire protocol the
RemoteEncoder client speaks:

    POST /v1/encode_text   {"texts": [str, ...]}
    POST /v1/encode_image  {"images_b64": [str, ...]}   (base64 PNG)
    GET  /v1/info

Responses carry {"model", "dim", "vectors"}. The reported dim comes
from a probe inference at startup, never from configuration, so any
model of the family works without drift. Inference runs behind a lock:
requests are accepted concurrently but encode serially, each request
being one batch.

Backends: "clip" loads a sentence-transformers image-text model (heavy
optional dependency, real embeddings); "hash" is the model-free
deterministic stand-in, useful for protocol testing and offline runs.
"""

from __future__ import annotations

import argparse
import base64
import binascii
import io
import logging
import socket
import sys
import threading
from dataclasses import dataclass

import numpy as np
import uvicorn
from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse

from .embedder import MockEncoder
from .errors import BindFailure

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "clip-ViT-B-32"
DEFAULT_BATCH_LIMIT = 32


class ClipBackend:
    """Inference on a sentence-transformers image-text checkpoint."""

    def __init__(self, model_name: str = DEFAULT_MODEL,
                 device: str | None = None):
        from sentence_transformers import SentenceTransformer

        self.model_name = model_name
        self._model = SentenceTransformer(model_name, device=device)
        self._model.eval()

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        out = self._model.encode(texts, convert_to_numpy=True,
                                 normalize_embeddings=False,
                                 show_progress_bar=False)
        return np.asarray(out, dtype=np.float64)

    def encode_images(self, images: list[bytes]) -> np.ndarray:
        from PIL import Image

        pil_images = []
        for position, payload in enumerate(images):
            try:
                img = Image.open(io.BytesIO(payload))
                img.load()
            except Exception as exc:
                raise BadImage(position, str(exc)) from exc
            pil_images.append(img.convert("RGB"))
        out = self._model.encode(pil_images, convert_to_numpy=True,
                                 normalize_embeddings=False,
                                 show_progress_bar=False)
        return np.asarray(out, dtype=np.float64)


class HashBackend:
    """Model-free backend with the same determinism contract: a vector is
    a pure function of the input bytes."""

    def __init__(self, dim: int = 512):
        self._enc = MockEncoder(dim=dim, model_name="hash-encoder")
        self.model_name = self._enc.model_name

    def encode_texts(self, texts: list[str]) -> np.ndarray:
        return self._enc.encode_texts(texts)

    def encode_images(self, images: list[bytes]) -> np.ndarray:
        return self._enc.encode_images(images)


class BadImage(Exception):
    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"image {position}: {reason}")


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message})


def create_encoder_app(backend, batch_limit: int = DEFAULT_BATCH_LIMIT) -> FastAPI:
    probe = backend.encode_texts(["dimension probe"])
    dim = int(probe.shape[1])
    lock = threading.Lock()
    app = FastAPI(title="embedding encoder")

    def _check_batch(items, key: str):
        if not isinstance(items, list) or not items:
            return _error(400, "invalid_request",
                          f"{key} must be a non-empty list")
        if not all(isinstance(item, str) for item in items):
            return _error(400, "invalid_request",
                          f"every entry of {key} must be a string")
        if len(items) > batch_limit:
            return _error(413, "batch_too_large",
                          f"batch of {len(items)} exceeds limit {batch_limit}")
        return None

    def _vector_response(vectors: np.ndarray, count: int):
        if vectors.shape != (count, dim):
            return _error(500, "internal",
                          f"backend returned shape {vectors.shape}, "
                          f"expected ({count}, {dim})")
        return {"model": backend.model_name, "dim": dim,
                "vectors": vectors.tolist()}

    @app.get("/v1/info")
    def info():
        return {"model": backend.model_name, "dim": dim}

    @app.post("/v1/encode_text")
    def encode_text(body: dict = Body(...)):
        texts = body.get("texts")
        bad = _check_batch(texts, "texts")
        if bad is not None:
            return bad
        with lock:
            vectors = backend.encode_texts(list(texts))
        return _vector_response(vectors, len(texts))

    @app.post("/v1/encode_image")
    def encode_image(body: dict = Body(...)):
        images_b64 = body.get("images_b64")
        bad = _check_batch(images_b64, "images_b64")
        if bad is not None:
            return bad
        decoded = []
        for position, blob in enumerate(images_b64):
            try:
                decoded.append(base64.b64decode(blob, validate=True))
            except (binascii.Error, ValueError) as exc:
                return _error(400, "bad_image",
                              f"image {position} is not valid base64: {exc}")
        try:
            with lock:
                vectors = backend.encode_images(decoded)
        except BadImage as exc:
            return _error(400, "bad_image", str(exc))
        return _vector_response(vectors, len(decoded))

    return app


@dataclass(frozen=True)
class EncoderServiceConfig:
    backend: str = "clip"
    model: str = DEFAULT_MODEL
    device: str | None = None
    dim: int = 512
    batch_limit: int = DEFAULT_BATCH_LIMIT
    host: str = "127.0.0.1"
    port: int = 8100


def build_backend(config: EncoderServiceConfig):
    if config.backend == "hash":
        return HashBackend(dim=config.dim)
    if config.backend == "clip":
        return ClipBackend(config.model, device=config.device)
    raise ValueError(f"unknown backend {config.backend!r}")


def serve_encoder(config: EncoderServiceConfig) -> None:
    backend = build_backend(config)
    app = create_encoder_app(backend, batch_limit=config.batch_limit)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((config.host, config.port))
    except OSError as exc:
        raise BindFailure(
            f"cannot bind {config.host}:{config.port}: {exc}") from exc
    finally:
        probe.close()
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slvideo-encoder",
        description="HTTP embedding encoder for the retrieval service.")
    parser.add_argument("--backend", choices=["clip", "hash"], default="clip")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="sentence-transformers model name (clip backend)")
    parser.add_argument("--device", default=None,
                        help="torch device hint, e.g. cpu or cuda")
    parser.add_argument("--dim", type=int, default=512,
                        help="vector width (hash backend only)")
    parser.add_argument("--batch-limit", type=int, default=DEFAULT_BATCH_LIMIT)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    args = parser.parse_args(argv)

    config = EncoderServiceConfig(
        backend=args.backend, model=args.model, device=args.device,
        dim=args.dim, batch_limit=args.batch_limit,
        host=args.host, port=args.port,
    )
    try:
        serve_encoder(config)
    except BindFailure as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except Exception as exc:
        # model load failure aborts startup, per the protocol contract
        print(f"error [startup]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
