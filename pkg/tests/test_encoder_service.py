"""Encoder service tests.

One protocol contract suite runs against three transports: the
in-process mock encoder, the HTTP service on its model-free hash
backend, and the HTTP service on the real image-text model when its
weights are present in the local cache (offline runs skip that case).
HTTP error semantics and the RemoteEncoder client round-trip are
covered against a live socket.
"""

import base64
import io
import socket
import threading
import time

import numpy as np
import pytest
import uvicorn
from fastapi.testclient import TestClient
from PIL import Image

from slvideo.embedder import MockEncoder, RemoteEncoder, encode_frames, make_encoder
from slvideo.encoder_service import (
    ClipBackend,
    HashBackend,
    create_encoder_app,
)
from slvideo.errors import EncoderUnavailable

DIM = 64
BATCH_LIMIT = 8


def png_bytes(color):
    img = Image.new("RGB", (6, 6), color)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


PNG_RED = png_bytes((200, 30, 30))
PNG_BLUE = png_bytes((30, 30, 200))
PNG_GREEN = png_bytes((30, 200, 30))


class DirectAdapter:
    """The contract surface of an in-process encoder object."""

    def __init__(self, enc):
        self.enc = enc

    def info(self):
        return {"model": self.enc.model_name, "dim": self.enc.dim}

    def encode_texts(self, texts):
        return [list(map(float, row)) for row in self.enc.encode_texts(texts)]

    def encode_images(self, images):
        return [list(map(float, row)) for row in self.enc.encode_images(images)]


class HttpAdapter:
    """The same surface spoken over the wire protocol."""

    def __init__(self, client):
        self.client = client

    def info(self):
        resp = self.client.get("/v1/info")
        assert resp.status_code == 200
        return resp.json()

    def _post(self, path, body):
        resp = self.client.post(path, json=body)
        assert resp.status_code == 200, resp.text
        payload = resp.json()
        assert payload["model"] == self.info()["model"]
        assert payload["dim"] == self.info()["dim"]
        return payload["vectors"]

    def encode_texts(self, texts):
        return self._post("/v1/encode_text", {"texts": list(texts)})

    def encode_images(self, images):
        blobs = [base64.b64encode(img).decode("ascii") for img in images]
        return self._post("/v1/encode_image", {"images_b64": blobs})


@pytest.fixture(scope="module")
def hash_backend():
    return HashBackend(dim=DIM)


@pytest.fixture(scope="module")
def hash_client(hash_backend):
    app = create_encoder_app(hash_backend, batch_limit=BATCH_LIMIT)
    with TestClient(app) as client:
        yield client


@pytest.fixture(scope="module")
def clip_adapter():
    # local cache only; tests must never reach for the network
    mp = pytest.MonkeyPatch()
    mp.setenv("HF_HUB_OFFLINE", "1")
    mp.setenv("TRANSFORMERS_OFFLINE", "1")
    try:
        backend = ClipBackend()
    except Exception as exc:
        mp.undo()
        pytest.skip(f"model weights not cached locally: {type(exc).__name__}")
    with TestClient(create_encoder_app(backend, batch_limit=BATCH_LIMIT)) as client:
        yield HttpAdapter(client)
    mp.undo()


@pytest.fixture(params=["mock", "hash", "clip"])
def adapter(request, hash_client):
    if request.param == "mock":
        return DirectAdapter(MockEncoder(dim=DIM))
    if request.param == "hash":
        return HttpAdapter(hash_client)
    return request.getfixturevalue("clip_adapter")


# -- the contract suite, identical across transports


def test_info_shape(adapter):
    info = adapter.info()
    assert isinstance(info["model"], str) and info["model"]
    assert isinstance(info["dim"], int) and info["dim"] > 0


def test_text_vector_shape(adapter):
    dim = adapter.info()["dim"]
    vectors = adapter.encode_texts(["Lobo", "Dúvida", "casa pequena"])
    assert len(vectors) == 3
    assert all(len(v) == dim for v in vectors)
    assert all(all(np.isfinite(x) for x in v) for v in vectors)


def test_text_determinism(adapter):
    first = adapter.encode_texts(["Lobo"])
    second = adapter.encode_texts(["Lobo"])
    assert first == second


def test_distinct_texts_differ(adapter):
    wolf, hare = adapter.encode_texts(["Lobo", "Lebre"])
    assert wolf != hare


def test_text_batch_alignment(adapter):
    texts = ["um", "dois", "três"]
    batched = adapter.encode_texts(texts)
    singles = [adapter.encode_texts([t])[0] for t in texts]
    assert batched == singles


def test_image_vector_shape(adapter):
    dim = adapter.info()["dim"]
    vectors = adapter.encode_images([PNG_RED, PNG_BLUE])
    assert len(vectors) == 2
    assert all(len(v) == dim for v in vectors)


def test_image_determinism(adapter):
    assert adapter.encode_images([PNG_RED]) == adapter.encode_images([PNG_RED])


def test_image_batch_alignment(adapter):
    images = [PNG_RED, PNG_BLUE, PNG_GREEN]
    batched = adapter.encode_images(images)
    singles = [adapter.encode_images([img])[0] for img in images]
    assert batched == singles


def test_duplicate_image_in_batch(adapter):
    vectors = adapter.encode_images([PNG_RED, PNG_BLUE, PNG_RED])
    assert vectors[0] == vectors[2]
    assert vectors[0] != vectors[1]


# -- HTTP error semantics (hash backend app)


def test_batch_too_large_text(hash_client):
    resp = hash_client.post("/v1/encode_text",
                            json={"texts": ["x"] * (BATCH_LIMIT + 1)})
    assert resp.status_code == 413
    assert resp.json()["code"] == "batch_too_large"


def test_batch_too_large_image(hash_client):
    blob = base64.b64encode(PNG_RED).decode("ascii")
    resp = hash_client.post("/v1/encode_image",
                            json={"images_b64": [blob] * (BATCH_LIMIT + 1)})
    assert resp.status_code == 413
    assert resp.json()["code"] == "batch_too_large"


def test_batch_at_limit_accepted(hash_client):
    resp = hash_client.post("/v1/encode_text",
                            json={"texts": ["x"] * BATCH_LIMIT})
    assert resp.status_code == 200
    assert len(resp.json()["vectors"]) == BATCH_LIMIT


def test_malformed_base64(hash_client):
    resp = hash_client.post("/v1/encode_image",
                            json={"images_b64": ["!!!not base64!!!"]})
    assert resp.status_code == 400
    body = resp.json()
    assert body["code"] == "bad_image"
    assert "image 0" in body["message"]


@pytest.mark.parametrize("body", [
    {},
    {"texts": "Lobo"},
    {"texts": []},
    {"texts": [1, 2]},
])
def test_invalid_text_request(hash_client, body):
    resp = hash_client.post("/v1/encode_text", json=body)
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid_request"


def test_http_vectors_match_backend_bitwise(hash_client, hash_backend):
    texts = ["alpha", "beta"]
    over_http = hash_client.post("/v1/encode_text",
                                 json={"texts": texts}).json()["vectors"]
    direct = hash_backend.encode_texts(texts)
    assert np.array_equal(np.asarray(over_http, dtype=np.float64), direct)


def test_undecodable_image_on_real_model(clip_adapter):
    # the hash backend hashes raw bytes, but a real model must parse the
    # image and reject junk
    blob = base64.b64encode(b"definitely not a picture").decode("ascii")
    resp = clip_adapter.client.post("/v1/encode_image",
                                    json={"images_b64": [blob]})
    assert resp.status_code == 400
    assert resp.json()["code"] == "bad_image"


def test_real_model_reports_512(clip_adapter):
    assert clip_adapter.info()["dim"] == 512


# -- RemoteEncoder client against a live socket


@pytest.fixture(scope="module")
def live_service():
    backend = HashBackend(dim=32)
    app = create_encoder_app(backend, batch_limit=BATCH_LIMIT)
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    server = uvicorn.Server(uvicorn.Config(
        app, host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("encoder service did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}", backend
    server.should_exit = True
    thread.join(timeout=5)


def test_remote_encoder_round_trip(live_service):
    endpoint, backend = live_service
    enc = RemoteEncoder(endpoint)
    assert enc.dim == 32
    assert enc.model_name == "hash-encoder"
    texts = ["Lobo", "Dúvida"]
    assert np.array_equal(enc.encode_texts(texts), backend.encode_texts(texts))
    images = [PNG_RED, PNG_BLUE]
    assert np.array_equal(enc.encode_images(images),
                          backend.encode_images(images))


def test_make_encoder_remote_kind(live_service):
    endpoint, _ = live_service
    enc = make_encoder("remote", endpoint)
    assert enc.kind == "remote"
    assert enc.dim == 32


def test_remote_encoder_reads_frames(live_service, tmp_path):
    endpoint, backend = live_service
    paths = []
    for i, payload in enumerate([PNG_RED, PNG_GREEN]):
        p = tmp_path / f"frame{i}.png"
        p.write_bytes(payload)
        paths.append(p)
    enc = RemoteEncoder(endpoint)
    assert np.array_equal(encode_frames(enc, paths),
                          backend.encode_images([PNG_RED, PNG_GREEN]))


def test_remote_encoder_surfaces_service_errors(live_service):
    endpoint, _ = live_service
    enc = RemoteEncoder(endpoint)
    with pytest.raises(EncoderUnavailable):
        enc.encode_texts(["x"] * (BATCH_LIMIT + 1))


def test_client_batching_stays_under_service_limit(live_service):
    endpoint, backend = live_service
    enc = RemoteEncoder(endpoint, batch_size=4)
    texts = [f"palavra {i}" for i in range(11)]  # 3 chunks: 4 + 4 + 3
    assert np.array_equal(enc.encode_texts(texts), backend.encode_texts(texts))
