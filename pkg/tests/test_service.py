"""HTTP service tests: endpoint contracts, the shared error envelope, and
parity between the API and the query engine underneath it."""

import pytest
from fastapi.testclient import TestClient

from helpers.corpus import build_full_corpus, clone_corpus, runtime_for
from slvideo.query import SearchMode, SearchRequest
from slvideo.service import create_app


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return build_full_corpus(tmp_path_factory.mktemp("svc"))


@pytest.fixture(scope="module")
def client(corpus):
    runtime = runtime_for(corpus)
    with TestClient(create_app(runtime), raise_server_exceptions=False) as c:
        c.runtime = runtime
        yield c


@pytest.fixture()
def mutable_client(corpus, tmp_path):
    runtime = runtime_for(clone_corpus(corpus, tmp_path / "svc"))
    with TestClient(create_app(runtime), raise_server_exceptions=False) as c:
        c.runtime = runtime
        yield c


def assert_error(resp, status, code):
    assert resp.status_code == status
    body = resp.json()
    assert body["code"] == code
    assert isinstance(body["message"], str) and body["message"]


# -- health and corpus browsing


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["doc_count"] == client.runtime.index.doc_count > 0
    assert body["encoder"] == {"kind": "mock", "dim": 32}


def test_videos_listing(client):
    resp = client.get("/videos")
    assert resp.status_code == 200
    videos = resp.json()
    assert [v["video_id"] for v in videos] == ["alpha", "beta", "gamma"]
    assert videos[0]["fps"] == 25.0
    assert videos[0]["media_path"].endswith("alpha.mp4")


def test_video_annotations(client):
    resp = client.get("/videos/alpha/annotations")
    assert resp.status_code == 200
    anns = resp.json()
    assert all(a["video_id"] == "alpha" for a in anns)
    a1 = next(a for a in anns if a["annotation_id"] == "a1")
    assert a1["gloss"] == "Dúvida"
    assert a1["tier_role"] == "FacialExpression"
    assert {"start_ms", "end_ms", "revision", "origin"} <= set(a1)


def test_video_annotations_unknown_video(client):
    assert_error(client.get("/videos/nope/annotations"), 404, "unknown_video")


# -- search


def test_search_matches_engine(client):
    resp = client.post("/search", json={
        "mode": "Annotation", "query": "Dúvida", "k": 10})
    assert resp.status_code == 200
    api_docs = [(r["doc_id"], r["rank"]) for r in resp.json()]
    direct = client.runtime.engine.search_text(SearchRequest(
        mode=SearchMode.ANNOTATION, query_text="Dúvida", k=10))
    assert api_docs == [(r.doc_id, r.rank) for r in direct]
    assert len(api_docs) == 10


def test_search_result_shape(client):
    resp = client.post("/search", json={"mode": "TextPlain", "query": "lobo"})
    first = resp.json()[0]
    assert set(first) == {
        "doc_id", "video_id", "annotation_id", "gloss", "start_ms", "end_ms",
        "score", "rank",
    }
    assert first["score"] == 1.0


def test_search_default_k_from_config(client):
    resp = client.post("/search", json={"mode": "FrameAll", "query": "x"})
    assert len(resp.json()) == 10


def test_search_empty_query(client):
    assert_error(
        client.post("/search", json={"mode": "Annotation", "query": "  "}),
        400, "empty_query")
    assert_error(
        client.post("/search", json={"mode": "Annotation"}),
        400, "empty_query")


def test_search_unknown_mode(client):
    assert_error(
        client.post("/search", json={"mode": "Psychic", "query": "x"}),
        400, "unknown_mode")


def test_search_missing_mode(client):
    assert_error(client.post("/search", json={"query": "x"}),
                 400, "invalid_request")


def test_search_bad_k(client):
    assert_error(
        client.post("/search", json={"mode": "FrameAll", "query": "x", "k": 0}),
        400, "invalid_request")
    assert_error(
        client.post("/search",
                    json={"mode": "FrameAll", "query": "x", "k": "many"}),
        400, "invalid_request")


def test_search_non_object_body(client):
    assert_error(client.post("/search", json=[1, 2]), 400, "invalid_request")


# -- thesaurus


def test_similar_excludes_source(client):
    resp = client.get("/similar/alpha_a1")
    assert resp.status_code == 200
    docs = [r["doc_id"] for r in resp.json()]
    assert "alpha_a1" not in docs
    assert len(docs) == 10


def test_similar_parity_with_engine(client):
    resp = client.get("/similar/beta_a2", params={"field": "annotation", "k": 5})
    direct = client.runtime.engine.search_similar(
        "beta_a2", field="annotation", k=5)
    assert [(r["doc_id"], r["rank"]) for r in resp.json()] == [
        (r.doc_id, r.rank) for r in direct]


def test_similar_unknown_document(client):
    assert_error(client.get("/similar/alpha_zz"), 404, "unknown_document")


def test_similar_invalid_doc_id(client):
    assert_error(client.get("/similar/no-separator"), 400, "invalid_doc_id")


def test_similar_unknown_field(client):
    assert_error(client.get("/similar/alpha_a1", params={"field": "woo"}),
                 400, "unknown_field")


# -- annotation editing


def test_create_annotation(mutable_client):
    resp = mutable_client.post("/annotations", json={
        "video_id": "alpha", "gloss": "Novo", "start_ms": 25000,
        "end_ms": 25400,
    })
    assert resp.status_code == 201
    body = resp.json()
    assert body["annotation_id"] == "u1"
    assert body["revision"] == 0
    assert body["origin"] == "UserCreated"
    assert body["tier_id"] == "GLOSA_EXP_FACIAL"
    listed = mutable_client.get("/videos/alpha/annotations").json()
    assert any(a["annotation_id"] == "u1" for a in listed)


def test_create_generates_sequential_ids(mutable_client):
    first = mutable_client.post("/annotations", json={
        "video_id": "beta", "gloss": "Um", "start_ms": 20000, "end_ms": 20200})
    second = mutable_client.post("/annotations", json={
        "video_id": "beta", "gloss": "Dois", "start_ms": 21000,
        "end_ms": 21200})
    assert first.json()["annotation_id"] == "u1"
    assert second.json()["annotation_id"] == "u2"


def test_create_validation_errors(mutable_client):
    assert_error(
        mutable_client.post("/annotations", json={
            "video_id": "alpha", "gloss": "X", "start_ms": 300, "end_ms": 200}),
        400, "invalid_interval")
    assert_error(
        mutable_client.post("/annotations", json={
            "video_id": "alpha", "gloss": " ", "start_ms": 100, "end_ms": 200}),
        400, "empty_gloss")
    assert_error(
        mutable_client.post("/annotations", json={
            "video_id": "ghost", "gloss": "X", "start_ms": 100, "end_ms": 200}),
        404, "unknown_video")
    assert_error(
        mutable_client.post("/annotations", json={
            "video_id": "alpha", "gloss": "X"}),
        400, "invalid_request")


def test_edit_annotation_bumps_revision(mutable_client):
    resp = mutable_client.put("/annotations/alpha/a1", json={
        "gloss": "Dúvida grande", "start_ms": 0, "end_ms": 120, "revision": 0})
    assert resp.status_code == 200
    body = resp.json()
    assert body["revision"] == 1
    assert body["origin"] == "UserEdited"
    assert body["gloss"] == "Dúvida grande"
    # tier is preserved from the stored annotation
    assert body["tier_id"] == "GLOSA_EXP_FACIAL"


def test_edit_stale_revision_conflict(mutable_client):
    mutable_client.put("/annotations/alpha/a1", json={
        "gloss": "Primeira", "start_ms": 0, "end_ms": 120, "revision": 0})
    resp = mutable_client.put("/annotations/alpha/a1", json={
        "gloss": "Segunda", "start_ms": 0, "end_ms": 120, "revision": 0})
    assert_error(resp, 409, "concurrent_edit_conflict")
    assert resp.json()["current_revision"] == 1


def test_edit_requires_revision(mutable_client):
    assert_error(
        mutable_client.put("/annotations/alpha/a1", json={
            "gloss": "X", "start_ms": 0, "end_ms": 120}),
        400, "invalid_request")


# -- reindex


def test_reindex_endpoint(mutable_client):
    before = mutable_client.get("/health").json()["doc_count"]
    mutable_client.post("/annotations", json={
        "video_id": "alpha", "gloss": "Novo", "start_ms": 25000,
        "end_ms": 25400,
    })
    resp = mutable_client.post("/admin/reindex")
    assert resp.status_code == 200
    body = resp.json()
    assert body["doc_count"] == before
    assert body["skipped"] == ["alpha_u1"]
    assert mutable_client.get("/health").json()["doc_count"] == before


# -- frames


def test_segment_frames_listing(client, corpus):
    resp = client.get("/segments/alpha_a1/frames")
    assert resp.status_code == 200
    urls = resp.json()
    assert urls
    assert all(u.startswith("/frames/alpha_a1_") for u in urls)
    timestamps = [int(u.rsplit("_", 1)[1].removesuffix(".png")) for u in urls]
    assert timestamps == sorted(timestamps)


def test_segment_frames_unknown_doc(client):
    assert_error(client.get("/segments/alpha_zz/frames"),
                 404, "unknown_document")


def test_frame_file_served(client, corpus):
    url = client.get("/segments/alpha_a1/frames").json()[0]
    resp = client.get(url)
    assert resp.status_code == 200
    assert resp.headers["content-type"] == "image/png"
    name = url.removeprefix("/frames/")
    assert resp.content == (corpus.frames_dir / name).read_bytes()


def test_frame_file_missing(client):
    assert_error(client.get("/frames/ghost.png"), 404, "media_missing")


def test_frame_file_rejects_traversal(client):
    resp = client.get("/frames/..%2Fconfig.json")
    assert resp.status_code in (400, 404)
