import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from attrswap.data import normalize_u8
from attrswap.latent_ops import SwapRequest, swap
from attrswap.service import create_app


@pytest.fixture
def catalog(small_dataset):
    return small_dataset.select_attributes(["shape", "hue"]).subset(range(12))


@pytest.fixture
def client(tiny_model, catalog):
    return TestClient(create_app(model=tiny_model, catalog=catalog))


def decode_png(b64: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(b64))) as im:
        return normalize_u8(np.asarray(im.convert("RGB"), dtype=np.uint8))


def test_schema_endpoint(client):
    r = client.get("/api/schema")
    assert r.status_code == 200
    body = r.json()
    assert body["attributes"] == [{"name": "shape", "class_count": 3},
                                  {"name": "hue", "class_count": 4}]
    assert body["image_size"] == 32
    assert body["checkpoint_hash"]


def test_unloaded_service_returns_503():
    app = create_app()
    r = TestClient(app).get("/api/schema")
    assert r.status_code == 503


def test_samples_pagination(client, catalog):
    r = client.get("/api/samples", params={"limit": 5, "offset": 10})
    assert r.status_code == 200
    body = r.json()
    assert body["total"] == 12
    assert [s["id"] for s in body["samples"]] == [10, 11]
    thumb = decode_png(body["samples"][0]["thumbnail"])
    assert thumb.shape == (32, 32, 3)
    assert np.allclose(thumb, catalog.images[10], atol=1 / 127.5)


def test_samples_offset_past_catalog(client):
    assert client.get("/api/samples", params={"offset": 100}).status_code == 400


def test_samples_labels_match_catalog(client, catalog):
    body = client.get("/api/samples", params={"limit": 3}).json()
    for s in body["samples"]:
        assert s["labels"]["shape"] == int(catalog.labels[s["id"], 0])
        assert s["labels"]["hue"] == int(catalog.labels[s["id"], 1])


def test_transfer_matches_library_swap(client, tiny_model, catalog):
    r = client.post("/api/transfer", json={
        "source_id": 0, "donors": {"hue": 3}, "attributes": ["hue"]})
    assert r.status_code == 200
    body = r.json()
    out = decode_png(body["image"])
    expect = swap(tiny_model, SwapRequest(
        source=catalog.images[0], donors={2: catalog.images[3]}))
    assert np.allclose(out, np.clip(expect, -1, 1), atol=2 / 127.5)
    assert set(body["predicted"]) == {"shape", "hue"}
    for pmf in body["predicted"].values():
        assert sum(pmf) == pytest.approx(1.0, abs=1e-5)


def test_transfer_unknown_source_404(client):
    r = client.post("/api/transfer", json={
        "source_id": 999, "donors": {"hue": 0}, "attributes": ["hue"]})
    assert r.status_code == 404


def test_transfer_unknown_attribute_422(client):
    r = client.post("/api/transfer", json={
        "source_id": 0, "donors": {"size": 1}, "attributes": ["size"]})
    assert r.status_code == 422


def test_transfer_missing_donor_422(client):
    r = client.post("/api/transfer", json={
        "source_id": 0, "donors": {}, "attributes": ["hue"]})
    assert r.status_code == 422


def test_mix_valid_and_invalid_weights(client):
    good = client.post("/api/mix", json={
        "attribute": "hue",
        "components": [{"id": 0, "weight": 0.25}, {"id": 1, "weight": 0.75}]})
    assert good.status_code == 200
    assert decode_png(good.json()["image"]).shape == (32, 32, 3)
    bad = client.post("/api/mix", json={
        "attribute": "hue",
        "components": [{"id": 0, "weight": 0.5}, {"id": 1, "weight": 0.4}]})
    assert bad.status_code == 422


def test_interpolate_frame_count_and_bounds(client):
    r = client.post("/api/interpolate", json={
        "attribute": "shape", "id_i": 0, "id_j": 5, "steps": 4})
    assert r.status_code == 200
    assert len(r.json()["images"]) == 4
    for steps in (1, 33):
        bad = client.post("/api/interpolate", json={
            "attribute": "shape", "id_i": 0, "id_j": 5, "steps": steps})
        assert bad.status_code == 422


def test_spec_endpoint_lists_request_schemas(client):
    body = client.get("/api/spec").json()
    assert set(body) == {"transfer", "mix", "interpolate"}
    assert "source_id" in body["transfer"]["properties"]
    assert "components" in body["mix"]["properties"]
    assert "steps" in body["interpolate"]["properties"]


def test_identical_requests_identical_responses(client):
    req = {"source_id": 1, "donors": {"shape": 2}, "attributes": ["shape"]}
    a = client.post("/api/transfer", json=req).json()
    b = client.post("/api/transfer", json=req).json()
    assert a == b
