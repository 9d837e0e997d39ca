import io

import pytest
from fastapi.testclient import TestClient

from cbcode import __version__
from cbcode.codec import build_matrix, payload_to_symbols
from cbcode.harness import occlude
from cbcode.pipeline import encode
from cbcode.service import MAX_BODY_BYTES, app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def png_bytes(image):
    buf = io.BytesIO()
    image.to_pil().save(buf, format="PNG")
    return buf.getvalue()


def clean_png(payload=123456789):
    return png_bytes(encode(payload))


# --- health -------------------------------------------------------------------


def test_health(client):
    r = client.get("/v1/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["version"] == __version__
    assert body["uptime_s"] >= 0


# --- decode success -------------------------------------------------------------


def test_decode_raw_body(client):
    r = client.post("/v1/decode", content=clean_png())
    assert r.status_code == 200
    body = r.json()
    assert body["payload"] == 123456789
    assert body["crc_ok"] and body["crc_exact"]
    assert body["version"] == __version__
    assert len(body["confidences"]) == 12


def test_decode_multipart(client):
    files = {"image": ("code.png", clean_png(555), "image/png")}
    r = client.post("/v1/decode", files=files)
    assert r.status_code == 200
    assert r.json()["payload"] == 555


def test_decode_report_fields_present(client):
    r = client.post("/v1/decode", content=clean_png(31337))
    body = r.json()
    for key in (
        "found",
        "corners",
        "rotation",
        "mirrored",
        "symbols",
        "payload",
        "crc_read",
        "crc_computed",
        "crc_ok",
        "crc_exact",
        "confidences",
        "attempts",
        "elapsed_ms",
        "version",
    ):
        assert key in body


# --- decode failures --------------------------------------------------------------


def test_decode_not_found_is_422_with_report(client):
    from PIL import Image

    buf = io.BytesIO()
    Image.new("RGB", (80, 80), (255, 255, 255)).save(buf, format="PNG")
    r = client.post("/v1/decode", content=buf.getvalue())
    assert r.status_code == 422
    body = r.json()
    assert body["found"] is False
    assert body["payload"] is None
    assert body["version"] == __version__


def test_decode_crc_failure_is_422_with_report(client):
    img = occlude(encode(99), cell=6, coverage=1.0, color=(0x80, 0x80, 0x80))
    r = client.post("/v1/decode", content=png_bytes(img))
    assert r.status_code == 422
    body = r.json()
    assert body["found"] is True
    assert body["payload"] is None
    assert body["crc_ok"] is False


def test_decode_garbage_is_400(client):
    r = client.post("/v1/decode", content=b"definitely not an image")
    assert r.status_code == 400


def test_decode_empty_body_is_400(client):
    r = client.post("/v1/decode", content=b"")
    assert r.status_code == 400


def test_decode_oversize_is_413(client):
    r = client.post(
        "/v1/decode",
        content=b"\x89PNG" + b"\0" * MAX_BODY_BYTES,
    )
    assert r.status_code == 413


# --- options ------------------------------------------------------------------------


def test_strict_crc_param(client):
    payload = 4096
    crc = build_matrix(payload_to_symbols(payload)).crc
    off = (crc + 5) % 256
    img = occlude(encode(payload), cell=4, coverage=1.0, color=(off, off, off))
    body = png_bytes(img)
    ok = client.post("/v1/decode", content=body)
    assert ok.status_code == 200
    assert ok.json()["crc_exact"] is False
    strict = client.post("/v1/decode", content=body, params={"strict_crc": "true"})
    assert strict.status_code == 422


def test_samples_param_validated(client):
    r = client.post("/v1/decode", content=clean_png(), params={"samples": 7})
    assert r.status_code == 400


def test_region_param(client):
    import numpy as np

    from cbcode.raster import RasterImage, RenderSpec, embed

    host = RasterImage(np.full((28, 28, 3), 0xC8, dtype=np.uint8))
    img = embed(host, encode(31415926, RenderSpec(block_px=1)), 9, 12)
    r = client.post(
        "/v1/decode",
        content=png_bytes(img),
        params={"region": "9,12,13,12,13,16,9,16"},
    )
    assert r.status_code == 200
    assert r.json()["payload"] == 31415926


def test_region_param_malformed(client):
    r = client.post(
        "/v1/decode", content=clean_png(), params={"region": "1,2,3"}
    )
    assert r.status_code == 400


def test_timeout_param_capped(client):
    # absurd timeouts are clamped server-side; request still succeeds
    r = client.post(
        "/v1/decode", content=clean_png(), params={"timeout_ms": 10_000_000}
    )
    assert r.status_code == 200
