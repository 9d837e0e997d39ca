"""HTTP decode service.

One stateless endpoint decodes an uploaded PNG and returns the full
report; clients can branch on the status code alone (200 verified,
422 found-but-unverified or not found, 400 malformed, 413 oversize).
"""

from __future__ import annotations

import io
import os
import time

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.concurrency import run_in_threadpool

from . import __version__
from .pipeline import DecodeError, DecodeOptions, decode
from .raster import RasterImage

__all__ = ["app", "serve", "DecodeQuery", "DecodeResponse", "MAX_BODY_BYTES"]

MAX_BODY_BYTES = 16 * 1024 * 1024
_TIMEOUT_CAP_MS = 10_000

_started = time.monotonic()

app = FastAPI(title="cbcode decode service", version=__version__)


class DecodeQuery(BaseModel):
    """Decode options accepted as query parameters."""

    samples: int = Field(default=5, description="sample points per cell: 5, 10 or 20")
    timeout_ms: int = Field(default=6000, gt=0)
    strict_crc: bool = False
    prefilter: bool = False
    color_correction: bool = False
    region: str | None = Field(
        default=None, description="hint quad x1,y1,x2,y2,x3,y3,x4,y4"
    )


class DecodeResponse(BaseModel):
    """DecodeReport fields plus the server version."""

    found: bool
    corners: list[list[float]] | None
    rotation: dict | None
    mirrored: bool | None
    symbols: str | None
    payload: int | None
    crc_read: int | None
    crc_computed: int | None
    crc_ok: bool
    crc_exact: bool
    confidences: list[float] | None
    attempts: int
    elapsed_ms: float
    version: str


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": detail})


def _options_from_query(q: DecodeQuery) -> DecodeOptions:
    region = None
    if q.region:
        parts = [p for p in q.region.split(",") if p != ""]
        if len(parts) != 8:
            raise ValueError("region needs 8 comma-separated numbers")
        vals = [float(p) for p in parts]
        region = tuple((vals[i], vals[i + 1]) for i in range(0, 8, 2))
    return DecodeOptions(
        sample_points=q.samples,
        timeout_ms=min(q.timeout_ms, _TIMEOUT_CAP_MS),
        v_tolerance=0 if q.strict_crc else DecodeOptions.v_tolerance,
        enable_prefilter=q.prefilter,
        enable_color_correction=q.color_correction,
        region_hint=region,
    )


@app.get("/v1/health")
def health() -> dict:
    return {
        "status": "ok",
        "version": __version__,
        "uptime_s": round(time.monotonic() - _started, 3),
    }


@app.post("/v1/decode", response_model=DecodeResponse, responses={422: {"model": DecodeResponse}})
async def decode_endpoint(request: Request, params: DecodeQuery = Depends()):
    declared = request.headers.get("content-length")
    if declared and declared.isdigit() and int(declared) > MAX_BODY_BYTES:
        return JSONResponse(status_code=413, content={"detail": "body exceeds 16 MiB"})

    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        upload = next(
            (v for v in form.values() if hasattr(v, "read")),
            None,
        )
        if upload is None:
            return _bad_request("multipart form carries no file")
        data = await upload.read()
    else:
        data = await request.body()

    if not data:
        return _bad_request("empty body")
    if len(data) > MAX_BODY_BYTES:
        return JSONResponse(status_code=413, content={"detail": "body exceeds 16 MiB"})

    try:
        image = RasterImage.load(io.BytesIO(data))
    except Exception:
        return _bad_request("body is not a decodable image")

    try:
        options = _options_from_query(params)
    except ValueError as exc:
        return _bad_request(str(exc))

    try:
        report = await run_in_threadpool(decode, image, options)
    except DecodeError as exc:
        return JSONResponse(
            status_code=422, content={**exc.report.to_dict(), "version": __version__}
        )
    return DecodeResponse(**report.to_dict(), version=__version__)


def serve() -> None:
    """Run the service; PORT env selects the port (default 8000)."""
    import uvicorn

    uvicorn.run(app, host="0.0.0.0", port=int(os.environ.get("PORT", "8000")))
