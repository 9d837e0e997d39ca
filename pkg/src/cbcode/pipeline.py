"""End-to-end encode/decode orchestration.

A decode walks a fixed attempt ladder — as configured, prefilter toggled,
densest sampling, color correction — until CRC verification passes or the
time budget runs out.  Every outcome, success or failure, carries a full
report; failures raise DecodeError subclasses with the report attached.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .codec import (
    SymbolSequence,
    build_matrix,
    crc8,
    pack,
    payload_to_symbols,
    symbols_to_payload,
)
from .colorproc import correct_image, estimate_white, gaussian_prefilter
from .classifier import (
    ConfidenceParams,
    LowConfidenceError,
    VChannelMismatchError,
    classify_cells,
    pattern_for,
)
from .locator import (
    AmbiguousCodeError,
    BadHintError,
    CodeNotFoundError,
    CodeRegion,
    find_code_region,
    region_from_hint,
)
from .raster import RasterImage, RenderSpec, render

__all__ = [
    "DecodeOptions",
    "DecodeReport",
    "DecodeError",
    "NotFoundError",
    "CrcFailureError",
    "DecodeTimeoutError",
    "decode",
    "decode_file",
    "encode",
]

_MIN_BLOCK_PX = 6.0  # below this, sampling gets an exact integer upscale first


@dataclass(frozen=True)
class DecodeOptions:
    """Tunable decode behavior; defaults follow the reference workflow."""

    sample_points: int = 5
    timeout_ms: int = 6000
    v_tolerance: int = 0x14  # allowed |crc_read - crc_computed|; 0 = strict
    enable_color_correction: bool = False
    enable_prefilter: bool = False
    region_hint: tuple | None = None  # 4 (x, y) corners, pixel-edge coords
    confidence_threshold: float = 0.5

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if not 0 <= self.v_tolerance <= 0x7F:
            raise ValueError("v_tolerance must be in [0, 0x7F]")
        if not 0.0 < self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in (0, 1]")
        pattern_for(self.sample_points)  # validates the count


@dataclass(frozen=True)
class DecodeReport:
    """Complete account of one decode call."""

    found: bool
    corners: tuple[tuple[float, float], ...] | None
    rotation: dict | None  # {"quarter_turns": int, "residual_deg": float}
    mirrored: bool | None
    symbols: str | None
    payload: int | None
    crc_read: int | None
    crc_computed: int | None
    crc_ok: bool
    crc_exact: bool
    confidences: tuple[float, ...] | None
    attempts: int
    elapsed_ms: float

    def __post_init__(self):
        if self.crc_ok and not self.found:
            raise ValueError("crc_ok implies found")
        if self.crc_exact and not self.crc_ok:
            raise ValueError("crc_exact implies crc_ok")
        if (self.payload is not None) != self.crc_ok:
            raise ValueError("payload must be present exactly when crc_ok")

    def to_dict(self) -> dict:
        return {
            "found": self.found,
            "corners": None if self.corners is None else [list(c) for c in self.corners],
            "rotation": self.rotation,
            "mirrored": self.mirrored,
            "symbols": self.symbols,
            "payload": self.payload,
            "crc_read": self.crc_read,
            "crc_computed": self.crc_computed,
            "crc_ok": self.crc_ok,
            "crc_exact": self.crc_exact,
            "confidences": None if self.confidences is None else list(self.confidences),
            "attempts": self.attempts,
            "elapsed_ms": self.elapsed_ms,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class DecodeError(Exception):
    """Decode failure; .report holds the best attempt's full report."""

    def __init__(self, message: str, report: DecodeReport):
        super().__init__(message)
        self.report = report


class NotFoundError(DecodeError):
    """No code region was located on any attempt."""


class CrcFailureError(DecodeError):
    """A region was found but verification never passed."""


class DecodeTimeoutError(DecodeError):
    """The time budget ran out before the ladder finished."""


def encode(payload: int, render_spec: RenderSpec | None = None) -> RasterImage:
    """Render the code image for an integer payload."""
    return render(build_matrix(payload_to_symbols(payload)), render_spec or RenderSpec())


def _upscale_nearest(image: RasterImage, m: int) -> RasterImage:
    px = np.repeat(np.repeat(image.pixels, m, axis=0), m, axis=1)
    return RasterImage(px)


def _region_report_fields(region: CodeRegion, upscale: int) -> tuple:
    corners = region.corners
    if upscale > 1:
        corners = (corners + 0.5) / upscale - 0.5
    rotation = {
        "quarter_turns": region.rotation_quarter,
        "residual_deg": round(region.rotation_residual_deg, 3),
    }
    return tuple((float(x), float(y)) for x, y in corners), rotation, region.mirrored


class _SkipAttempt(Exception):
    """This ladder rung cannot run (e.g. no white reference to correct with)."""


def _attempt(image: RasterImage, opts: DecodeOptions, attempts: int, t0: float) -> DecodeReport:
    img = image
    if opts.enable_prefilter:
        img = gaussian_prefilter(img, sigma=1.0)
    if opts.enable_color_correction:
        try:
            img = correct_image(img, estimate_white(img))
        except ValueError as exc:
            raise _SkipAttempt(str(exc)) from exc

    if opts.region_hint is not None:
        region = region_from_hint(img, opts.region_hint)
    else:
        region = find_code_region(img)

    upscale = 1
    if region.block_px < _MIN_BLOCK_PX:
        upscale = math.ceil(12.0 / region.block_px)
        img = _upscale_nearest(img, upscale)
        region = region.scaled(upscale)

    corners, rotation, mirrored = _region_report_fields(region, upscale)
    params = ConfidenceParams(threshold=opts.confidence_threshold)
    try:
        result = classify_cells(img, region, pattern_for(opts.sample_points), params)
    except (LowConfidenceError, VChannelMismatchError):
        return DecodeReport(
            found=True,
            corners=corners,
            rotation=rotation,
            mirrored=mirrored,
            symbols=None,
            payload=None,
            crc_read=None,
            crc_computed=None,
            crc_ok=False,
            crc_exact=False,
            confidences=None,
            attempts=attempts,
            elapsed_ms=(time.perf_counter() - t0) * 1000.0,
        )
    crc_computed = crc8(pack(result.sequence))
    crc_read = result.v_byte
    crc_exact = crc_read == crc_computed
    crc_ok = abs(crc_read - crc_computed) <= opts.v_tolerance
    return DecodeReport(
        found=True,
        corners=corners,
        rotation=rotation,
        mirrored=mirrored,
        symbols=str(result.sequence),
        payload=symbols_to_payload(result.sequence) if crc_ok else None,
        crc_read=crc_read,
        crc_computed=crc_computed,
        crc_ok=crc_ok,
        crc_exact=crc_exact,
        confidences=result.confidences,
        attempts=attempts,
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
    )


def _empty_report(attempts: int, t0: float) -> DecodeReport:
    return DecodeReport(
        found=False,
        corners=None,
        rotation=None,
        mirrored=None,
        symbols=None,
        payload=None,
        crc_read=None,
        crc_computed=None,
        crc_ok=False,
        crc_exact=False,
        confidences=None,
        attempts=attempts,
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
    )


def _ladder(opts: DecodeOptions) -> list[DecodeOptions]:
    variants = [opts, replace(opts, enable_prefilter=not opts.enable_prefilter)]
    if opts.sample_points != 20:
        variants.append(replace(opts, sample_points=20))
    if not opts.enable_color_correction:
        variants.append(replace(opts, enable_color_correction=True))
    seen: list[DecodeOptions] = []
    for v in variants:
        if v not in seen:
            seen.append(v)
    return seen


def _failure_rank(report: DecodeReport) -> tuple[int, float]:
    """Order failure reports: found beats not-found, small CRC gap beats large."""
    if not report.found:
        return (0, 0.0)
    if report.crc_read is None:
        return (1, 0.0)
    return (2, -abs(report.crc_read - report.crc_computed))


def decode(image: RasterImage, options: DecodeOptions | None = None) -> DecodeReport:
    """Decode one image; returns the first verified report.

    Raises NotFoundError, CrcFailureError or DecodeTimeoutError (each
    carrying the best attempt's report) when no attempt verifies.
    """
    opts = options or DecodeOptions()
    t0 = time.perf_counter()
    best_failure: DecodeReport | None = None
    attempts = 0

    for variant in _ladder(opts):
        if (time.perf_counter() - t0) * 1000.0 >= opts.timeout_ms:
            report = best_failure or _empty_report(attempts, t0)
            report = replace(report, attempts=attempts, elapsed_ms=(time.perf_counter() - t0) * 1000.0)
            raise DecodeTimeoutError(f"budget {opts.timeout_ms} ms exhausted", report)
        attempts += 1
        try:
            report = _attempt(image, variant, attempts, t0)
        except _SkipAttempt:
            continue
        except (CodeNotFoundError, AmbiguousCodeError, BadHintError):
            continue
        if report.crc_ok:
            return report
        if best_failure is None or _failure_rank(report) > _failure_rank(best_failure):
            best_failure = report

    elapsed = (time.perf_counter() - t0) * 1000.0
    if best_failure is None:
        raise NotFoundError(
            "no code region located", replace(_empty_report(attempts, t0), elapsed_ms=elapsed)
        )
    best_failure = replace(best_failure, attempts=attempts, elapsed_ms=elapsed)
    raise CrcFailureError(
        f"verification failed (read {best_failure.crc_read}, computed {best_failure.crc_computed})",
        best_failure,
    )


def decode_file(path, options: DecodeOptions | None = None) -> DecodeReport:
    """Load a PNG (or any readable raster) and decode it.

    I/O and format errors propagate as OSError; decode failures raise the
    same DecodeError subclasses as decode().
    """
    return decode(RasterImage.load(path), options)
