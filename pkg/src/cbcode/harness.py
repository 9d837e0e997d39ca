"""Degradation generators and experiment runners.

Everything here is deterministic given a seed; runners record the seed in
their CSV output so any published table can be regenerated bit-for-bit
(timing columns excepted — they measure the current machine).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .codec import DEFAULT_LAYOUT, capacity
from .colorproc import snap_pixels
from .pipeline import (
    CrcFailureError,
    DecodeOptions,
    DecodeTimeoutError,
    NotFoundError,
    decode,
    encode,
)
from .raster import RasterImage, RenderSpec
from .raster import embed as embed_image

__all__ = [
    "BadCellError",
    "DegradationSpec",
    "TrialRecord",
    "scale_image",
    "occlude",
    "rotate_image",
    "tilt_image",
    "add_noise",
    "random_payload",
    "random_interference_color",
    "run_scale_sweep",
    "run_sampling_sweep",
    "run_occlusion_mc",
    "write_csv",
    "SCALE_SWEEP_COLUMNS",
    "SAMPLING_SWEEP_COLUMNS",
    "OCCLUSION_MC_COLUMNS",
]

INTERFERENCE_COLOR = (0xFF, 0x88, 0x00)

_RESAMPLE = {
    "nearest": Image.NEAREST,
    "bilinear": Image.BILINEAR,
    "bicubic": Image.BICUBIC,
}


class BadCellError(ValueError):
    """Occlusion target cell is invalid or outside the image."""


def scale_image(image: RasterImage, factor: float, method: str = "bilinear") -> RasterImage:
    """Resample by a scale factor; output dims = max(1, floor(f*d + 0.5))."""
    if factor <= 0:
        raise ValueError("factor must be > 0")
    if method not in _RESAMPLE:
        raise ValueError(f"method must be one of {sorted(_RESAMPLE)}")
    w = max(1, math.floor(factor * image.width + 0.5))
    h = max(1, math.floor(factor * image.height + 0.5))
    if (w, h) == (image.width, image.height):
        return image
    out = image.to_pil().resize((w, h), resample=_RESAMPLE[method])
    return RasterImage.from_array(np.asarray(out))


def occlude(
    image: RasterImage,
    cell: int | None = None,
    rect: tuple[int, int, int, int] | None = None,
    coverage: float = 1.0,
    color: tuple[int, int, int] = INTERFERENCE_COLOR,
    render_spec: RenderSpec = RenderSpec(),
) -> RasterImage:
    """Paint an interference patch over a rendered code.

    Either an explicit rectangle (x0, y0, x1, y1) or a cell index 1..16;
    for a cell, a centered square of area = coverage * cell area is
    painted, using the geometry in render_spec.
    """
    if not 0.0 <= coverage <= 1.0:
        raise ValueError("coverage must be in [0, 1]")
    out = image.pixels.copy()
    if rect is not None:
        x0, y0, x1, y1 = rect
        out[max(0, y0) : y1, max(0, x0) : x1] = color
        return RasterImage(out)
    if cell is None:
        raise ValueError("need a cell index or a rectangle")
    if not 1 <= cell <= 16:
        raise BadCellError(f"cell {cell} out of range")
    b, off = render_spec.block_px, render_spec.border_px
    row, col = divmod(cell - 1, 4)
    if off + 4 * b > image.width or off + 4 * b > image.height:
        raise BadCellError("render geometry exceeds the image")
    if coverage == 0.0:
        return image
    side = b * math.sqrt(coverage)
    cx = off + (col + 0.5) * b
    cy = off + (row + 0.5) * b
    x0 = int(round(cx - side / 2.0))
    y0 = int(round(cy - side / 2.0))
    n = max(1, int(round(side)))
    out[y0 : y0 + n, x0 : x0 + n] = color
    return RasterImage(out)


def rotate_image(image: RasterImage, degrees: float) -> RasterImage:
    """Rotate counterclockwise; 90-degree multiples are exact permutations,
    anything else is bilinear with white fill and an expanded canvas."""
    d = degrees % 360.0
    if d == 0.0:
        return image
    if d % 90.0 == 0.0:
        return RasterImage(np.ascontiguousarray(np.rot90(image.pixels, k=int(d // 90))))
    out = image.to_pil().rotate(
        degrees, resample=Image.BILINEAR, expand=True, fillcolor=(255, 255, 255)
    )
    return RasterImage.from_array(np.asarray(out))


def _perspective_coeffs(src_quad, dst_quad) -> list[float]:
    # PIL wants coefficients mapping output points back to input points.
    a = []
    b = []
    for (x, y), (u, v) in zip(dst_quad, src_quad):
        a.append([x, y, 1, 0, 0, 0, -u * x, -u * y])
        a.append([0, 0, 0, x, y, 1, -v * x, -v * y])
        b.extend([u, v])
    return list(np.linalg.solve(np.array(a, dtype=np.float64), np.array(b, dtype=np.float64)))


def tilt_image(image: RasterImage, degrees: float, axis: str = "y") -> RasterImage:
    """Mild perspective: the image plane rotated by `degrees` about the
    vertical (axis='y') or horizontal (axis='x') center line."""
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    if degrees == 0.0:
        return image
    w, h = image.width, image.height
    f = 2.0 * max(w, h)  # focal length of the pinhole model
    s, c = math.sin(math.radians(degrees)), math.cos(math.radians(degrees))
    corners = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
    dst = []
    for x, y in corners:
        if axis == "y":
            denom = f + x * s
            dst.append((f * x * c / denom + w / 2, f * y / denom + h / 2))
        else:
            denom = f + y * s
            dst.append((f * x / denom + w / 2, f * y * c / denom + h / 2))
    src = [(0, 0), (w, 0), (w, h), (0, h)]
    coeffs = _perspective_coeffs(src, dst)
    out = image.to_pil().transform(
        (w, h), Image.PERSPECTIVE, coeffs, resample=Image.BILINEAR, fillcolor=(255, 255, 255)
    )
    return RasterImage.from_array(np.asarray(out))


def add_noise(
    image: RasterImage,
    kind: str,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    sigma: float = 8.0,
    density: float = 0.02,
    amplitude: float = 16.0,
    frequency: float = 0.05,
    angle_deg: float = 0.0,
) -> RasterImage:
    """Add gaussian, shot (salt and pepper) or periodic banding noise."""
    if rng is None:
        rng = np.random.default_rng(seed)
    px = image.pixels.astype(np.float64)
    h, w = px.shape[:2]
    if kind == "gaussian":
        px = px + rng.normal(0.0, sigma, px.shape)
    elif kind == "shot":
        mask = rng.random((h, w)) < density
        values = rng.integers(0, 2, (h, w)) * 255
        px[mask] = values[mask, None]
    elif kind == "periodic":
        yy, xx = np.mgrid[0:h, 0:w]
        theta = math.radians(angle_deg)
        phase = 2.0 * math.pi * frequency * (xx * math.cos(theta) + yy * math.sin(theta))
        px = px + amplitude * np.sin(phase)[:, :, None]
    else:
        raise ValueError("kind must be gaussian, shot or periodic")
    return RasterImage(np.clip(np.rint(px), 0, 255).astype(np.uint8))


@dataclass(frozen=True)
class DegradationSpec:
    """One degradation step: kind plus its parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("scale", "occlude", "rotate", "noise", "embed"):
            raise ValueError(f"unknown degradation kind {self.kind!r}")
        if self.kind == "scale" and self.params.get("factor", 1.0) <= 0:
            raise ValueError("scale factor must be > 0")
        if self.kind == "occlude" and not 0.0 <= self.params.get("coverage", 1.0) <= 1.0:
            raise ValueError("coverage must be in [0, 1]")

    def apply(self, image: RasterImage, rng: np.random.Generator | None = None) -> RasterImage:
        p = self.params
        if self.kind == "scale":
            return scale_image(image, p["factor"], p.get("method", "bilinear"))
        if self.kind == "occlude":
            return occlude(
                image,
                cell=p.get("cell"),
                rect=p.get("rect"),
                coverage=p.get("coverage", 1.0),
                color=p.get("color", INTERFERENCE_COLOR),
                render_spec=p.get("render_spec", RenderSpec()),
            )
        if self.kind == "rotate":
            return rotate_image(image, p["degrees"])
        if self.kind == "noise":
            return add_noise(image, p["noise_kind"], rng=rng, **{
                k: v for k, v in p.items() if k not in ("noise_kind",)
            })
        return embed_image(p["host"], image, p["x"], p["y"])


@dataclass(frozen=True)
class TrialRecord:
    """One decode trial against a known ground truth."""

    spec: DegradationSpec | None
    truth: int
    decoded: int | None
    error: str  # "", "NotFound", "CrcFailure", "Timeout"
    crc_ok: bool
    elapsed_ms: float

    @property
    def success(self) -> bool:
        return self.crc_ok and self.decoded == self.truth


def random_payload(rng: np.random.Generator) -> int:
    return int(rng.integers(0, capacity()))


def random_interference_color(rng: np.random.Generator) -> tuple[int, int, int]:
    """A color outside every snap band (never mistakable for the palette)."""
    while True:
        c = tuple(int(v) for v in rng.integers(0, 256, 3))
        _, idx = snap_pixels(np.array([c], dtype=np.uint8))
        if idx[0] == -1:
            return c


def _run_trial(image: RasterImage, truth: int, options: DecodeOptions, spec: DegradationSpec | None) -> TrialRecord:
    t0 = time.perf_counter()
    try:
        report = decode(image, options)
        decoded, crc_ok, error = report.payload, report.crc_ok, ""
    except NotFoundError:
        decoded, crc_ok, error = None, False, "NotFound"
    except DecodeTimeoutError:
        decoded, crc_ok, error = None, False, "Timeout"
    except CrcFailureError:
        decoded, crc_ok, error = None, False, "CrcFailure"
    return TrialRecord(
        spec=spec,
        truth=truth,
        decoded=decoded,
        error=error,
        crc_ok=crc_ok,
        elapsed_ms=(time.perf_counter() - t0) * 1000.0,
    )


SCALE_SWEEP_COLUMNS = ("factor", "method", "trials", "successes", "success_rate", "mean_ms")
SAMPLING_SWEEP_COLUMNS = (
    "factor",
    "sample_points",
    "trials",
    "successes",
    "success_rate",
    "mean_ms",
)
OCCLUSION_MC_COLUMNS = (
    "rounds",
    "coverage_max",
    "successes",
    "success_rate",
    "crc_failures",
    "not_found",
    "timeouts",
    "wrong_payload",
)


def run_scale_sweep(
    factors,
    trials: int,
    options: DecodeOptions | None = None,
    method: str = "bilinear",
    seed: int = 0,
    block_px: int = 65,
) -> list[dict]:
    """Render random payloads, scale, decode; one row per factor."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    options = options or DecodeOptions()
    rng = np.random.default_rng(seed)
    rows = []
    for factor in factors:
        records = []
        for _ in range(trials):
            truth = random_payload(rng)
            img = scale_image(encode(truth, RenderSpec(block_px=block_px)), factor, method)
            spec = DegradationSpec("scale", {"factor": factor, "method": method})
            records.append(_run_trial(img, truth, options, spec))
        successes = sum(r.success for r in records)
        rows.append(
            {
                "factor": factor,
                "method": method,
                "trials": trials,
                "successes": successes,
                "success_rate": successes / trials,
                "mean_ms": sum(r.elapsed_ms for r in records) / trials,
            }
        )
    return rows


def run_sampling_sweep(
    factors,
    sample_counts=(5, 10, 20),
    trials: int = 20,
    options: DecodeOptions | None = None,
    method: str = "bilinear",
    seed: int = 0,
) -> list[dict]:
    """Cross product of scale factor x sampling density; one row each."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = options or DecodeOptions()
    rng = np.random.default_rng(seed)
    rows = []
    for factor in factors:
        for n in sample_counts:
            opts = replace(base, sample_points=n)
            records = []
            for _ in range(trials):
                truth = random_payload(rng)
                img = scale_image(encode(truth), factor, method)
                records.append(_run_trial(img, truth, opts, None))
            successes = sum(r.success for r in records)
            rows.append(
                {
                    "factor": factor,
                    "sample_points": n,
                    "trials": trials,
                    "successes": successes,
                    "success_rate": successes / trials,
                    "mean_ms": sum(r.elapsed_ms for r in records) / trials,
                }
            )
    return rows


def run_occlusion_mc(
    rounds: int,
    coverage_max: float = 0.5,
    options: DecodeOptions | None = None,
    seed: int = 0,
    block_px: int = 65,
) -> dict:
    """Monte Carlo occlusion: random data cell, coverage and color per round."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    options = options or DecodeOptions()
    rng = np.random.default_rng(seed)
    spec_render = RenderSpec(block_px=block_px)
    records = []
    for _ in range(rounds):
        truth = random_payload(rng)
        cell = int(rng.choice(DEFAULT_LAYOUT.data_order))
        coverage = float(rng.uniform(0.0, coverage_max)) if coverage_max > 0 else 0.0
        color = random_interference_color(rng)
        img = occlude(
            encode(truth, spec_render),
            cell=cell,
            coverage=coverage,
            color=color,
            render_spec=spec_render,
        )
        spec = DegradationSpec(
            "occlude", {"cell": cell, "coverage": coverage, "color": color}
        )
        records.append(_run_trial(img, truth, options, spec))
    successes = sum(r.success for r in records)
    wrong = sum(1 for r in records if r.crc_ok and r.decoded != r.truth)
    return {
        "rounds": rounds,
        "coverage_max": coverage_max,
        "successes": successes,
        "success_rate": successes / rounds,
        "crc_failures": sum(1 for r in records if r.error == "CrcFailure"),
        "not_found": sum(1 for r in records if r.error == "NotFound"),
        "timeouts": sum(1 for r in records if r.error == "Timeout"),
        "wrong_payload": wrong,
    }


def write_csv(path, rows: list[dict], columns, seed: int) -> None:
    """Write runner rows with the seed recorded as a leading comment."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# seed={seed}\n")
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
