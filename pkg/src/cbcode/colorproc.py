"""Color arithmetic: sRGB transfer, XYZ conversion, chromatic adaptation,
snapping to the standard palette, and smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .raster import RasterImage

__all__ = [
    "XYZColor",
    "AdaptationMatrix",
    "D65_WHITE",
    "ILLUMINANT_A",
    "STANDARD_GRAYS",
    "STANDARD_COLORS",
    "srgb_linearize",
    "srgb_delinearize",
    "rgb_to_xyz",
    "xyz_to_rgb",
    "bradford_matrix",
    "estimate_white",
    "correct_image",
    "gaussian_prefilter",
    "snap_to_standard",
    "snap_pixels",
]

STANDARD_GRAYS = (0x00, 0x33, 0x66, 0x99, 0xCC, 0xFF)

# Six grays followed by the three positioning primaries.
STANDARD_COLORS = tuple((g, g, g) for g in STANDARD_GRAYS) + (
    (0xFF, 0x00, 0x00),
    (0x00, 0xFF, 0x00),
    (0x00, 0x00, 0xFF),
)

# sRGB D65 reference primaries (Lindbloom).
RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

XYZ_TO_RGB = np.array(
    [
        [3.2404542, -1.5371385, -0.4985314],
        [-0.9692660, 1.8760108, 0.0415560],
        [0.0556434, -0.2040259, 1.0572252],
    ]
)

# Bradford cone response matrix.
BRADFORD = np.array(
    [
        [0.8951, 0.2664, -0.1614],
        [-0.7502, 1.7135, 0.0367],
        [0.0389, -0.0685, 1.0296],
    ]
)

BRADFORD_INV = np.linalg.inv(BRADFORD)


@dataclass(frozen=True)
class XYZColor:
    """CIE XYZ tristimulus triple."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def normalize_y(self) -> "XYZColor":
        """Scale so that Y == 1 (luminance-normalized white)."""
        if self.y <= 0:
            raise ValueError("cannot normalize: Y <= 0")
        return XYZColor(self.x / self.y, 1.0, self.z / self.y)


D65_WHITE = XYZColor(0.95047, 1.0, 1.08883)
ILLUMINANT_A = XYZColor(1.09850, 1.0, 0.35585)


def srgb_linearize(c):
    """Piecewise sRGB transfer, normalized value [0, 1] -> linear [0, 1]."""
    c = np.asarray(c, dtype=np.float64)
    out = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    return float(out) if out.ndim == 0 else out


def srgb_delinearize(v):
    """Inverse sRGB transfer, linear [0, 1] -> normalized [0, 1]."""
    v = np.asarray(v, dtype=np.float64)
    out = np.where(v <= 0.0031308, v * 12.92, 1.055 * np.clip(v, 0, None) ** (1 / 2.4) - 0.055)
    return float(out) if out.ndim == 0 else out


def rgb_to_xyz(rgb_linear) -> np.ndarray:
    """Linear RGB -> XYZ.  Accepts a triple or an (..., 3) array."""
    arr = np.asarray(rgb_linear, dtype=np.float64)
    return arr @ RGB_TO_XYZ.T


def xyz_to_rgb(xyz) -> np.ndarray:
    """XYZ -> linear RGB (unclipped)."""
    arr = np.asarray(xyz, dtype=np.float64)
    return arr @ XYZ_TO_RGB.T


@dataclass(frozen=True)
class AdaptationMatrix:
    """3x3 chromatic adaptation transform between two reference whites."""

    m: np.ndarray
    source: XYZColor
    dest: XYZColor

    def apply(self, xyz) -> np.ndarray:
        arr = np.asarray(xyz, dtype=np.float64)
        return arr @ self.m.T


def bradford_matrix(source: XYZColor, dest: XYZColor) -> AdaptationMatrix:
    """Bradford adaptation: M = B^-1 diag(cone_dest / cone_source) B.

    Maps the source white exactly onto the destination white; identical
    whites give the identity matrix.
    """
    cone_src = BRADFORD @ source.as_array()
    cone_dst = BRADFORD @ dest.as_array()
    if np.any(np.abs(cone_src) < 1e-12):
        raise ValueError("degenerate source white: zero cone response")
    m = BRADFORD_INV @ np.diag(cone_dst / cone_src) @ BRADFORD
    return AdaptationMatrix(m=m, source=source, dest=dest)


def estimate_white(image: RasterImage) -> XYZColor:
    """Estimate the scene white from bright, near-neutral pixels.

    Takes pixels whose min channel is high and whose channel spread is
    moderate, averages them in linear RGB, and converts to XYZ.  Raises
    ValueError when the image holds nothing usable as a white reference.
    """
    px = image.pixels.reshape(-1, 3).astype(np.float64)
    lo = px.min(axis=1)
    spread = px.max(axis=1) - lo
    mask = (lo >= 0xB0) & (spread <= 0x60)
    if not mask.any():
        raise ValueError("no near-white pixels to estimate illuminant from")
    mean_linear = srgb_linearize(px[mask] / 255.0).mean(axis=0)
    x, y, z = rgb_to_xyz(mean_linear)
    if y <= 0:
        raise ValueError("estimated white has non-positive luminance")
    return XYZColor(x, y, z).normalize_y()


def correct_image(image: RasterImage, estimated_white: XYZColor) -> RasterImage:
    """Adapt an image shot under estimated_white back to the D65 palette.

    The white is luminance-normalized first so the correction changes
    chromaticity, not exposure; the combined transform runs in linear RGB.
    """
    white = estimated_white.normalize_y()
    adapt = bradford_matrix(white, D65_WHITE)
    combined = XYZ_TO_RGB @ adapt.m @ RGB_TO_XYZ
    linear = srgb_linearize(image.pixels.astype(np.float64) / 255.0)
    corrected = linear @ combined.T
    out = srgb_delinearize(np.clip(corrected, 0.0, 1.0))
    return RasterImage(np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8))


def gaussian_prefilter(image: RasterImage, sigma: float = 1.0) -> RasterImage:
    """Gaussian smoothing per channel; denoises before sampling."""
    if sigma <= 0:
        return image
    out = np.empty_like(image.pixels)
    for ch in range(3):
        out[:, :, ch] = ndimage.gaussian_filter(
            image.pixels[:, :, ch].astype(np.float64), sigma=sigma, mode="nearest"
        ).round()
    return RasterImage(out)


_STANDARDS = np.array(STANDARD_COLORS, dtype=np.int64)
_N_GRAYS = len(STANDARD_GRAYS)
_GRAY_SPREAD_LIMIT = 0x20


def snap_pixels(pixels: np.ndarray, tolerance: int = 0x19) -> tuple[np.ndarray, np.ndarray]:
    """Snap an (N, 3) uint8 array to the standard palette.

    Returns (snapped colors, palette index per pixel; -1 where no standard
    color qualifies).  A standard qualifies when every channel sits
    strictly within tolerance of it; gray candidates additionally require
    the pixel's own channel spread to stay under 0x20 so tinted pixels do
    not masquerade as grays.  Ties go to the nearest standard.
    """
    px = np.asarray(pixels, dtype=np.int64).reshape(-1, 3)
    diff = px[:, None, :] - _STANDARDS[None, :, :]
    within = (np.abs(diff) < tolerance).all(axis=2)
    spread = px.max(axis=1) - px.min(axis=1)
    within[:, :_N_GRAYS] &= (spread < _GRAY_SPREAD_LIMIT)[:, None]
    dist = (diff * diff).sum(axis=2).astype(np.float64)
    dist[~within] = np.inf
    idx = np.argmin(dist, axis=1)
    idx[~within.any(axis=1)] = -1
    snapped = px.copy()
    hit = idx >= 0
    snapped[hit] = _STANDARDS[idx[hit]]
    return snapped.astype(np.uint8), idx


def snap_to_standard(pixel: tuple[int, int, int], tolerance: int = 0x19) -> tuple[int, int, int]:
    """Snap one RGB triple to the nearest qualifying standard color.

    Returns the pixel unchanged when nothing qualifies; idempotent, since
    standard colors snap to themselves.
    """
    snapped, _ = snap_pixels(np.array([pixel], dtype=np.uint8), tolerance)
    return tuple(int(v) for v in snapped[0])
