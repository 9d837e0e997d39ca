"""Rendering code matrices to pixel images and embedding them in hosts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .codec import CodeMatrix

__all__ = [
    "RasterImage",
    "RenderSpec",
    "OutOfBoundsError",
    "render",
    "embed",
    "sample_bilinear",
    "read_cell_colors",
]


class OutOfBoundsError(ValueError):
    """Placement rectangle does not fit inside the host image."""


@dataclass(frozen=True)
class RasterImage:
    """Immutable 8-bit RGB image backed by an (h, w, 3) numpy array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError("pixels must be an (h, w, 3) uint8 array")
        px.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RasterImage":
        return cls(np.ascontiguousarray(arr, dtype=np.uint8).copy())

    @classmethod
    def load(cls, path) -> "RasterImage":
        with Image.open(path) as im:
            return cls.from_array(np.asarray(im.convert("RGB")))

    def save(self, path) -> None:
        self.to_pil().save(path)

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels, mode="RGB")


@dataclass(frozen=True)
class RenderSpec:
    """Geometry of a rendered code: square blocks plus an optional border."""

    block_px: int = 65
    border_px: int = 0
    border_color: tuple[int, int, int] = (0xFF, 0xFF, 0xFF)

    def __post_init__(self):
        if self.block_px < 1:
            raise ValueError("block_px must be >= 1")
        if self.border_px < 0:
            raise ValueError("border_px must be >= 0")

    @property
    def side(self) -> int:
        return 4 * self.block_px + 2 * self.border_px


def render(matrix: CodeMatrix, spec: RenderSpec = RenderSpec()) -> RasterImage:
    """Paint the sixteen blocks (and border, if any) at exact pixel edges."""
    side = spec.side
    out = np.empty((side, side, 3), dtype=np.uint8)
    out[:, :] = spec.border_color
    b, off = spec.block_px, spec.border_px
    for cell in range(1, 17):
        row, col = divmod(cell - 1, 4)
        y0, x0 = off + row * b, off + col * b
        out[y0 : y0 + b, x0 : x0 + b] = matrix.cell_color(cell)
    return RasterImage(out)


def embed(host: RasterImage, code: RasterImage, x: int, y: int) -> RasterImage:
    """Paste a rendered code into a host image at top-left (x, y)."""
    if x < 0 or y < 0 or x + code.width > host.width or y + code.height > host.height:
        raise OutOfBoundsError(
            f"code {code.width}x{code.height} at ({x}, {y}) exceeds "
            f"host {host.width}x{host.height}"
        )
    out = host.pixels.copy()
    out[y : y + code.height, x : x + code.width] = code.pixels
    return RasterImage(out)


def sample_bilinear(pixels: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Bilinear RGB lookup at sub-pixel (x, y) positions.

    Coordinates use the pixel-center convention (pixel (i, j) sits at
    x = j, y = i); positions are clamped to the image rectangle.  Returns
    an (N, 3) float64 array.
    """
    h, w = pixels.shape[:2]
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    x = np.clip(pts[:, 0], 0.0, w - 1.0)
    y = np.clip(pts[:, 1], 0.0, h - 1.0)
    x0 = np.clip(np.floor(x).astype(np.intp), 0, w - 2 if w > 1 else 0)
    y0 = np.clip(np.floor(y).astype(np.intp), 0, h - 2 if h > 1 else 0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    p = pixels.astype(np.float64)
    top = p[y0, x0] * (1 - fx) + p[y0, x1] * fx
    bot = p[y1, x0] * (1 - fx) + p[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def read_cell_colors(image: RasterImage, spec: RenderSpec) -> list[tuple[int, int, int]]:
    """Center-pixel color of each cell of a code rendered with spec.

    Debug/inspection helper for images produced by render(); makes no
    attempt to locate a code.
    """
    b, off = spec.block_px, spec.border_px
    colors = []
    for cell in range(1, 17):
        row, col = divmod(cell - 1, 4)
        y = off + row * b + b // 2
        x = off + col * b + b // 2
        colors.append(tuple(int(v) for v in image.pixels[y, x]))
    return colors
