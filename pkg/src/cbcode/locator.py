"""Finding the code quadrilateral in an image.

Primary path: hue-mask the pure red/green/blue positioning blocks,
take connected components, and look for blob triples forming an isoceles
right triangle; verify color order and the gray interior, then build an
affine cell grid from the three centroids.  Sobel + Hough grid extraction
is available as an optional refinement/validation stage, and explicit
region hints bypass detection entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import ndimage

from .colorproc import snap_pixels
from .raster import RasterImage, sample_bilinear

__all__ = [
    "Blob",
    "CandidateTriple",
    "CornerVerdict",
    "CodeRegion",
    "GradientMap",
    "LineFamilies",
    "CodeNotFoundError",
    "AmbiguousCodeError",
    "NoGridError",
    "BadHintError",
    "segment_candidates",
    "sobel_edges",
    "hough_grid",
    "verify_corners",
    "find_code_region",
    "region_from_hint",
]


class CodeNotFoundError(Exception):
    """No candidate corner triple passed verification."""


class AmbiguousCodeError(Exception):
    """Multiple non-overlapping candidates passed and no hint was given."""


class NoGridError(Exception):
    """Hough accumulation found fewer than two lines in a family."""


class BadHintError(ValueError):
    """Region hint quad is degenerate or cannot be oriented."""


# Hue windows (degrees) for the positioning primaries; saturation gates
# separate the primaries from the gray data blocks.
_HUE_CENTERS = {"R": 0.0, "G": 120.0, "B": 240.0}
_HUE_WINDOW = 20.0
_SAT_MIN = 0.5
_VAL_MIN = 0.25
_GRAY_SAT_MAX = 0.25


def _rgb_to_hsv(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB -> (hue degrees, saturation, value), all float64."""
    rgb = arr.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)
    h = np.zeros_like(v)
    nz = c > 0
    rmax = nz & (v == r)
    gmax = nz & ~rmax & (v == g)
    bmax = nz & ~rmax & ~gmax
    h[rmax] = ((g - b)[rmax] / c[rmax]) % 6.0
    h[gmax] = (b - r)[gmax] / c[gmax] + 2.0
    h[bmax] = (r - g)[bmax] / c[bmax] + 4.0
    return h * 60.0, s, v


def _hue_distance(h: np.ndarray, center: float) -> np.ndarray:
    d = np.abs(h - center) % 360.0
    return np.minimum(d, 360.0 - d)


@dataclass(frozen=True)
class Blob:
    """Connected component of one primary-hue mask."""

    color: str
    centroid: tuple[float, float]  # (x, y), pixel-center coords
    area: int
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)


@dataclass(frozen=True)
class CandidateTriple:
    """Red/green/blue blob triple; green is the hypothesized right-angle corner."""

    red: Blob
    green: Blob
    blue: Blob

    def _d(self, a: Blob, b: Blob) -> float:
        return math.dist(a.centroid, b.centroid)

    @property
    def leg_rg(self) -> float:
        return self._d(self.red, self.green)

    @property
    def leg_gb(self) -> float:
        return self._d(self.green, self.blue)

    @property
    def hyp(self) -> float:
        return self._d(self.red, self.blue)

    @property
    def equidistance(self) -> float:
        m = max(self.leg_rg, self.leg_gb)
        return abs(self.leg_rg - self.leg_gb) / m if m > 0 else 1.0

    @property
    def diag_ratio(self) -> float:
        side = 0.5 * (self.leg_rg + self.leg_gb)
        return self.hyp / side if side > 0 else 0.0

    @property
    def angle_green_deg(self) -> float:
        gr = np.subtract(self.red.centroid, self.green.centroid)
        gb = np.subtract(self.blue.centroid, self.green.centroid)
        denom = np.linalg.norm(gr) * np.linalg.norm(gb)
        if denom == 0:
            return 0.0
        cosv = float(np.clip(np.dot(gr, gb) / denom, -1.0, 1.0))
        return math.degrees(math.acos(cosv))

    @property
    def quality(self) -> float:
        """Deviation score; lower is better."""
        areas = (self.red.area, self.green.area, self.blue.area)
        balance = 1.0 - min(areas) / max(areas)
        return self.equidistance + 2.0 * abs(self.diag_ratio - math.sqrt(2)) + 0.25 * balance


@dataclass(frozen=True)
class CornerVerdict:
    """Outcome of geometric + color-order verification of a triple."""

    passed: bool
    corner_classes: tuple[str, str, str, str]  # red, green, blue, inferred V
    equidistance: float
    diag_ratio: float
    angle_green_deg: float
    gray_fraction: float
    v_center: tuple[float, float]
    reason: str = ""


@dataclass(frozen=True)
class CodeRegion:
    """Located code: outer quad plus derived cell geometry.

    corners rows are ordered red-corner, V-corner, blue-corner,
    green-corner (top-left, top-right, bottom-right, bottom-left of the
    canonical grid).  Coordinates use the pixel-center convention.
    """

    corners: np.ndarray
    mirrored: bool
    rotation_quarter: int
    rotation_residual_deg: float
    source: str = "blobs"

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64).reshape(4, 2)
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)

    def grid_to_image(self, gx, gy) -> np.ndarray:
        """Map grid coords (0..4 across the code) to image positions.

        Bilinear in the quad corners; degenerates to the exact affine map
        when the quad is a parallelogram.
        """
        s = np.asarray(gx, dtype=np.float64) / 4.0
        t = np.asarray(gy, dtype=np.float64) / 4.0
        s, t = np.broadcast_arrays(s, t)
        c0, c1, c2, c3 = self.corners
        pts = (
            np.multiply.outer((1 - s) * (1 - t), c0)
            + np.multiply.outer(s * (1 - t), c1)
            + np.multiply.outer(s * t, c2)
            + np.multiply.outer((1 - s) * t, c3)
        )
        return pts

    def cell_center(self, cell: int) -> np.ndarray:
        row, col = divmod(cell - 1, 4)
        return self.grid_to_image(col + 0.5, row + 0.5)

    @property
    def cell_centers(self) -> np.ndarray:
        rows, cols = np.divmod(np.arange(16), 4)
        return self.grid_to_image(cols + 0.5, rows + 0.5)

    @property
    def block_px(self) -> float:
        c = self.corners
        sides = [np.linalg.norm(c[(i + 1) % 4] - c[i]) for i in range(4)]
        return float(np.mean(sides)) / 4.0

    def scaled(self, m: int) -> "CodeRegion":
        """Geometry after an integer nearest-neighbor upscale of the image."""
        return CodeRegion(
            corners=(self.corners + 0.5) * m - 0.5,
            mirrored=self.mirrored,
            rotation_quarter=self.rotation_quarter,
            rotation_residual_deg=self.rotation_residual_deg,
            source=self.source,
        )


def _label_blobs(mask: np.ndarray, color: str, min_area: int) -> list[Blob]:
    labels, n = ndimage.label(mask)
    if n == 0:
        return []
    blobs = []
    slices = ndimage.find_objects(labels)
    areas = ndimage.sum_labels(mask, labels, index=np.arange(1, n + 1))
    centers = ndimage.center_of_mass(mask, labels, index=np.arange(1, n + 1))
    for i in range(n):
        if areas[i] < min_area:
            continue
        sy, sx = slices[i]
        cy, cx = centers[i]
        blobs.append(
            Blob(
                color=color,
                centroid=(float(cx), float(cy)),
                area=int(areas[i]),
                bbox=(sx.start, sy.start, sx.stop, sy.stop),
            )
        )
    blobs.sort(key=lambda b: -b.area)
    return blobs[:8]  # cap combinatorics on busy scenes


def segment_candidates(image: RasterImage, morphology: bool = True) -> list[CandidateTriple]:
    """Hue-mask the primaries and emit right-isoceles blob triples.

    Candidates are screened loosely here (verification applies the strict
    bounds); the returned list is sorted best-first.  With morphology
    disabled the 3x3 open/close cleanup is skipped, which keeps blobs of
    codes only a few pixels wide alive.
    """
    h, s, v = _rgb_to_hsv(image.pixels)
    sat_ok = (s > _SAT_MIN) & (v > _VAL_MIN)
    blobs: dict[str, list[Blob]] = {}
    min_area = 4 if morphology else 1
    for color, center in _HUE_CENTERS.items():
        mask = sat_ok & (_hue_distance(h, center) <= _HUE_WINDOW)
        if morphology:
            # Pad so closing is not clipped at the image border, which
            # would shave border-touching blobs asymmetrically.
            structure = np.ones((3, 3), dtype=bool)
            padded = np.pad(mask, 2)
            padded = ndimage.binary_opening(padded, structure=structure)
            padded = ndimage.binary_closing(padded, structure=structure)
            mask = padded[2:-2, 2:-2]
        blobs[color] = _label_blobs(mask, color, min_area)

    out = []
    for r, g, b in product(blobs["R"], blobs["G"], blobs["B"]):
        cand = CandidateTriple(red=r, green=g, blue=b)
        if cand.leg_rg <= 0 or cand.leg_gb <= 0:
            continue
        if cand.equidistance > 0.18:
            continue
        if not 1.25 <= cand.diag_ratio <= 1.60:
            continue
        areas = (r.area, g.area, b.area)
        if max(areas) > 6 * min(areas):
            continue
        # Blob size must be commensurate with the implied block size.
        block = 0.5 * (cand.leg_rg + cand.leg_gb) / 3.0
        edge = math.sqrt(sum(areas) / 3.0)
        if not 0.25 <= edge / block <= 3.0:
            continue
        out.append(cand)
    out.sort(key=lambda c: c.quality)
    return out


@dataclass(frozen=True)
class GradientMap:
    """Per-pixel gradient magnitude and orientation."""

    magnitude: np.ndarray
    orientation: np.ndarray

    @property
    def width(self) -> int:
        return self.magnitude.shape[1]

    @property
    def height(self) -> int:
        return self.magnitude.shape[0]


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)


def sobel_edges(image: RasterImage) -> GradientMap:
    """3x3 Sobel on luma with clamped borders (flat images stay flat)."""
    luma = image.pixels.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
    gx = ndimage.convolve(luma, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(luma, _SOBEL_X.T, mode="nearest")
    return GradientMap(magnitude=np.hypot(gx, gy), orientation=np.arctan2(gy, gx))


@dataclass(frozen=True)
class LineFamilies:
    """Two roughly orthogonal groups of (theta_deg, rho) lines, rho-sorted."""

    a: tuple[tuple[float, float], ...]
    b: tuple[tuple[float, float], ...]


def hough_grid(edges: GradientMap, region_hint: tuple[int, int, int, int] | None = None) -> LineFamilies:
    """Extract the orthogonal grid-line families from an edge map.

    region_hint is an (x0, y0, x1, y1) bounding box limiting accumulation.
    Raises NoGridError when either family holds fewer than two lines.
    """
    mag = edges.magnitude
    if region_hint is not None:
        x0, y0, x1, y1 = region_hint
        if not (0 <= x0 < x1 <= edges.width and 0 <= y0 < y1 <= edges.height):
            raise ValueError("region_hint outside image")
        box = np.zeros_like(mag)
        box[y0:y1, x0:x1] = mag[y0:y1, x0:x1]
        mag = box
    peak = mag.max()
    if peak <= 0:
        raise NoGridError("no gradient energy")
    ys, xs = np.nonzero(mag > 0.3 * peak)
    weights = mag[ys, xs]

    thetas = np.deg2rad(np.arange(0.0, 180.0, 1.0))
    diag = int(math.ceil(math.hypot(edges.width, edges.height)))
    rho_off = diag
    acc = np.zeros((thetas.size, 2 * diag + 1))
    rho = np.rint(
        np.multiply.outer(np.cos(thetas), xs) + np.multiply.outer(np.sin(thetas), ys)
    ).astype(np.intp)
    for ti in range(thetas.size):
        acc[ti] = np.bincount(rho[ti] + rho_off, weights=weights, minlength=2 * diag + 1)

    # Greedy peak picking with neighborhood suppression.
    peaks: list[tuple[float, float, float]] = []
    acc_work = acc.copy()
    first = None
    for _ in range(24):
        ti, ri = np.unravel_index(np.argmax(acc_work), acc_work.shape)
        score = acc_work[ti, ri]
        if first is None:
            first = score
        if score <= 0 or score < 0.25 * first:
            break
        peaks.append((math.degrees(thetas[ti]), float(ri - rho_off), float(score)))
        t_lo = max(0, ti - 8)
        acc_work[t_lo : ti + 9, max(0, ri - 5) : ri + 6] = 0
        # Angle space wraps at 180 degrees with rho negated:
        # (theta, rho) and (theta - 180, -rho) are the same line.
        rm = 2 * rho_off - ri
        if ti < 8:
            acc_work[thetas.size - (8 - ti) :, max(0, rm - 5) : rm + 6] = 0
        if ti > thetas.size - 9:
            acc_work[: 9 - (thetas.size - ti), max(0, rm - 5) : rm + 6] = 0

    if not peaks:
        raise NoGridError("no Hough peaks")

    def ang_diff(a: float, b: float) -> float:
        d = abs(a - b) % 180.0
        return min(d, 180.0 - d)

    def canon(p: tuple[float, float, float], ref: float) -> tuple[float, float, float]:
        # Express the peak within +/-90 degrees of the family reference,
        # negating rho when crossing the 180-degree seam.
        th, rho, score = p
        dd = (th - ref + 90.0) % 180.0 - 90.0
        if abs((ref + dd) - th) > 1e-9:
            rho = -rho
        return (ref + dd, rho, score)

    ref = peaks[0][0]
    fam_a = [canon(p, ref) for p in peaks if ang_diff(p[0], ref) <= 20.0]
    fam_b = [canon(p, ref + 90.0) for p in peaks if ang_diff(p[0], ref + 90.0) <= 20.0]
    fam_a = sorted(sorted(fam_a, key=lambda p: -p[2])[:5], key=lambda p: p[1])
    fam_b = sorted(sorted(fam_b, key=lambda p: -p[2])[:5], key=lambda p: p[1])
    if len(fam_a) < 2 or len(fam_b) < 2:
        raise NoGridError(
            f"need 2 lines per family, got {len(fam_a)} and {len(fam_b)}"
        )
    return LineFamilies(
        a=tuple((p[0], p[1]) for p in fam_a),
        b=tuple((p[0], p[1]) for p in fam_b),
    )


def _classify_point(image: RasterImage, xy: tuple[float, float], radius: float = 1.0) -> str:
    """Hue class (R/G/B/gray/other) of a small neighborhood mean.

    ``radius`` is the probe offset in pixels; callers shrink it below 1
    when the cells under test are only a few pixels wide.
    """
    x, y = xy
    offs = radius * np.array(
        [[0, 0], [-1, 0], [1, 0], [0, -1], [0, 1]], dtype=np.float64
    )
    pts = np.array([x, y]) + offs
    mean = sample_bilinear(image.pixels, pts).mean(axis=0)
    h, s, v = _rgb_to_hsv(mean.reshape(1, 1, 3))
    h, s, v = float(h[0, 0]), float(s[0, 0]), float(v[0, 0])
    if s < _GRAY_SAT_MAX:
        return "gray"
    if s > _SAT_MIN and v > _VAL_MIN:
        for color, center in _HUE_CENTERS.items():
            if _hue_distance(np.array(h), center) <= _HUE_WINDOW:
                return color
    return "other"


def verify_corners(
    image: RasterImage,
    candidate: CandidateTriple,
    equidistance_max: float = 0.10,
    diag_range: tuple[float, float] = (1.35, 1.48),
    gray_fraction_min: float = 0.6,
) -> CornerVerdict:
    """Strict color-order and geometry verification of a candidate triple.

    Re-classifies the three corners from pixels, checks leg equality and
    the diagonal/side ratio, infers the fourth (V) corner by the
    parallelogram identity, and requires it gray; finally samples both
    interior diagonals and requires >= 60% of the samples to snap to one
    of the six preset grays.
    """
    block = (candidate.leg_rg + candidate.leg_gb) / 6.0
    radius = float(np.clip(block / 4.0, 0.25, 1.0))
    classes = tuple(
        _classify_point(image, blob.centroid, radius)
        for blob in (candidate.red, candidate.green, candidate.blue)
    )
    v_center = (
        candidate.red.centroid[0] + candidate.blue.centroid[0] - candidate.green.centroid[0],
        candidate.red.centroid[1] + candidate.blue.centroid[1] - candidate.green.centroid[1],
    )

    def verdict(passed: bool, gray_fraction: float, v_class: str, reason: str = "") -> CornerVerdict:
        return CornerVerdict(
            passed=passed,
            corner_classes=(*classes, v_class),
            equidistance=candidate.equidistance,
            diag_ratio=candidate.diag_ratio,
            angle_green_deg=candidate.angle_green_deg,
            gray_fraction=gray_fraction,
            v_center=v_center,
            reason=reason,
        )

    if classes != ("R", "G", "B"):
        return verdict(False, 0.0, "other", f"color order {classes}")
    if candidate.equidistance >= equidistance_max:
        return verdict(False, 0.0, "other", f"equidistance {candidate.equidistance:.3f}")
    if not diag_range[0] <= candidate.diag_ratio <= diag_range[1]:
        return verdict(False, 0.0, "other", f"diag ratio {candidate.diag_ratio:.3f}")
    if not (0 <= v_center[0] <= image.width - 1 and 0 <= v_center[1] <= image.height - 1):
        return verdict(False, 0.0, "other", "inferred V corner outside image")
    v_class = _classify_point(image, v_center, radius)
    if v_class != "gray":
        return verdict(False, 0.0, v_class, f"V corner classified {v_class}")

    # Both interior diagonals cross data blocks only; they must read gray.
    t = np.linspace(0.22, 0.78, 15)
    r = np.array(candidate.red.centroid)
    g = np.array(candidate.green.centroid)
    b = np.array(candidate.blue.centroid)
    v = np.array(v_center)
    pts = np.concatenate(
        [r[None, :] + t[:, None] * (b - r)[None, :], g[None, :] + t[:, None] * (v - g)[None, :]]
    )
    colors = np.clip(np.rint(sample_bilinear(image.pixels, pts)), 0, 255).astype(np.uint8)
    _, idx = snap_pixels(colors)
    gray_fraction = float(np.mean((idx >= 0) & (idx < 6)))
    if gray_fraction < gray_fraction_min:
        return verdict(False, gray_fraction, v_class, f"diagonal gray fraction {gray_fraction:.2f}")
    return verdict(True, gray_fraction, v_class)


def _region_from_triple(candidate: CandidateTriple) -> CodeRegion:
    r = np.array(candidate.red.centroid)
    g = np.array(candidate.green.centroid)
    b = np.array(candidate.blue.centroid)
    a_u = (b - g) / 3.0  # one cell step along grid +x
    a_v = (g - r) / 3.0  # one cell step along grid +y
    origin = r - 0.5 * a_u - 0.5 * a_v
    corners = np.stack(
        [origin, origin + 4 * a_u, origin + 4 * a_u + 4 * a_v, origin + 4 * a_v]
    )
    mirrored = bool(a_u[0] * a_v[1] - a_u[1] * a_v[0] < 0)
    angle = math.degrees(math.atan2(a_u[1], a_u[0]))
    quarter = int(round(angle / 90.0)) % 4
    residual = angle - round(angle / 90.0) * 90.0
    return CodeRegion(
        corners=corners,
        mirrored=mirrored,
        rotation_quarter=quarter,
        rotation_residual_deg=residual,
        source="blobs",
    )


def _regions_overlap(a: CodeRegion, b: CodeRegion) -> bool:
    ax0, ay0 = a.corners.min(axis=0)
    ax1, ay1 = a.corners.max(axis=0)
    bx0, by0 = b.corners.min(axis=0)
    bx1, by1 = b.corners.max(axis=0)
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def find_code_region(image: RasterImage, refine: bool = False) -> CodeRegion:
    """Locate the code: segmentation, verification, affine grid.

    With refine=True a Sobel + Hough pass validates the grid inside the
    found region when the code is large enough; a missing grid downgrades
    to the blob geometry rather than failing, since Hough is unusable on
    very small codes.
    """
    candidates = segment_candidates(image)
    if not candidates:
        candidates = segment_candidates(image, morphology=False)
    passing: list[tuple[CandidateTriple, CornerVerdict]] = []
    for cand in candidates:
        v = verify_corners(image, cand)
        if v.passed:
            passing.append((cand, v))
    if not passing:
        raise CodeNotFoundError("no candidate corner triple passed verification")

    regions = [_region_from_triple(c) for c, _ in passing]
    best = regions[0]
    for other in regions[1:]:
        if not _regions_overlap(best, other):
            raise AmbiguousCodeError(
                "multiple non-overlapping codes passed verification; pass a region hint"
            )

    if refine and best.block_px >= 8:
        x0, y0 = np.floor(best.corners.min(axis=0)).astype(int)
        x1, y1 = np.ceil(best.corners.max(axis=0)).astype(int) + 1
        box = (max(0, x0), max(0, y0), min(image.width, x1), min(image.height, y1))
        try:
            hough_grid(sobel_edges(image), region_hint=box)
        except NoGridError:
            pass
    return best


def region_from_hint(image: RasterImage, quad) -> CodeRegion:
    """Build cell geometry directly from a user-provided outer quad.

    Quad points are pixel-edge coordinates in any order; orientation is
    recovered by classifying the four corner cells (one R, one G, one B,
    one gray required).  Raises BadHintError for degenerate or
    unorientable quads.
    """
    pts = np.asarray(quad, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] != 4:
        raise BadHintError("hint must contain exactly 4 points")
    hull = pts - 0.5  # pixel-edge -> pixel-center coords
    centroid = hull.mean(axis=0)
    # Points are taken in the given perimeter order; the shoelace area and
    # consecutive-edge turn signs reject collinear, concave and
    # self-intersecting quads.
    x, y = hull[:, 0], hull[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    if area < 4.0:
        raise BadHintError(f"degenerate hint quad (area {area:.2f} px^2)")
    edges = np.roll(hull, -1, axis=0) - hull
    nxt = np.roll(edges, -1, axis=0)
    turns = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    if not (np.all(turns > 0) or np.all(turns < 0)):
        raise BadHintError("hint quad is self-intersecting or not convex")

    # Corner-cell centers sit a quarter of the way toward the centroid.
    cell_pts = hull + 0.25 * (centroid - hull)
    block = float(np.mean(np.linalg.norm(edges, axis=1))) / 4.0
    radius = float(np.clip(block / 4.0, 0.25, 1.0))
    classes = [_classify_point(image, (p[0], p[1]), radius) for p in cell_pts]
    for want in ("R", "G", "B", "gray"):
        if classes.count(want) != 1:
            raise BadHintError(f"cannot orient hint: corner classes {classes}")

    ri = classes.index("R")
    hull = np.roll(hull, -ri, axis=0)
    classes = classes[ri:] + classes[:ri]
    if classes[1] == "G":  # traverse the other way: red, gray, blue, green
        hull = hull[[0, 3, 2, 1]]
        classes = [classes[0], classes[3], classes[2], classes[1]]
    if classes != ["R", "gray", "B", "G"]:
        raise BadHintError(f"corner arrangement {classes} is not a code")

    a_u = (hull[1] - hull[0]) / 4.0
    a_v = (hull[3] - hull[0]) / 4.0
    mirrored = bool(a_u[0] * a_v[1] - a_u[1] * a_v[0] < 0)
    angle = math.degrees(math.atan2(a_u[1], a_u[0]))
    quarter = int(round(angle / 90.0)) % 4
    residual = angle - round(angle / 90.0) * 90.0
    return CodeRegion(
        corners=hull,
        mirrored=mirrored,
        rotation_quarter=quarter,
        rotation_residual_deg=residual,
        source="hint",
    )
