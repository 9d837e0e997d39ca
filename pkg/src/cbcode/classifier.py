"""Per-cell color classification.

Data cells are sampled with fixed sub-cell patterns, pooled, and
clustered by Lloyd iterations seeded at the six preset grays; each cell
takes its majority cluster.  A connected-domain analysis of the cell
(largest hole-filled region matching the assigned preset) feeds the
confidence score; cells whose confidence stays below threshold fall back
to the strongest preset domain, which recovers partially occluded blocks
whose sample points were all covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .codec import ALPHABET, CodeLayout, DEFAULT_LAYOUT, SymbolSequence
from .colorproc import STANDARD_GRAYS, snap_pixels
from .locator import CodeRegion
from .raster import RasterImage, sample_bilinear

__all__ = [
    "SamplePattern",
    "CellSample",
    "ClusterModel",
    "DomainFeatures",
    "ConfidenceParams",
    "ClassificationResult",
    "LowConfidenceError",
    "VChannelMismatchError",
    "GRAY_PRESETS",
    "PATTERNS",
    "pattern_for",
    "sample_cell",
    "kmeans_preset",
    "confidence",
    "cell_domain_features",
    "classify_cells",
]

GRAY_PRESETS = np.array([(g, g, g) for g in STANDARD_GRAYS], dtype=np.float64)

_V_CHANNEL_SPREAD_MAX = 0x10


class LowConfidenceError(Exception):
    """Cells with no usable evidence remained below the confidence threshold."""

    def __init__(self, cells: tuple[int, ...], confidences: tuple[float, ...]):
        self.cells = cells
        self.confidences = confidences
        super().__init__(f"no classification evidence for cells {cells}")


class VChannelMismatchError(Exception):
    """Verification block channels disagree beyond the gray tolerance."""

    def __init__(self, means: tuple[float, float, float]):
        self.means = means
        spread = max(means) - min(means)
        super().__init__(
            f"V block is not gray: channel means {means}, spread {spread:.1f}"
        )


@dataclass(frozen=True)
class SamplePattern:
    """Fixed sub-cell offsets, all within the central half of a cell."""

    n_points: int
    offsets: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.offsets) != self.n_points:
            raise ValueError("offset count must equal n_points")
        for dx, dy in self.offsets:
            if abs(dx) > 0.25 or abs(dy) > 0.25:
                raise ValueError("offsets must stay within the central half")


_QUINCUNX = ((0.0, 0.0), (-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25))
# The quincunx rotated 45 degrees: center plus the four axial midpoints.
_AXIAL = ((0.0, 0.0), (0.0, -0.25), (0.25, 0.0), (0.0, 0.25), (-0.25, 0.0))
_GRID_4X5 = tuple(
    (dx, dy)
    for dy in np.linspace(-0.25, 0.25, 4)
    for dx in np.linspace(-0.25, 0.25, 5)
)

PATTERNS: dict[int, SamplePattern] = {
    5: SamplePattern(5, _QUINCUNX),
    10: SamplePattern(10, _QUINCUNX + _AXIAL),
    20: SamplePattern(20, _GRID_4X5),
}


def pattern_for(n_points: int) -> SamplePattern:
    try:
        return PATTERNS[n_points]
    except KeyError:
        raise ValueError(f"sample count must be one of {sorted(PATTERNS)}, got {n_points}") from None


@dataclass(frozen=True)
class CellSample:
    """Sampled colors of one cell, with clamp flags and snap outcomes."""

    cell_index: int
    points: tuple[tuple[tuple[float, float], tuple[int, int, int]], ...]
    clamped: tuple[bool, ...]
    palette_idx: tuple[int, ...]  # index into the standard palette; -1 = unsnapped

    @property
    def colors(self) -> np.ndarray:
        return np.array([rgb for _, rgb in self.points], dtype=np.float64)


def sample_cell(
    image: RasterImage,
    region: CodeRegion,
    cell_index: int,
    pattern: SamplePattern,
    snap: bool = True,
) -> CellSample:
    """Read one cell through the region geometry.

    Pattern offsets are mapped through the cell's quad, read with bilinear
    interpolation, and (for data cells) snapped to the standard palette.
    Points that fall outside the image are clamped and flagged.
    """
    if not 1 <= cell_index <= 16:
        raise ValueError(f"cell index {cell_index} out of range")
    row, col = divmod(cell_index - 1, 4)
    offs = np.array(pattern.offsets, dtype=np.float64)
    pts = region.grid_to_image(col + 0.5 + offs[:, 0], row + 0.5 + offs[:, 1])
    clamped = (
        (pts[:, 0] < 0)
        | (pts[:, 0] > image.width - 1)
        | (pts[:, 1] < 0)
        | (pts[:, 1] > image.height - 1)
    )
    colors = np.clip(np.rint(sample_bilinear(image.pixels, pts)), 0, 255).astype(np.uint8)
    snapped, idx = snap_pixels(colors)
    kept = snapped if snap else colors
    return CellSample(
        cell_index=cell_index,
        points=tuple(
            ((float(p[0]), float(p[1])), tuple(int(c) for c in rgb))
            for p, rgb in zip(pts, kept)
        ),
        clamped=tuple(bool(c) for c in clamped),
        palette_idx=tuple(int(i) for i in idx),
    )


@dataclass(frozen=True)
class ClusterModel:
    """Result of Lloyd clustering: centroids, assignments, energy trace."""

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    energy_history: tuple[float, ...]
    iterations: int
    converged: bool

    def assign(self, samples: np.ndarray) -> np.ndarray:
        """Nearest-centroid labels for new samples."""
        d2 = ((np.asarray(samples, dtype=np.float64)[:, None, :] - self.centroids[None]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)


def kmeans_preset(
    samples,
    presets=None,
    max_iter: int = 100,
    tol: float = 1e-3,
) -> ClusterModel:
    """Lloyd k-means seeded at the preset colors.

    Centroids update to the arithmetic mean of their members; clusters
    that lose all members keep their current centroid.  Iteration stops
    when the largest centroid shift drops below tol.  The squared-error
    energy is recorded after every assignment step.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] == 0:
        raise ValueError("samples must be non-empty")
    centroids = np.array(GRAY_PRESETS if presets is None else presets, dtype=np.float64)
    if np.unique(centroids, axis=0).shape[0] != centroids.shape[0]:
        raise ValueError("presets must be distinct")
    k = centroids.shape[0]

    energy: list[float] = []
    assignments = np.zeros(x.shape[0], dtype=np.intp)
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        d2 = ((x[:, None, :] - centroids[None]) ** 2).sum(axis=2)
        assignments = np.argmin(d2, axis=1)
        energy.append(float(d2[np.arange(x.shape[0]), assignments].sum()))
        new_centroids = centroids.copy()
        for i in range(k):
            members = x[assignments == i]
            if members.shape[0]:
                new_centroids[i] = members.mean(axis=0)
        shift = float(np.linalg.norm(new_centroids - centroids, axis=1).max())
        centroids = new_centroids
        if shift < tol:
            converged = True
            break
    # Keep assignments consistent with the final centroids.
    d2 = ((x[:, None, :] - centroids[None]) ** 2).sum(axis=2)
    assignments = np.argmin(d2, axis=1)
    final_e = float(d2[np.arange(x.shape[0]), assignments].sum())
    if not energy or final_e != energy[-1]:
        energy.append(final_e)
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=assignments,
        energy_history=tuple(energy),
        iterations=iterations,
        converged=converged,
    )


@dataclass(frozen=True)
class DomainFeatures:
    """Connected-domain descriptors of a classified block."""

    area: float  # px^2
    area_ratio: float  # domain area / block area
    length: float  # px, longer bbox edge
    width: float  # px, shorter bbox edge
    length_width_ratio: float
    center: tuple[float, float]  # image coords


@dataclass(frozen=True)
class ConfidenceParams:
    """Knobs of the confidence score.

    h_w is the longest edge of the collected block in pixels; when None it
    is taken from the region under evaluation.  n counts pixels discarded
    after matching failure (>= 1).
    """

    delta: float = 1.0
    h_w: float | None = None
    n: int = 1
    threshold: float = 0.5

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.h_w is not None and self.h_w <= 0:
            raise ValueError("h_w must be > 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")


def confidence(target: DomainFeatures, observed: DomainFeatures, params: ConfidenceParams) -> float:
    """Similarity of an observed block domain to its target, in (0, 1].

    s = exp(-(|A_t - dA_d| + |AR_t - dAR_d| + |LWR_t - dLWR_d|
              + |L_t - dL_d| + |W_t - dW_d| + ||C_t - C_d|| / (2 h_w n)))

    Areas and edge lengths are normalized by the block edge h_w first so
    every term is unitless and comparably scaled.
    """
    hw = params.h_w if params.h_w is not None else max(target.length, target.width)
    if hw <= 0:
        raise ValueError("h_w must be positive")
    d = params.delta
    hw2 = hw * hw
    terms = (
        abs(target.area / hw2 - d * observed.area / hw2)
        + abs(target.area_ratio - d * observed.area_ratio)
        + abs(target.length_width_ratio - d * observed.length_width_ratio)
        + abs(target.length / hw - d * observed.length / hw)
        + abs(target.width / hw - d * observed.width / hw)
        + math.dist(target.center, observed.center) / (2.0 * hw * params.n)
    )
    return math.exp(-terms)


def _target_features(region: CodeRegion, cell_index: int) -> DomainFeatures:
    hw = region.block_px
    cx, cy = region.cell_center(cell_index)
    return DomainFeatures(
        area=hw * hw,
        area_ratio=1.0,
        length=hw,
        width=hw,
        length_width_ratio=1.0,
        center=(float(cx), float(cy)),
    )


def _cell_patch(image: RasterImage, region: CodeRegion, cell_index: int) -> tuple[np.ndarray, int]:
    """Resample one cell onto an axis-aligned S x S patch of palette indices."""
    s = int(np.clip(round(region.block_px), 8, 48))
    row, col = divmod(cell_index - 1, 4)
    frac = (np.arange(s) + 0.5) / s
    gx, gy = np.meshgrid(col + frac, row + frac)
    pts = region.grid_to_image(gx.ravel(), gy.ravel())
    colors = np.clip(np.rint(sample_bilinear(image.pixels, pts)), 0, 255).astype(np.uint8)
    _, idx = snap_pixels(colors)
    return idx, s


def cell_domain_features(
    image: RasterImage,
    region: CodeRegion,
    cell_index: int,
    preset_idx: int,
    patch: tuple[np.ndarray, int] | None = None,
) -> DomainFeatures | None:
    """Largest connected domain of one preset gray within a cell.

    The cell is rectified onto a square patch, pixels matching the preset
    are masked, interior holes are filled (an occluder sitting on a block
    leaves a ring whose filled extent restores the block outline), and the
    largest connected component is measured.  Returns None when nothing
    in the cell matches the preset.
    """
    idx, s = patch if patch is not None else _cell_patch(image, region, cell_index)
    mask = (idx == preset_idx).reshape(s, s)
    if not mask.any():
        return None
    filled = ndimage.binary_fill_holes(mask)
    labels, n = ndimage.label(filled)
    if n == 0:
        return None
    areas = ndimage.sum_labels(filled, labels, index=np.arange(1, n + 1))
    best = int(np.argmax(areas)) + 1
    comp = labels == best
    count = float(areas[best - 1])
    ys, xs = np.nonzero(comp)
    ext_y = float(ys.max() - ys.min() + 1)
    ext_x = float(xs.max() - xs.min() + 1)
    scale = region.block_px / s
    length = max(ext_x, ext_y) * scale
    width = min(ext_x, ext_y) * scale
    cy, cx = ndimage.center_of_mass(comp)
    row, col = divmod(cell_index - 1, 4)
    center = region.grid_to_image(col + (cx + 0.5) / s, row + (cy + 0.5) / s)
    return DomainFeatures(
        area=count * scale * scale,
        area_ratio=count / (s * s),
        length=length,
        width=width,
        length_width_ratio=length / width if width > 0 else float("inf"),
        center=(float(center[0]), float(center[1])),
    )


@dataclass(frozen=True)
class ClassificationResult:
    """Outcome of classify_cells."""

    sequence: SymbolSequence
    v_byte: int
    confidences: tuple[float, ...]  # per data cell, in layout.data_order
    model: ClusterModel


def _majority(labels: np.ndarray, dists: np.ndarray, k: int) -> int:
    """Majority label; ties broken by smallest mean distance to centroid."""
    counts = np.bincount(labels, minlength=k)
    top = counts.max()
    tied = np.nonzero(counts == top)[0]
    if tied.size == 1:
        return int(tied[0])
    best, best_mean = int(tied[0]), math.inf
    for c in tied:
        mean = float(dists[labels == c, c].mean())
        if mean < best_mean:
            best, best_mean = int(c), mean
    return best


def classify_cells(
    image: RasterImage,
    region: CodeRegion,
    pattern: SamplePattern,
    params: ConfidenceParams | None = None,
    layout: CodeLayout = DEFAULT_LAYOUT,
) -> ClassificationResult:
    """Assign a symbol to every data cell and read the V byte.

    All data-cell samples are pooled into one preset-seeded clustering;
    each cell takes its majority cluster.  Cells scoring below the
    confidence threshold are re-sampled once with the densest pattern,
    then fall back to the preset with the strongest connected domain in
    that cell.  A cell with neither snapped samples nor any matching
    domain carries no evidence at all; such cells raise LowConfidence.
    The V cell is read as a continuous gray, never through the presets.
    """
    params = params or ConfidenceParams()
    if params.h_w is None:
        params = replace(params, h_w=region.block_px)

    cells = layout.data_order
    samples = {c: sample_cell(image, region, c, pattern, snap=True) for c in cells}
    pool = np.vstack([samples[c].colors for c in cells])
    model = kmeans_preset(pool, GRAY_PRESETS)

    n = pattern.n_points
    chosen: dict[int, int] = {}
    confidences: dict[int, float] = {}
    has_domain: dict[int, bool] = {}
    dense = PATTERNS[max(PATTERNS)]

    for pos, cell in enumerate(cells):
        labels = model.assignments[pos * n : (pos + 1) * n]
        colors = samples[cell].colors
        d2 = ((colors[:, None, :] - model.centroids[None]) ** 2).sum(axis=2)
        best = _majority(labels, np.sqrt(d2), model.k)

        target = _target_features(region, cell)
        patch = _cell_patch(image, region, cell)
        dom = cell_domain_features(image, region, cell, best, patch=patch)
        conf = confidence(target, dom, params) if dom else 0.0

        if conf < params.threshold and pattern.n_points < dense.n_points:
            resampled = sample_cell(image, region, cell, dense, snap=True)
            labels2 = model.assign(resampled.colors)
            d2b = ((resampled.colors[:, None, :] - model.centroids[None]) ** 2).sum(axis=2)
            best2 = _majority(labels2, np.sqrt(d2b), model.k)
            dom2 = cell_domain_features(image, region, cell, best2, patch=patch)
            conf2 = confidence(target, dom2, params) if dom2 else 0.0
            if conf2 > conf:
                best, conf = best2, conf2
            samples[cell] = resampled

        domain_seen = dom is not None
        if conf < params.threshold:
            # Sampling failed to produce a confident read; trust the
            # strongest preset domain if one stands out (recovers blocks
            # whose central sample sites were covered by an occluder).
            best_fb, conf_fb = -1, 0.0
            for p in range(model.k):
                dom_p = cell_domain_features(image, region, cell, p, patch=patch)
                if dom_p is None:
                    continue
                domain_seen = True
                c_p = confidence(target, dom_p, params)
                if c_p > conf_fb:
                    best_fb, conf_fb = p, c_p
            if conf_fb >= params.threshold:
                best, conf = best_fb, conf_fb

        chosen[cell] = best
        confidences[cell] = conf
        has_domain[cell] = domain_seen

    no_evidence = tuple(
        c
        for c in cells
        if confidences[c] < params.threshold
        and not has_domain[c]
        and not any(0 <= i < len(GRAY_PRESETS) for i in samples[c].palette_idx)
    )
    if no_evidence:
        raise LowConfidenceError(no_evidence, tuple(confidences[c] for c in cells))

    v_sample = sample_cell(image, region, layout.v_cell, pattern, snap=False)
    v_means = tuple(float(m) for m in v_sample.colors.mean(axis=0))
    if max(v_means) - min(v_means) > _V_CHANNEL_SPREAD_MAX:
        raise VChannelMismatchError(v_means)
    v_byte = int(np.clip(round(sum(v_means) / 3.0), 0, 255))

    seq = SymbolSequence(tuple(ALPHABET[chosen[c]] for c in cells))
    return ClassificationResult(
        sequence=seq,
        v_byte=v_byte,
        confidences=tuple(confidences[c] for c in cells),
        model=model,
    )
