"""Sampling, clustering and confidence tests.

The small k-means cases are checked against sums worked out by hand; the
ten rows of degraded block colors come from a published recognition-error
table for codes downscaled to 7.25%.
"""

import math

import numpy as np
import pytest

from cbcode.classifier import (
    PATTERNS,
    ConfidenceParams,
    DomainFeatures,
    LowConfidenceError,
    VChannelMismatchError,
    cell_domain_features,
    classify_cells,
    confidence,
    kmeans_preset,
    pattern_for,
    sample_cell,
)
from cbcode.codec import build_matrix, payload_to_symbols
from cbcode.harness import occlude
from cbcode.locator import find_code_region
from cbcode.pipeline import encode

GRAY_LEVELS = (0x00, 0x33, 0x66, 0x99, 0xCC, 0xFF)

# Degraded RGB readings of five blocks over ten rounds at 7.25% scale;
# expected cluster letters are (C, 3, C, 9, F) every round.
DEGRADED_ROUNDS = [
    ("D4C9D4", "303535", "CBCBCB", "979897", "FFFFFF"),
    ("CECDCE", "303131", "C9CAC9", "919191", "FFFFFF"),
    ("CACACA", "2C2C2C", "CFCECF", "979797", "FFFFFF"),
    ("CBC5CB", "253434", "C1C1C1", "929292", "FFFFFF"),
    ("CFCACF", "3F3E3E", "C8C8C8", "909090", "FFFFFF"),
    ("DADADA", "323333", "CFCCCF", "989898", "FFFFFF"),
    ("CECACE", "283636", "D0CDD0", "979797", "FFFFFF"),
    ("D2CDD2", "422F2F", "C8C8C8", "979797", "FFFFFF"),
    ("CFCACF", "293636", "DCCDCD", "939393", "FFFFFF"),
    ("D8D8D8", "323434", "D1CBD1", "969696", "E8E8E8"),
]


def hex_rgb(h):
    return (int(h[0:2], 16), int(h[2:4], 16), int(h[4:6], 16))


def located(payload=123456789):
    img = encode(payload)
    return img, find_code_region(img)


# --- sample patterns -----------------------------------------------------------


def test_patterns_available():
    assert sorted(PATTERNS) == [5, 10, 20]
    for n, pattern in PATTERNS.items():
        assert pattern.n_points == n
        assert len(pattern.offsets) == n
        offs = np.asarray(pattern.offsets)
        assert np.all(np.abs(offs) <= 0.25)


def test_pattern_for_rejects_unknown_count():
    with pytest.raises(ValueError):
        pattern_for(7)


def test_quincunx_geometry():
    offs = set(map(tuple, np.asarray(PATTERNS[5].offsets)))
    assert (0.0, 0.0) in offs
    assert (0.25, 0.25) in offs and (-0.25, -0.25) in offs


# --- cell sampling ----------------------------------------------------------------


def test_sample_clean_cell_snaps_exactly():
    img, region = located()
    sample = sample_cell(img, region, 6, PATTERNS[5])
    assert sample.clamped == (False,) * 5
    assert len(set(sample.palette_idx)) == 1
    (x, y), rgb = sample.points[0]
    assert (x, y) == pytest.approx((97.0, 97.0))
    assert rgb[0] == rgb[1] == rgb[2]
    assert rgb[0] in GRAY_LEVELS


def test_sample_unsnapped_keeps_raw_colors():
    img, region = located()
    sample = sample_cell(img, region, 6, PATTERNS[5], snap=False)
    raw = np.asarray(sample.colors)
    assert np.all(raw == raw[0])


def test_sample_clamp_flags_outside_image():
    img, region = located()
    # shift the region far beyond the right edge via a fake hint region
    from cbcode.locator import region_from_hint

    big = encode(123456789)
    shifted = region_from_hint(
        big, ((0, 0), (260, 0), (260, 260), (0, 260))
    )
    # sampling cell 16 of a region hanging off the image clamps points
    import dataclasses

    far = dataclasses.replace(
        shifted, corners=shifted.corners + np.array([200.0, 0.0])
    )
    sample = sample_cell(big, far, 8, PATTERNS[5])
    assert any(sample.clamped)


# --- k-means ------------------------------------------------------------------------


def test_kmeans_two_points_one_cluster():
    # both points join the first preset; its centroid moves to the mean
    # and the energy is 2 * (3^2 * 3) = 54
    model = kmeans_preset(
        np.array([[0.0, 0, 0], [6.0, 6, 6]]),
        presets=np.array([[3.0, 3, 3], [100.0, 100, 100]]),
    )
    assert list(model.assignments) == [0, 0]
    assert model.centroids[0] == pytest.approx([3.0, 3.0, 3.0])
    assert model.energy_history[0] == pytest.approx(54.0)
    assert model.converged


def test_kmeans_empty_cluster_keeps_preset():
    model = kmeans_preset(
        np.array([[0.0, 0, 0], [1.0, 1, 1]]),
        presets=np.array([[0.0, 0, 0], [200.0, 200, 200]]),
    )
    assert model.centroids[1] == pytest.approx([200.0, 200.0, 200.0])


def test_kmeans_energy_non_increasing_random():
    rng = np.random.default_rng(10)
    presets = np.array([[g, g, g] for g in GRAY_LEVELS], dtype=np.float64)
    for _ in range(25):
        samples = rng.uniform(0, 255, size=(40, 3))
        model = kmeans_preset(samples, presets=presets)
        hist = np.asarray(model.energy_history)
        assert np.all(np.diff(hist) <= 1e-9)


def test_kmeans_validates_inputs():
    with pytest.raises(ValueError):
        kmeans_preset(np.empty((0, 3)))
    with pytest.raises(ValueError):
        kmeans_preset(
            np.array([[1.0, 1, 1]]),
            presets=np.array([[0.0, 0, 0], [0.0, 0, 0]]),
        )


def test_kmeans_degraded_rounds_match_preset_letters():
    letters = "0369CF"
    for row in DEGRADED_ROUNDS:
        samples = np.array([hex_rgb(h) for h in row], dtype=np.float64)
        model = kmeans_preset(samples)
        got = "".join(letters[i] for i in model.assignments)
        assert got == "C3C9F"


def test_cluster_model_assigns_new_samples():
    presets = np.array([[g, g, g] for g in GRAY_LEVELS], dtype=np.float64)
    model = kmeans_preset(
        np.array([[40.0, 40, 40], [200.0, 200, 200]]), presets=presets
    )
    idx = model.assign(np.array([[0.0, 0, 0], [250.0, 250, 250]]))
    assert idx[0] in (0, 1) and idx[1] == 5


# --- confidence -----------------------------------------------------------------------


def full_block(hw=65.0, center=(32.0, 32.0)):
    return DomainFeatures(
        area=hw * hw,
        area_ratio=1.0,
        length=hw,
        width=hw,
        length_width_ratio=1.0,
        center=center,
    )


def test_confidence_identical_is_one():
    params = ConfidenceParams(h_w=65.0)
    assert confidence(full_block(), full_block(), params) == 1.0


def test_confidence_half_block_hand_value():
    # half the area, half the width: terms 0.5 + 0.5 + 1 + 0 + 0.5 = 2.5
    target = full_block()
    observed = DomainFeatures(
        area=65.0 * 65.0 / 2,
        area_ratio=0.5,
        length=65.0,
        width=32.5,
        length_width_ratio=2.0,
        center=(32.0, 32.0),
    )
    params = ConfidenceParams(h_w=65.0)
    assert confidence(target, observed, params) == pytest.approx(math.exp(-2.5))


def test_confidence_center_shift_hand_value():
    target = full_block()
    observed = full_block(center=(45.0, 32.0))
    params = ConfidenceParams(h_w=65.0)
    # ||dC|| / (2 h_w n) = 13 / 130 = 0.1
    assert confidence(target, observed, params) == pytest.approx(math.exp(-0.1))


def test_confidence_params_validate():
    with pytest.raises(ValueError):
        ConfidenceParams(threshold=0.0)
    with pytest.raises(ValueError):
        ConfidenceParams(threshold=1.5)
    with pytest.raises(ValueError):
        ConfidenceParams(n=0)


# --- domain features ----------------------------------------------------------------


def test_domain_features_full_cell():
    img, region = located()
    sample = sample_cell(img, region, 6, PATTERNS[5])
    preset = sample.palette_idx[0]
    feats = cell_domain_features(img, region, 6, preset)
    assert feats is not None
    assert feats.area_ratio == pytest.approx(1.0)
    assert feats.length_width_ratio == pytest.approx(1.0)
    assert feats.center == pytest.approx((97.0, 97.0), abs=0.6)


def test_domain_features_absent_preset():
    img, region = located(payload=0)  # all data cells black (level 0)
    feats = cell_domain_features(img, region, 6, 5)  # white domain in a black cell
    assert feats is None


def test_domain_features_centered_occlusion_filled_as_hole():
    # a centered occluder is enclosed by the cell's gray ring, so hole
    # filling restores the full block domain
    img, region = located()
    sample = sample_cell(img, region, 6, PATTERNS[5])
    preset = sample.palette_idx[0]
    occluded = occlude(img, cell=6, coverage=0.4)
    feats = cell_domain_features(occluded, region, 6, preset)
    assert feats is not None
    assert feats.area_ratio == pytest.approx(1.0, abs=0.05)


def test_domain_features_shrink_under_edge_occlusion():
    # covering the top half of the cell from its edge leaves no hole to
    # fill: the domain is genuinely half-sized
    img, region = located()
    sample = sample_cell(img, region, 6, PATTERNS[5])
    preset = sample.palette_idx[0]
    occluded = occlude(img, rect=(65, 65, 130, 98))
    feats = cell_domain_features(occluded, region, 6, preset)
    assert feats is not None
    assert feats.area_ratio < 0.75
    assert feats.length_width_ratio > 1.5


# --- classify_cells ---------------------------------------------------------------------


def test_classify_clean_render():
    payload = 555444333
    img, region = located(payload)
    result = classify_cells(img, region, PATTERNS[5])
    assert result.sequence == payload_to_symbols(payload)
    assert result.confidences == (1.0,) * 12
    assert result.v_byte == build_matrix(payload_to_symbols(payload)).crc


def test_classify_all_patterns_agree():
    payload = 192837465
    img, region = located(payload)
    for n in (5, 10, 20):
        result = classify_cells(img, region, PATTERNS[n])
        assert result.sequence == payload_to_symbols(payload)


def test_classify_occluded_cell_recovers_via_domain():
    img, region = located(123456789)
    occluded = occlude(img, cell=6, coverage=0.4)
    result = classify_cells(occluded, region, PATTERNS[5])
    assert result.sequence == payload_to_symbols(123456789)


def test_classify_fully_occluded_cell_raises_low_confidence():
    img, region = located(123456789)
    occluded = occlude(img, cell=6, coverage=1.0)
    with pytest.raises(LowConfidenceError) as exc_info:
        classify_cells(occluded, region, PATTERNS[5])
    assert 6 in exc_info.value.cells


def test_classify_v_channel_mismatch():
    img, region = located(123456789)
    # paint the V cell with a split-channel color: means differ > 0x10
    split = occlude(img, cell=4, coverage=1.0, color=(0x40, 0x70, 0x40))
    with pytest.raises(VChannelMismatchError):
        classify_cells(split, region, PATTERNS[5])


def test_classify_v_cell_tolerates_small_spread():
    img, region = located(123456789)
    crc = build_matrix(payload_to_symbols(123456789)).crc
    near = (max(crc - 4, 0), crc, min(crc + 4, 255))
    tweaked = occlude(img, cell=4, coverage=1.0, color=near)
    result = classify_cells(tweaked, region, PATTERNS[5])
    assert abs(result.v_byte - crc) <= 4
