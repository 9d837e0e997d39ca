import csv

import numpy as np
import pytest

from cbcode.codec import capacity
from cbcode.harness import (
    INTERFERENCE_COLOR,
    OCCLUSION_MC_COLUMNS,
    SCALE_SWEEP_COLUMNS,
    BadCellError,
    DegradationSpec,
    add_noise,
    occlude,
    random_interference_color,
    random_payload,
    rotate_image,
    run_occlusion_mc,
    run_sampling_sweep,
    run_scale_sweep,
    scale_image,
    tilt_image,
    write_csv,
)
from cbcode.colorproc import snap_pixels
from cbcode.pipeline import decode, encode
from cbcode.raster import RasterImage, RenderSpec


def flat(h, w, level=128):
    return RasterImage(np.full((h, w, 3), level, dtype=np.uint8))


# --- scaling -------------------------------------------------------------------


def test_scale_dims_round_half_up():
    img = flat(260, 260)
    assert scale_image(img, 0.125).pixels.shape == (33, 33, 3)  # 32.5 -> 33
    assert scale_image(img, 0.0725).pixels.shape == (19, 19, 3)  # 18.85 -> 19
    assert scale_image(img, 0.25).pixels.shape == (65, 65, 3)


def test_scale_identity_factor_unchanged():
    img = encode(5)
    out = scale_image(img, 1.0)
    assert np.array_equal(out.pixels, img.pixels)


def test_scale_floors_at_one_pixel():
    out = scale_image(flat(4, 4), 0.01)
    assert out.pixels.shape == (1, 1, 3)


def test_scale_nearest_upsample_exact_blocks():
    img = encode(123456789, RenderSpec(block_px=1))
    big = scale_image(img, 64.0, method="nearest")
    assert big.pixels.shape == (256, 256, 3)
    assert np.array_equal(big.pixels, np.repeat(np.repeat(img.pixels, 64, 0), 64, 1))


def test_scale_bad_method():
    with pytest.raises(ValueError):
        scale_image(flat(4, 4), 0.5, method="area")


# --- occlusion ------------------------------------------------------------------


def test_occlude_cell_coverage_area():
    img = encode(0)
    out = occlude(img, cell=6, coverage=0.4)
    changed = np.any(out.pixels != img.pixels, axis=2)
    side = round(65 * 0.4**0.5)
    assert changed.sum() == side * side
    ys, xs = np.nonzero(changed)
    # centered on cell 6 (second row, second column)
    assert abs(ys.mean() - 97.0) < 1.0 and abs(xs.mean() - 97.0) < 1.0
    assert tuple(out.pixels[97, 97]) == INTERFERENCE_COLOR


def test_occlude_full_cell():
    img = encode(0)
    out = occlude(img, cell=6, coverage=1.0)
    block = out.pixels[65:130, 65:130]
    assert np.all(block == np.array(INTERFERENCE_COLOR))


def test_occlude_rect():
    img = encode(0)
    out = occlude(img, rect=(10, 20, 30, 25), color=(1, 2, 3))
    changed = np.any(out.pixels != img.pixels, axis=2)
    assert changed.sum() == (30 - 10) * (25 - 20)
    assert np.all(out.pixels[20:25, 10:30] == np.array([1, 2, 3]))


def test_occlude_validates_cell():
    img = encode(0)
    with pytest.raises(BadCellError):
        occlude(img, cell=0)
    with pytest.raises(BadCellError):
        occlude(img, cell=17)


def test_occlude_requires_target():
    with pytest.raises(ValueError):
        occlude(encode(0))


def test_occlude_does_not_mutate_input():
    img = encode(0)
    occlude(img, cell=6, coverage=1.0)
    assert tuple(img.pixels[97, 97]) != INTERFERENCE_COLOR


# --- rotation / tilt ----------------------------------------------------------------


def test_rotate_right_angles_exact():
    img = encode(42)
    assert np.array_equal(rotate_image(img, 90).pixels, np.rot90(img.pixels))
    assert np.array_equal(rotate_image(img, 180).pixels, np.rot90(img.pixels, 2))
    assert np.array_equal(rotate_image(img, 0).pixels, img.pixels)
    assert np.array_equal(rotate_image(img, 360).pixels, img.pixels)


def test_rotate_arbitrary_angle_expands_with_white():
    img = flat(10, 10, level=0)
    out = rotate_image(img, 45)
    assert out.width > 10 and out.height > 10
    assert tuple(out.pixels[0, 0]) == (255, 255, 255)


def test_tilt_zero_is_identity():
    img = encode(7)
    out = tilt_image(img, 0.0)
    assert np.array_equal(out.pixels, img.pixels)


def test_tilt_keeps_dims_and_decodes():
    img = encode(31337)
    out = tilt_image(img, 4.0, axis="x")
    assert out.pixels.shape == img.pixels.shape
    assert decode(out).payload == 31337


def test_tilt_validates_axis():
    with pytest.raises(ValueError):
        tilt_image(flat(8, 8), 3.0, axis="z")


# --- noise -------------------------------------------------------------------------------


def test_noise_gaussian_seeded_reproducible():
    img = flat(32, 32)
    a = add_noise(img, "gaussian", seed=9)
    b = add_noise(img, "gaussian", seed=9)
    c = add_noise(img, "gaussian", seed=10)
    assert np.array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.pixels, c.pixels)
    assert not np.array_equal(a.pixels, img.pixels)


def test_noise_shot_density():
    img = flat(100, 100)
    out = add_noise(img, "shot", seed=1, density=0.02)
    changed = np.any(out.pixels != img.pixels, axis=2).mean()
    assert 0.005 < changed < 0.05


def test_noise_periodic_deterministic():
    img = flat(32, 32)
    a = add_noise(img, "periodic", amplitude=16, frequency=0.1)
    b = add_noise(img, "periodic", amplitude=16, frequency=0.1)
    assert np.array_equal(a.pixels, b.pixels)
    assert not np.array_equal(a.pixels, img.pixels)


def test_noise_unknown_kind():
    with pytest.raises(ValueError):
        add_noise(flat(8, 8), "saltpepper")


# --- degradation specs ----------------------------------------------------------------------


def test_degradation_spec_dispatch():
    img = encode(2024)
    spec = DegradationSpec(kind="scale", params={"factor": 0.5})
    out = spec.apply(img)
    assert np.array_equal(out.pixels, scale_image(img, 0.5).pixels)
    spec = DegradationSpec(kind="rotate", params={"degrees": 90})
    assert np.array_equal(spec.apply(img).pixels, rotate_image(img, 90).pixels)


def test_degradation_spec_validates_kind():
    with pytest.raises(ValueError):
        DegradationSpec(kind="blur", params={})


# --- randomness helpers -----------------------------------------------------------------------


def test_random_payload_in_range():
    rng = np.random.default_rng(0)
    values = [random_payload(rng) for _ in range(200)]
    assert all(0 <= v < capacity() for v in values)
    assert len(set(values)) > 190


def test_random_interference_color_never_snaps():
    rng = np.random.default_rng(0)
    for _ in range(100):
        color = random_interference_color(rng)
        _, idx = snap_pixels(np.array([color], dtype=np.uint8))
        assert idx[0] == -1


# --- runners ------------------------------------------------------------------------------------


def test_scale_sweep_rows():
    rows = run_scale_sweep([0.5], trials=3, seed=11)
    assert len(rows) == 1
    row = rows[0]
    assert set(row) == set(SCALE_SWEEP_COLUMNS)
    assert row["factor"] == 0.5
    assert row["method"] == "bilinear"
    assert row["trials"] == 3
    assert row["successes"] == 3
    assert row["success_rate"] == 1.0
    assert row["mean_ms"] > 0


def test_scale_sweep_deterministic_modulo_timing():
    a = run_scale_sweep([0.5, 0.25], trials=2, seed=5)
    b = run_scale_sweep([0.5, 0.25], trials=2, seed=5)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "mean_ms"} for r in rows]
    assert strip(a) == strip(b)


def test_sampling_sweep_rows():
    rows = run_sampling_sweep([0.5], sample_counts=(5, 20), trials=2, seed=3)
    assert len(rows) == 2
    assert {r["sample_points"] for r in rows} == {5, 20}
    assert all(r["successes"] == 2 for r in rows)


def test_occlusion_mc_summary():
    summary = run_occlusion_mc(rounds=5, coverage_max=0.4, seed=8)
    assert set(summary) == set(OCCLUSION_MC_COLUMNS)
    assert summary["rounds"] == 5
    assert summary["coverage_max"] == 0.4
    assert summary["successes"] + summary["crc_failures"] + summary[
        "not_found"
    ] + summary["timeouts"] + summary["wrong_payload"] == 5


# --- csv ------------------------------------------------------------------------------------------


def test_write_csv_seed_comment_and_columns(tmp_path):
    rows = run_scale_sweep([0.5], trials=2, seed=21)
    path = tmp_path / "sweep.csv"
    write_csv(path, rows, SCALE_SWEEP_COLUMNS, seed=21)
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=21"
    reader = csv.DictReader(lines[1:])
    assert tuple(reader.fieldnames) == SCALE_SWEEP_COLUMNS
    parsed = list(reader)
    assert len(parsed) == 1
    assert parsed[0]["factor"] == "0.5"
    assert parsed[0]["trials"] == "2"
