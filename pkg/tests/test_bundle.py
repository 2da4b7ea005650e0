"""Bundle assembly, masking, mixing, and serialization tests."""

import json

import numpy as np
import pytest

from compoz import (
    BundleFormatError,
    ConditionWeights,
    KernelSchedule,
    MaskSynthParams,
    SlicParams,
    apply_mask,
    extract_bundle,
    load_bundle,
    mix_bundles,
    save_bundle,
    synth_mask,
)
from compoz.bundle import resize_bilinear
from compoz.structure import SALIENCY_SCALE

from conftest import random_rgb

SCHEDULE = KernelSchedule(min_k=9, max_k=17, step=8)
SLIC = SlicParams(region_size=16, iterations=5, compactness=10.0, blur_k=9)


def small_bundle(seed=0, h=48, w=48, img_seed=1):
    return extract_bundle(random_rgb(img_seed, h, w), SCHEDULE, SLIC, seed=seed)


def bundles_equal(a, b) -> bool:
    return (
        np.array_equal(a.struct_map.values, b.struct_map.values)
        and np.array_equal(a.color_map.values, b.color_map.values)
        and a.struct_map.k == b.struct_map.k
        and a.provenance == b.provenance
    )


# ------------------------------------------------------------- extraction


def test_same_image_same_seed_is_bit_identical():
    a = small_bundle(seed=7)
    b = small_bundle(seed=7)
    assert bundles_equal(a, b)


def test_different_seed_can_draw_different_k():
    ks = {small_bundle(seed=s).struct_map.k for s in range(12)}
    assert len(ks) > 1
    assert ks <= {9, 17}


def test_uniform_image_trivial_bundle():
    img = np.full((40, 40, 3), 133, dtype=np.uint8)
    bundle = extract_bundle(img, SCHEDULE, SLIC, seed=0)
    assert (bundle.struct_map.values == 0.0).all()
    from compoz import srgb_to_lab

    np.testing.assert_allclose(bundle.color_map.values, srgb_to_lab(img), atol=1e-9)


def test_provenance_supports_bit_identical_reextraction():
    img = random_rgb(4, 48, 48)
    bundle = extract_bundle(img, SCHEDULE, SLIC, seed=3)
    p = bundle.provenance
    # canonical recipe: pin the recorded k and sigma, reuse the clustering params
    again = extract_bundle(
        img,
        KernelSchedule(**p["schedule"]),
        SlicParams(**p["slic"]),
        seed=p["seed"],
        k=p["k"],
        sigma=p["sigma"],
    )
    assert bundles_equal(bundle, again)
    assert p["source_sha256"] == again.provenance["source_sha256"]


def test_pinned_k_recorded_and_reextractable():
    img = random_rgb(6, 48, 48)
    bundle = extract_bundle(img, SCHEDULE, SLIC, seed=3, k=11, sigma=2.0)
    assert bundle.struct_map.k == 11
    assert bundle.provenance["k"] == 11
    again = extract_bundle(img, SCHEDULE, SLIC, seed=3,
                           k=bundle.provenance["k"], sigma=bundle.provenance["sigma"])
    assert bundles_equal(bundle, again)


def test_timings_are_reported_but_not_stored():
    timings = {}
    bundle = extract_bundle(random_rgb(2, 40, 40), SCHEDULE, SLIC, seed=0, timings=timings)
    assert timings["struct_s"] >= 0 and timings["color_s"] >= 0
    assert "struct_s" not in json.dumps(bundle.provenance)


# ------------------------------------------------------------- bilinear + mix


def oracle_bilinear_at(src: np.ndarray, out_h: int, out_w: int, y: int, x: int) -> float:
    """Direct 2x2 interpolation at one output sample (half-pixel centers)."""
    h, w = src.shape
    sy = (y + 0.5) * h / out_h - 0.5
    sx = (x + 0.5) * w / out_w - 0.5
    y0 = min(max(int(np.floor(sy)), 0), h - 1)
    x0 = min(max(int(np.floor(sx)), 0), w - 1)
    y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
    wy = min(max(sy - y0, 0.0), 1.0)
    wx = min(max(sx - x0, 0.0), 1.0)
    top = src[y0, x0] * (1 - wx) + src[y0, x1] * wx
    bot = src[y1, x0] * (1 - wx) + src[y1, x1] * wx
    return top * (1 - wy) + bot * wy


def test_resize_bilinear_matches_pointwise_oracle():
    rng = np.random.default_rng(0)
    src = rng.uniform(0, 100, (7, 9))
    out = resize_bilinear(src, 13, 5)
    for y, x in [(0, 0), (6, 2), (12, 4), (3, 3)]:
        assert out[y, x] == pytest.approx(oracle_bilinear_at(src, 13, 5, y, x), abs=1e-12)


def test_mix_self_keeps_maps():
    a = small_bundle(seed=1)
    mixed = mix_bundles(a, a)
    assert np.array_equal(mixed.struct_map.values, a.struct_map.values)
    assert np.array_equal(mixed.color_map.values, a.color_map.values)
    assert mixed.provenance["mixed"] is True


def test_mix_selects_planes_from_each_parent():
    a = small_bundle(seed=1, img_seed=1)
    b = small_bundle(seed=2, img_seed=2)
    mixed = mix_bundles(a, b)
    assert np.array_equal(mixed.struct_map.values, a.struct_map.values)
    assert np.array_equal(mixed.color_map.values, b.color_map.values)
    swapped = mix_bundles(b, a)
    assert np.array_equal(swapped.struct_map.values, b.struct_map.values)
    assert np.array_equal(swapped.color_map.values, a.color_map.values)


def test_mix_resamples_color_source_to_struct_dims():
    a = small_bundle(seed=1, h=48, w=48, img_seed=1)
    b = extract_bundle(random_rgb(9, 24, 24), SCHEDULE, SLIC, seed=5)
    mixed = mix_bundles(a, b)
    assert mixed.color_map.values.shape == (48, 48, 3)
    expected = resize_bilinear(b.color_map.values, 48, 48)
    np.testing.assert_array_equal(mixed.color_map.values, expected)


def test_mix_records_both_parents():
    a = small_bundle(seed=1, img_seed=1)
    b = small_bundle(seed=2, img_seed=2)
    mixed = mix_bundles(a, b)
    assert mixed.provenance["struct_parent"] == a.provenance
    assert mixed.provenance["color_parent"] == b.provenance
    assert mixed.weights == ConditionWeights(a.weights.w_struct, b.weights.w_color)


# ------------------------------------------------------------- masks


def test_synth_mask_deterministic():
    p = MaskSynthParams()
    a = synth_mask(30, 20, p, np.random.default_rng(5))
    b = synth_mask(30, 20, p, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_mask_and_inverse_partition_image():
    p = MaskSynthParams(invert_prob=0.0)
    mask = synth_mask(25, 25, p, np.random.default_rng(1))
    assert (mask | ~mask).all()
    assert mask.any() and (~mask).any()


def test_rectangle_area_fraction_within_analytic_bounds():
    p = MaskSynthParams(shape="rectangle", invert_prob=0.0)
    w = h = 100
    fractions = []
    for s in range(1000):
        mask = synth_mask(w, h, p, np.random.default_rng(s))
        fractions.append(mask.mean())
    fractions = np.array(fractions)
    # sides are U(0.10, 0.60) of each dimension: area in [0.01, 0.36]
    assert fractions.min() >= 0.01 - 0.01  # integer rounding slack on 100px sides
    assert fractions.max() <= 0.36 + 0.01
    assert 0.05 <= fractions.mean() <= 0.2  # E[a]*E[b] = 0.1225


def test_ellipse_fits_within_rectangle_bounds():
    p = MaskSynthParams(shape="ellipse", invert_prob=0.0)
    for s in range(50):
        mask = synth_mask(60, 40, p, np.random.default_rng(s))
        assert 0.0 < mask.mean() <= 0.36 + 0.02


def test_inversion_probability_honored():
    p_always = MaskSynthParams(shape="rectangle", invert_prob=1.0)
    p_never = MaskSynthParams(shape="rectangle", invert_prob=0.0)
    inv = synth_mask(40, 40, p_always, np.random.default_rng(3))
    base = synth_mask(40, 40, p_never, np.random.default_rng(3))
    np.testing.assert_array_equal(inv, ~base)


def test_apply_mask_all_true_is_noop_on_planes():
    bundle = small_bundle(seed=2)
    mask = np.ones((48, 48), dtype=bool)
    masked = apply_mask(bundle, mask, "both")
    assert np.array_equal(masked.struct_map.values, bundle.struct_map.values)
    assert np.array_equal(masked.color_map.values, bundle.color_map.values)
    planes = masked.conditioning_planes()
    assert (planes["struct_mask"] == 1.0).all()


def test_apply_mask_all_false_zeroes_struct():
    bundle = small_bundle(seed=2)
    masked = apply_mask(bundle, np.zeros((48, 48), bool), "struct")
    assert (masked.struct_map.values == 0.0).all()
    assert np.array_equal(masked.color_map.values, bundle.color_map.values)


def test_apply_mask_half_plane():
    bundle = small_bundle(seed=2)
    mask = np.zeros((48, 48), bool)
    mask[:, 24:] = True
    masked = apply_mask(bundle, mask, "both")
    assert (masked.struct_map.values[:, :24] == 0.0).all()
    assert np.array_equal(masked.struct_map.values[:, 24:], bundle.struct_map.values[:, 24:])
    assert (masked.color_map.values[:, :24] == 0.0).all()
    assert np.array_equal(masked.color_map.values[:, 24:], bundle.color_map.values[:, 24:])


def test_apply_mask_idempotent():
    bundle = small_bundle(seed=2)
    mask = synth_mask(48, 48, MaskSynthParams(), np.random.default_rng(0))
    once = apply_mask(bundle, mask, "both")
    twice = apply_mask(once, mask, "both")
    assert np.array_equal(once.struct_map.values, twice.struct_map.values)
    assert np.array_equal(once.color_map.values, twice.color_map.values)


def test_apply_mask_dimension_mismatch():
    bundle = small_bundle(seed=2)
    with pytest.raises(ValueError):
        apply_mask(bundle, np.ones((10, 10), bool), "both")


# ------------------------------------------------------------- serialization


def test_round_trip_within_quantization(tmp_path):
    bundle = small_bundle(seed=4)
    save_bundle(bundle, tmp_path / "b")
    loaded = load_bundle(tmp_path / "b")
    struct_err = np.abs(loaded.struct_map.values - bundle.struct_map.values).max()
    assert struct_err <= SALIENCY_SCALE / 65535.0
    from compoz import lab_to_srgb

    color_err = np.abs(
        lab_to_srgb(loaded.color_map.values).astype(int)
        - lab_to_srgb(bundle.color_map.values).astype(int)
    ).max()
    assert color_err <= 1


def test_round_trip_metadata_exact(tmp_path):
    bundle = extract_bundle(
        random_rgb(8, 40, 40),
        SCHEDULE,
        SLIC,
        seed=11,
        weights=ConditionWeights(0.25, 1.75),
    )
    save_bundle(bundle, tmp_path / "b")
    loaded = load_bundle(tmp_path / "b")
    assert loaded.weights == bundle.weights
    assert loaded.provenance == bundle.provenance
    assert loaded.struct_map.k == bundle.struct_map.k
    assert loaded.struct_map.sigma == bundle.struct_map.sigma
    assert loaded.color_map.params == bundle.color_map.params


def test_round_trip_masks(tmp_path):
    bundle = small_bundle(seed=4)
    mask = synth_mask(48, 48, MaskSynthParams(), np.random.default_rng(9))
    masked = apply_mask(bundle, mask, "both")
    save_bundle(masked, tmp_path / "b")
    loaded = load_bundle(tmp_path / "b")
    np.testing.assert_array_equal(loaded.mask_struct, mask)
    np.testing.assert_array_equal(loaded.mask_color, mask)


def test_save_is_byte_deterministic(tmp_path):
    bundle = small_bundle(seed=4)
    save_bundle(bundle, tmp_path / "b1")
    save_bundle(bundle, tmp_path / "b2")
    for name in ("struct.png", "color.png", "meta.json"):
        assert (tmp_path / "b1" / name).read_bytes() == (tmp_path / "b2" / name).read_bytes()


def test_load_rejects_tampered_dims(tmp_path):
    bundle = small_bundle(seed=4)
    save_bundle(bundle, tmp_path / "b")
    meta_path = tmp_path / "b" / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["width"] = 13
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(BundleFormatError):
        load_bundle(tmp_path / "b")


def test_load_rejects_missing_plane(tmp_path):
    bundle = small_bundle(seed=4)
    save_bundle(bundle, tmp_path / "b")
    (tmp_path / "b" / "color.png").unlink()
    with pytest.raises(BundleFormatError):
        load_bundle(tmp_path / "b")


def test_load_rejects_corrupt_meta(tmp_path):
    bundle = small_bundle(seed=4)
    save_bundle(bundle, tmp_path / "b")
    (tmp_path / "b" / "meta.json").write_text("{not json")
    with pytest.raises(BundleFormatError):
        load_bundle(tmp_path / "b")


def test_load_rejects_wrong_version(tmp_path):
    bundle = small_bundle(seed=4)
    save_bundle(bundle, tmp_path / "b")
    meta_path = tmp_path / "b" / "meta.json"
    meta = json.loads(meta_path.read_text())
    meta["format_version"] = 99
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(BundleFormatError):
        load_bundle(tmp_path / "b")


def test_load_rejects_missing_dir(tmp_path):
    with pytest.raises(BundleFormatError):
        load_bundle(tmp_path / "nope")


def test_weights_validation():
    with pytest.raises(ValueError):
        ConditionWeights(-1.0, 1.0)
    with pytest.raises(ValueError):
        ConditionWeights(float("nan"), 1.0)
