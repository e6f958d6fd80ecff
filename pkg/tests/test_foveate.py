import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rblur.acuity import AcuityParams, apply_viewing_distance, build_acuity_table
from rblur.foveate import (
    RBlurConfig,
    adaptive_blur,
    add_gaussian_noise,
    blend,
    gaussian_blur_fixed,
    gaussian_kernel,
    rblur,
    to_grayscale,
)
from rblur.geometry import VisualField, eccentricity_map

from _oracles import blur_per_pixel, quantize, reflect_index, shift_values


def small_table(width=32, **params):
    return build_acuity_table(VisualField(width), AcuityParams(**params), n_bins=6, merge_threshold=0)


def test_noise_scale_zero_is_identity():
    img = np.random.default_rng(0).random((3, 8, 8))
    assert np.array_equal(add_gaussian_noise(img, 0.0, np.random.default_rng(1)), img)


def test_noise_deterministic_per_seed():
    img = np.zeros((1, 16, 16))
    a = add_gaussian_noise(img, 0.125, np.random.default_rng(5))
    b = add_gaussian_noise(img, 0.125, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_noise_moments():
    img = np.full((1, 1000, 1000), 0.5)
    out = add_gaussian_noise(img, 0.125, np.random.default_rng(2))
    assert abs(out.mean() - 0.5) < 0.001
    assert abs(out.std() - 0.125) < 0.002


def test_noise_is_not_clamped():
    out = add_gaussian_noise(np.ones((1, 64, 64)), 0.5, np.random.default_rng(0))
    assert out.max() > 1


def test_grayscale_weights():
    assert to_grayscale(np.ones((3, 1, 1)))[0, 0, 0] == pytest.approx(1.0)
    assert to_grayscale(np.array([1.0, 0, 0]).reshape(3, 1, 1))[0, 0, 0] == pytest.approx(0.299)


def test_grayscale_matches_scalar_loop():
    img = np.random.default_rng(3).random((3, 7, 5))
    out = to_grayscale(img)
    for y in range(7):
        for x in range(5):
            ref = 0.299 * img[0, y, x] + 0.587 * img[1, y, x] + 0.114 * img[2, y, x]
            assert abs(out[0, y, x] - ref) < 1e-6


def test_grayscale_passes_single_channel():
    img = np.random.default_rng(0).random((1, 4, 4))
    assert np.array_equal(to_grayscale(img), img)


def test_kernel_radius_and_normalisation():
    k = gaussian_kernel(2.3)
    assert k.size == 2 * math.ceil(6.9) + 1
    assert k.sum() == pytest.approx(1.0, abs=1e-15)


def test_fixed_blur_zero_sigma_identity():
    img = np.random.default_rng(0).random((3, 9, 9))
    assert np.array_equal(gaussian_blur_fixed(img, 0), img)


@pytest.mark.parametrize("sigma", [0.5, 2.0, 7.5])
def test_fixed_blur_preserves_constant(sigma):
    img = np.full((1, 12, 10), 0.37)
    np.testing.assert_allclose(gaussian_blur_fixed(img, sigma), img, atol=1e-12)


def test_fixed_blur_impulse_is_sampled_gaussian():
    # a centred 1-D impulse inside a tall strip; reflections never reach it
    img = np.zeros((1, 1, 41))
    img[0, 0, 20] = 1.0
    out = gaussian_blur_fixed(img, 1.0)[0, 0]
    x = np.arange(-3, 4)
    ref = np.exp(-x ** 2 / 2) / np.exp(-x ** 2 / 2).sum()
    np.testing.assert_allclose(out[17:24], ref, atol=1e-6)
    assert np.all(out[:17] == 0) and np.all(out[24:] == 0)


def test_fixed_blur_matches_oracle_with_large_radius():
    # radius exceeds the image size, exercising repeated reflection
    img = np.random.default_rng(4).random((1, 5, 7))
    sigma_map = np.full((5, 7), 3.0)
    np.testing.assert_allclose(gaussian_blur_fixed(img, 3.0), blur_per_pixel(img, sigma_map), atol=1e-12)


def test_reflect_index_oracle():
    assert [reflect_index(i, 3) for i in range(-4, 7)] == [2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0]


def test_adaptive_blur_zero_sigma_identity():
    table = small_table(beta=0.0)
    img = np.random.default_rng(0).random((3, 32, 32))
    emap = eccentricity_map((5, 9), table.field)
    assert np.array_equal(adaptive_blur(img, table, emap), img)


def test_adaptive_blur_single_bin_equals_fixed_blur():
    # p_max = 0 gives a constant gray channel, hence one gray bin and one sigma
    table = small_table(width=24, p_max=0.0)
    assert table.n_gray_bins == 1
    img = np.random.default_rng(1).random((1, 24, 24))
    emap = eccentricity_map((3, 17), table.field)
    sigma = float(table.sigma_gray[0])
    assert np.array_equal(adaptive_blur(img, table, emap, "gray"), gaussian_blur_fixed(img, sigma))


def test_adaptive_blur_matches_per_pixel_oracle():
    table = build_acuity_table(VisualField(32), AcuityParams(), n_bins=3, merge_threshold=0)
    rng = np.random.default_rng(7)
    img = rng.random((3, 32, 32))
    emap = eccentricity_map((11, 20), table.field)
    for channel, sig in (("color", table.sigma_color), ("gray", table.sigma_gray)):
        ref = blur_per_pixel(img, sig[emap.distance])
        np.testing.assert_allclose(adaptive_blur(img, table, emap, channel), ref, atol=1e-5)


def test_adaptive_blur_non_square_image():
    table = build_acuity_table(VisualField(40), AcuityParams(), n_bins=5, merge_threshold=0)
    img = np.random.default_rng(8).random((1, 18, 30))
    emap = eccentricity_map((25, 2), table.field, img.shape[1:])
    ref = blur_per_pixel(img, table.sigma_color[emap.distance])
    np.testing.assert_allclose(adaptive_blur(img, table, emap), ref, atol=1e-10)


def test_adaptive_blur_shape_mismatch():
    table = small_table()
    emap = eccentricity_map((0, 0), table.field)
    with pytest.raises(ValueError):
        adaptive_blur(np.zeros((1, 8, 8)), table, emap)


def test_blur_does_not_increase_total_variation():
    rng = np.random.default_rng(9)
    for _ in range(20):
        signal = rng.random((1, 1, 50))
        out = gaussian_blur_fixed(signal, rng.uniform(0.3, 5))
        assert np.abs(np.diff(out[0, 0])).sum() <= np.abs(np.diff(signal[0, 0])).sum() + 1e-12


def test_blend_at_fixation_is_colour():
    table = build_acuity_table(VisualField(16))
    emap = eccentricity_map((4, 4), table.field)
    c = np.random.default_rng(0).random((3, 16, 16))
    g = np.random.default_rng(1).random((1, 16, 16))
    out = blend(c, g, table, emap)
    assert table.color_acuity[0] == 1.0 and table.gray_acuity[0] == 0.0
    assert np.array_equal(out[:, 4, 4], c[:, 4, 4])


def test_blend_equal_inputs_pass_through():
    table = build_acuity_table(VisualField(16))
    emap = eccentricity_map((0, 0), table.field)
    v = np.random.default_rng(2).random((1, 16, 16))
    np.testing.assert_allclose(blend(v, v, table, emap), v, atol=1e-15)


def test_blend_equal_weights_is_midpoint():
    class Table:
        color_acuity = np.full(17, 0.12)
        gray_acuity = np.full(17, 0.12)

    emap = eccentricity_map((0, 0), VisualField(16))
    c, g = np.full((3, 16, 16), 0.2), np.full((1, 16, 16), 0.6)
    np.testing.assert_allclose(blend(c, g, Table, emap), 0.4, atol=1e-15)


def test_blend_zero_weights_fall_back_to_gray():
    class Table:
        color_acuity = np.zeros(9)
        gray_acuity = np.zeros(9)

    emap = eccentricity_map((0, 0), VisualField(8))
    with pytest.warns(RuntimeWarning):
        out = blend(np.zeros((3, 8, 8)), np.ones((1, 8, 8)), Table, emap)
    assert np.all(out == 1)


def test_identity_stack():
    cfg = RBlurConfig(AcuityParams(beta=0.0, p_max=0.0), visual_field=32, noise_scale=0.0)
    img = np.random.default_rng(0).random((3, 32, 32))
    np.testing.assert_allclose(rblur(img, (5, 5), cfg), img, atol=1e-6)


def test_rblur_deterministic():
    cfg = RBlurConfig(visual_field=48, seed=11)
    img = np.random.default_rng(0).random((3, 48, 48))
    assert np.array_equal(rblur(img, (24, 24), cfg), rblur(img, (24, 24), cfg))


@settings(max_examples=15, deadline=None)
@given(st.integers(4, 20), st.integers(0, 10 ** 6), st.booleans())
def test_rblur_output_within_noisy_range(size, seed, colour):
    cfg = RBlurConfig(visual_field=size, seed=seed, viewing_distance=0, n_bins=5, merge_threshold=0)
    rng = np.random.default_rng(seed)
    img = rng.random((3 if colour else 1, size, size))
    f = (int(rng.integers(size)), int(rng.integers(size)))
    noisy = add_gaussian_noise(img, cfg.noise_scale, np.random.default_rng(seed))
    out = rblur(img, f, cfg, np.random.default_rng(seed))
    assert out.min() >= noisy.min() - 1e-12
    assert out.max() <= noisy.max() + 1e-12


def test_constant_image_is_fixed_point():
    cfg = RBlurConfig(visual_field=40, noise_scale=0.0)
    img = np.full((3, 40, 40), 0.3)
    np.testing.assert_allclose(rblur(img, (3, 30), cfg), img, atol=1e-12)


def test_distortion_non_increasing_in_viewing_distance():
    img = np.random.default_rng(5).random((3, 96, 96))
    errors = []
    for k in range(7):
        cfg = RBlurConfig(visual_field=96, viewing_distance=k, seed=3)
        noisy = add_gaussian_noise(img, cfg.noise_scale, np.random.default_rng(3))
        out = rblur(img, (48, 48), cfg, np.random.default_rng(3))
        errors.append(np.linalg.norm(out - noisy))
    assert all(b <= a + 1e-9 for a, b in zip(errors, errors[1:]))


def test_image_larger_than_field_rejected():
    with pytest.raises(ValueError):
        rblur(np.zeros((1, 10, 10)), (0, 0), RBlurConfig(visual_field=8))


def test_periphery_gray_weight_matches_oracle():
    table = apply_viewing_distance(build_acuity_table(), 3)
    c_rank, c_val = quantize(table.raw_color.tolist(), table.n_bins, table.merge_threshold)
    g_rank, g_val = quantize(table.raw_gray.tolist(), table.n_bins, table.merge_threshold)
    c_bins = [c_val[c_rank.index(b)] for b in range(max(c_rank) + 1)]
    g_bins = [g_val[g_rank.index(b)] for b in range(max(g_rank) + 1)]
    dcq = shift_values(c_bins, c_rank, 3)[223]
    drq = shift_values(g_bins, g_rank, 3)[223]
    emap = eccentricity_map((0, 0), table.field)
    out = blend(np.zeros((3, 224, 224)), np.ones((1, 224, 224)), table, emap)
    assert out[0, 223, 223] == pytest.approx(drq / (dcq + drq), abs=1e-12)
