import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from salshift.errors import RangeError, ShapeError
from salshift.imaging import (
    EditRecipe,
    MaskLayer,
    ParamSet,
    RasterImage,
    STAGE_NAMES,
    adjust_contrast,
    adjust_exposure,
    apply_curve,
    apply_param_set,
    composite,
    identity_params,
    identity_recipe,
    interpolate_params,
    luminance,
    resize_bilinear,
    resize_nearest,
    sharpen,
)
from conftest import random_binary_mask, random_image, random_soft_mask


def gray(value, shape=(4, 4)):
    return RasterImage(np.full(shape + (3,), float(value)))


class TestLuminance:
    def test_white_is_one(self):
        assert luminance(gray(1.0))[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_black_is_zero(self):
        assert luminance(gray(0.0))[0, 0] == 0.0

    def test_pure_red_coefficient(self):
        img = RasterImage(np.zeros((2, 2, 3)))
        img.data[..., 0] = 1.0
        assert luminance(img)[0, 0] == pytest.approx(0.27, abs=1e-12)


class TestSharpen:
    def test_constant_image_fixed_point(self, rng):
        img = gray(0.42, (8, 8))
        for p1 in (-2.0, -0.5, 1.0, 2.0):
            out = sharpen(img, p1)
            np.testing.assert_array_equal(out.data, img.data)

    def test_vertical_edge_case_matches_oracle(self):
        # rows all (0, 1, 1); the center edge response is 0.5
        grid = [[0.0, 1.0, 1.0]] * 3
        img = RasterImage(np.repeat(np.array(grid)[..., None], 3, axis=2))
        out = sharpen(img, -2.0)
        expected = oracles.sharpen_grid(grid, -2.0)
        assert expected[1][1] == 0.0
        assert out.data[1, 1, 0] == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(out.data[..., 1], expected, atol=1e-9)

    def test_zero_strength_is_identity(self, rng):
        img = random_image(rng)
        np.testing.assert_array_equal(sharpen(img, 0.0).data, img.data)

    def test_out_of_range_rejected(self):
        with pytest.raises(RangeError):
            sharpen(gray(0.5), 2.5)

    def test_orientation_independence(self, rng):
        # convolution flips the kernels relative to cross-correlation; the
        # squared responses make the edge map identical either way
        from scipy import ndimage

        from salshift.imaging import _sobel_edges

        f1 = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]]) / 8.0
        f2 = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]]) / 8.0
        arr = rng.random((9, 9))
        correlated = np.hypot(
            ndimage.correlate(arr, f1, mode="nearest"),
            ndimage.correlate(arr, f2, mode="nearest"),
        )
        convolved = np.hypot(
            ndimage.convolve(arr, f1, mode="nearest"),
            ndimage.convolve(arr, f2, mode="nearest"),
        )
        np.testing.assert_allclose(correlated, convolved, atol=1e-12)
        library = _sobel_edges(np.repeat(arr[..., None], 3, axis=2))[..., 0]
        np.testing.assert_allclose(library, correlated, atol=1e-9)


class TestExposure:
    def test_doubling(self):
        out = adjust_exposure(gray(0.25), 1.0)
        np.testing.assert_allclose(out.data, 0.5, atol=1e-12)

    def test_identity_at_zero(self, rng):
        img = random_image(rng)
        np.testing.assert_array_equal(adjust_exposure(img, 0.0).data, img.data)

    def test_clamps_highlights(self):
        out = adjust_exposure(gray(0.8), 3.0)
        assert out.data.max() == 1.0
        assert oracles.exposure_px(0.8, 3.0) == 1.0

    def test_matches_oracle(self, rng):
        img = random_image(rng, 5, 5)
        for p2 in (-3.0, -1.2, 0.4, 3.0):
            out = adjust_exposure(img, p2)
            expected = np.vectorize(lambda v: oracles.exposure_px(v, p2))(img.data)
            np.testing.assert_allclose(out.data, expected, atol=1e-9)

    def test_raw_output_linear_in_input(self, rng):
        # pre-clamp the transform is a pure scaling: f(a*x + b*y) = a*f(x) + b*f(y)
        from salshift.imaging import exposure_array

        x = rng.random((6, 6, 3)) * 0.2  # small enough that nothing clamps
        y = rng.random((6, 6, 3)) * 0.2
        p2 = 1.3
        combined = exposure_array(0.4 * x + 0.6 * y, p2)
        split = 0.4 * exposure_array(x, p2) + 0.6 * exposure_array(y, p2)
        np.testing.assert_allclose(combined, split, atol=1e-12)

    def test_out_of_range_rejected(self):
        with pytest.raises(RangeError):
            adjust_exposure(gray(0.5), -3.01)


class TestContrast:
    def test_identity_at_zero(self, rng):
        img = random_image(rng)
        np.testing.assert_array_equal(adjust_contrast(img, 0.0).data, img.data)

    def test_mid_gray_fixed_point(self):
        out = adjust_contrast(gray(0.5), 1.0)
        np.testing.assert_allclose(out.data, 0.5, atol=1e-9)

    def test_quarter_gray_value(self):
        out = adjust_contrast(gray(0.25), 1.0)
        expected = oracles.contrast_px((0.25, 0.25, 0.25), 1.0)[0]
        assert expected == pytest.approx(0.5 * (1 - np.cos(np.pi * 0.25)), abs=1e-12)
        np.testing.assert_allclose(out.data, expected, atol=1e-9)

    def test_matches_oracle(self, rng):
        img = random_image(rng, 4, 6)
        for p3 in (-1.0, -0.3, 0.7, 1.0):
            out = adjust_contrast(img, p3)
            for i in range(4):
                for j in range(6):
                    expected = oracles.contrast_px(tuple(img.data[i, j]), p3)
                    np.testing.assert_allclose(out.data[i, j], expected, atol=1e-9)


class TestCurve:
    def test_constant_curve_identity(self, rng):
        img = random_image(rng)
        for c in (0.01, 1.0, 2.37, 3.0):
            out = apply_curve(img, np.full(8, c))
            np.testing.assert_allclose(out.data, img.data, atol=1e-9)

    def test_two_segment_example(self):
        out = apply_curve(gray(0.75), [1.0, 3.0])
        assert oracles.curve_px(0.75, [1.0, 3.0]) == pytest.approx(0.625, abs=1e-12)
        np.testing.assert_allclose(out.data, 0.625, atol=1e-9)

    def test_zero_input_maps_to_zero(self):
        out = apply_curve(gray(0.0), [1.0, 3.0])
        np.testing.assert_array_equal(out.data, 0.0)

    def test_matches_oracle(self, rng):
        img = random_image(rng, 5, 5)
        curve = rng.uniform(0.01, 3.0, size=8)
        out = apply_curve(img, curve)
        expected = np.vectorize(lambda v: oracles.curve_px(v, list(curve)))(img.data)
        np.testing.assert_allclose(out.data, expected, atol=1e-9)

    def test_per_channel_curves(self, rng):
        img = random_image(rng, 4, 4)
        curves = rng.uniform(0.01, 3.0, size=(3, 8))
        out = apply_curve(img, None, per_channel=curves)
        for ch in range(3):
            expected = np.vectorize(lambda v: oracles.curve_px(v, list(curves[ch])))(
                img.data[..., ch]
            )
            np.testing.assert_allclose(out.data[..., ch], expected, atol=1e-9)

    def test_below_floor_rejected(self):
        with pytest.raises(RangeError):
            apply_curve(gray(0.5), [0.005] + [1.0] * 7)

    @settings(max_examples=50, deadline=None)
    @given(
        values=st.lists(st.floats(0.01, 3.0), min_size=8, max_size=8),
        x=st.floats(0.0, 1.0),
        y=st.floats(0.0, 1.0),
    )
    def test_monotone_in_input(self, values, x, y):
        lo, hi = sorted((x, y))
        img_lo = gray(lo, (1, 1))
        img_hi = gray(hi, (1, 1))
        curve = np.array(values)
        assert (
            apply_curve(img_lo, curve).data[0, 0, 0]
            <= apply_curve(img_hi, curve).data[0, 0, 0] + 1e-12
        )


class TestParamSet:
    def test_identity_params_fields(self):
        params = identity_params(8)
        assert params.sharpness == params.exposure == params.contrast == 0.0
        np.testing.assert_array_equal(params.tone, np.ones(8))
        np.testing.assert_array_equal(params.color, np.ones((3, 8)))

    def test_identity_requires_two_segments(self):
        with pytest.raises(RangeError):
            identity_params(1)

    def test_projection_clamps(self):
        params = ParamSet(sharpness=5.0, exposure=-9.0, contrast=0.5, tone=np.full(8, 4.0))
        projected = params.project()
        assert projected.sharpness == 2.0
        assert projected.exposure == -3.0
        assert projected.tone.max() == 3.0
        projected.validate()

    def test_validate_rejects_bad_curve(self):
        with pytest.raises(RangeError):
            ParamSet(tone=np.full(8, 0.0)).validate()


class TestApplyParamSet:
    def test_identity_recipe_exact(self, rng):
        img = random_image(rng)
        for order in (STAGE_NAMES, tuple(reversed(STAGE_NAMES))):
            out = apply_param_set(img, identity_params(), order)
            np.testing.assert_array_equal(out.data, img.data)

    def test_exposure_only(self):
        params = identity_params()
        params.exposure = 1.0
        out = apply_param_set(gray(0.25), params)
        np.testing.assert_allclose(out.data, 0.5, atol=1e-12)

    def test_single_active_stage_is_order_independent(self):
        params = identity_params()
        params.exposure = 0.7
        img = gray(0.3, (6, 6))
        a = apply_param_set(img, params, STAGE_NAMES)
        b = apply_param_set(img, params, tuple(reversed(STAGE_NAMES)))
        np.testing.assert_array_equal(a.data, b.data)

    def test_rejects_non_permutation(self):
        with pytest.raises(RangeError):
            apply_param_set(gray(0.5), identity_params(), ("sharpen",) * 5)

    @settings(max_examples=25, deadline=None)
    @given(data=st.data())
    def test_range_closure(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
        img = random_image(rng, 8, 8)
        params = ParamSet(
            sharpness=rng.uniform(-2, 2),
            exposure=rng.uniform(-3, 3),
            contrast=rng.uniform(-1, 1),
            tone=rng.uniform(0.01, 3.0, 8),
            color=rng.uniform(0.01, 3.0, (3, 8)),
        )
        out = apply_param_set(img, params)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0


class TestComposite:
    def test_full_mask_equals_foreground(self, rng):
        img = random_image(rng)
        recipe = identity_recipe()
        recipe.foreground.exposure = 1.0
        mask = MaskLayer(np.ones((img.height, img.width)))
        out = composite(img, mask, recipe)
        expected = apply_param_set(img, recipe.foreground)
        np.testing.assert_array_equal(out.data, expected.data)

    def test_empty_mask_equals_background(self, rng):
        img = random_image(rng)
        recipe = identity_recipe()
        recipe.background.exposure = -1.0
        mask = MaskLayer(np.zeros((img.height, img.width)))
        out = composite(img, mask, recipe)
        expected = apply_param_set(img, recipe.background)
        np.testing.assert_array_equal(out.data, expected.data)

    def test_half_mask_blend(self):
        arr = np.full((4, 8, 3), 0.25)
        weights = np.zeros((4, 8))
        weights[:, :4] = 1.0
        recipe = identity_recipe()
        recipe.foreground.exposure = 1.0
        out = composite(RasterImage(arr), MaskLayer(weights), recipe)
        np.testing.assert_allclose(out.data[:, :4], 0.5, atol=1e-12)
        np.testing.assert_allclose(out.data[:, 4:], 0.25, atol=1e-12)

    def test_identity_recipe_exact_soft_mask(self, rng):
        img = random_image(rng)
        mask = random_soft_mask(rng)
        out = composite(img, mask, identity_recipe())
        np.testing.assert_array_equal(out.data, img.data)

    def test_blend_partition_binary_mask(self, rng):
        img = random_image(rng)
        mask = random_binary_mask(rng)
        recipe = identity_recipe()
        recipe.foreground.exposure = 0.8
        recipe.background.contrast = -0.5
        out = composite(img, mask, recipe)
        fg = apply_param_set(img, recipe.foreground).data
        bg = apply_param_set(img, recipe.background).data
        m = mask.weights[..., None]
        np.testing.assert_array_equal(out.data, fg * m + bg * (1.0 - m))

    def test_binary_mask_pixels_from_exactly_one_stream(self, rng):
        img = random_image(rng)
        mask = random_binary_mask(rng)
        recipe = identity_recipe()
        recipe.foreground.exposure = 1.0
        recipe.background.exposure = -1.0
        out = composite(img, mask, recipe)
        fg = apply_param_set(img, recipe.foreground).data
        bg = apply_param_set(img, recipe.background).data
        binary = mask.binarized()
        np.testing.assert_array_equal(out.data[binary], fg[binary])
        np.testing.assert_array_equal(out.data[~binary], bg[~binary])

    def test_dimension_mismatch_rejected(self, rng):
        with pytest.raises(ShapeError):
            composite(random_image(rng, 8, 8), MaskLayer(np.ones((4, 4))), identity_recipe())


class TestInterpolation:
    def test_alpha_zero_gives_identity(self, rng):
        recipe = identity_recipe()
        recipe.foreground.exposure = 2.0
        recipe.background.tone = np.linspace(0.5, 2.0, 8)
        out = interpolate_params(recipe, 0.0)
        assert out.foreground.is_identity()
        assert out.background.is_identity()

    def test_alpha_one_reproduces_recipe(self, rng):
        recipe = identity_recipe()
        recipe.foreground.sharpness = -1.5
        recipe.foreground.tone = np.linspace(0.2, 2.8, 8)
        recipe.background.color = np.full((3, 8), 1.7)
        out = interpolate_params(recipe, 1.0)
        assert out.foreground.sharpness == recipe.foreground.sharpness
        np.testing.assert_array_equal(out.foreground.tone, recipe.foreground.tone)
        np.testing.assert_array_equal(out.background.color, recipe.background.color)

    def test_midpoint_exposure(self):
        recipe = identity_recipe()
        recipe.foreground.exposure = 2.0
        out = interpolate_params(recipe, 0.5)
        assert out.foreground.exposure == pytest.approx(
            oracles.interpolate_value(2.0, 0.0, 0.5, -3, 3), abs=1e-12
        )
        assert out.foreground.exposure == pytest.approx(1.0, abs=1e-12)

    def test_extrapolation_clamps(self):
        recipe = identity_recipe()
        recipe.foreground.exposure = 2.5
        out = interpolate_params(recipe, 1.5)
        assert out.foreground.exposure == 3.0  # 3.75 clamped

    def test_out_of_range_alpha(self):
        with pytest.raises(RangeError):
            interpolate_params(identity_recipe(), 1.6)
        with pytest.raises(RangeError):
            interpolate_params(identity_recipe(), -0.1)


class TestResize:
    def test_bilinear_constant_preserved(self):
        arr = np.full((10, 20), 0.37)
        out = resize_bilinear(arr, 7, 13)
        np.testing.assert_allclose(out, 0.37, atol=1e-12)

    def test_nearest_preserves_binarity(self, rng):
        arr = (rng.random((16, 16)) < 0.5).astype(float)
        out = resize_nearest(arr, 9, 11)
        assert set(np.unique(out)) <= {0.0, 1.0}

    def test_identity_size_copy(self, rng):
        arr = rng.random((6, 6))
        out = resize_bilinear(arr, 6, 6)
        np.testing.assert_array_equal(out, arr)
        assert out is not arr


class TestEditRecipe:
    def test_rejects_bad_order(self):
        with pytest.raises(RangeError):
            EditRecipe(
                foreground=identity_params(),
                background=identity_params(),
                pipeline_order=("sharpen", "exposure", "contrast", "tone", "tone"),
            )

    def test_rejects_bad_mode(self):
        with pytest.raises(RangeError):
            EditRecipe(
                foreground=identity_params(),
                background=identity_params(),
                mode="sideways",
            )
