"""Resampler, blur kernel, and the three degradation pipelines."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mprnet.degrade import (
    BD,
    BI,
    DN,
    DegradationSpec,
    bicubic_kernel,
    blur2d,
    degrade,
    gaussian_kernel2d,
    mod_crop,
    resize_bicubic,
)
from mprnet.errors import ConfigError


class TestBicubicKernel:
    def test_center_is_one(self):
        assert bicubic_kernel(0.0) == pytest.approx(1.0)

    def test_zero_at_integer_offsets(self):
        assert bicubic_kernel(1.0) == pytest.approx(0.0, abs=1e-15)
        assert bicubic_kernel(2.0) == pytest.approx(0.0, abs=1e-15)

    def test_zero_outside_support(self):
        assert bicubic_kernel(2.5) == 0.0 and bicubic_kernel(-7.0) == 0.0

    def test_partition_of_unity_dense_grid(self):
        phases = np.linspace(0, 1, 1001, endpoint=False)
        for phi in phases:
            taps = bicubic_kernel(phi - np.array([-1.0, 0.0, 1.0, 2.0]))
            assert abs(taps.sum() - 1.0) < 1e-12


@settings(max_examples=50, deadline=None)
@given(phi=st.floats(0.0, 1.0, exclude_max=True))
def test_partition_of_unity_property(phi):
    taps = bicubic_kernel(phi - np.array([-1.0, 0.0, 1.0, 2.0]))
    assert abs(taps.sum() - 1.0) < 1e-12


class TestResize:
    def test_identity_resize(self):
        rng = np.random.default_rng(0)
        img = rng.random((13, 17, 3))
        out = resize_bicubic(img, 13, 17)
        np.testing.assert_allclose(out, img, atol=1e-6)

    def test_constant_stays_constant(self):
        img = np.full((24, 18, 3), 0.37)
        for shape in [(8, 6), (30, 25), (24, 18)]:
            out = resize_bicubic(img, *shape)
            np.testing.assert_allclose(out, 0.37, atol=1e-12)

    def test_downscale_preserves_linear_ramp_interior(self):
        w = 90
        img = np.tile(np.linspace(0.1, 0.9, w)[None, :, None], (45, 1, 3))
        out = resize_bicubic(img, 15, w // 3, antialias=True)
        # LR sample x sits at HR coordinate (x + 0.5) * 3 - 0.5
        hr_x = (np.arange(w // 3) + 0.5) * 3 - 0.5
        want = 0.1 + (0.9 - 0.1) * hr_x / (w - 1)
        np.testing.assert_allclose(out[7, 3:-3, 0], want[3:-3], atol=1e-4)

    def test_positive_extents_required(self):
        with pytest.raises(ConfigError):
            resize_bicubic(np.zeros((4, 4, 3)), 0, 4)

    def test_grayscale_arrays_supported(self):
        img = np.random.default_rng(1).random((12, 12))
        assert resize_bicubic(img, 6, 6).shape == (6, 6)


class TestGaussianKernel:
    def test_normalized(self):
        assert abs(gaussian_kernel2d(7, 1.6).sum() - 1.0) < 1e-12

    def test_symmetries(self):
        k = gaussian_kernel2d(7, 1.6)
        np.testing.assert_array_equal(k, k.T)
        np.testing.assert_array_equal(k, k[::-1, :])
        np.testing.assert_array_equal(k, k[:, ::-1])

    def test_center_corner_ratio_closed_form(self):
        k = gaussian_kernel2d(7, 1.6)
        want = np.exp(18.0 / (2.0 * 1.6**2))
        assert k[3, 3] / k[0, 0] == pytest.approx(want, rel=1e-12)

    def test_even_size_rejected(self):
        with pytest.raises(ConfigError):
            gaussian_kernel2d(6, 1.6)


class TestDegrade:
    def test_bi_constant_image(self):
        img = np.full((30, 30, 3), 0.6)
        out = degrade(img, DegradationSpec(model=BI, scale=3))
        assert out.shape == (10, 10, 3)
        np.testing.assert_allclose(out, 0.6, atol=1e-12)

    def test_output_extents_follow_cropped_input(self):
        img = np.zeros((31, 44, 3))
        out = degrade(img, DegradationSpec(model=BI, scale=3))
        assert out.shape == (10, 14, 3)  # crop to 30x42 then /3

    def test_dn_zero_noise_equals_bi_bitexact(self):
        rng = np.random.default_rng(2)
        img = rng.random((27, 27, 3))
        bi = degrade(img, DegradationSpec(model=BI, scale=3))
        dn = degrade(img, DegradationSpec(model=DN, scale=3, noise_level=0.0))
        assert np.array_equal(bi, dn)

    def test_dn_noise_sigma_statistical(self):
        img = np.full((512, 512, 3), 0.5)
        out = degrade(img, DegradationSpec(model=DN, scale=3, seed=7))
        sigma = float((out - 0.5).std())
        assert abs(sigma - 30.0 / 255.0) <= 0.02 * (30.0 / 255.0)

    def test_deterministic_given_spec(self):
        rng = np.random.default_rng(3)
        img = rng.random((36, 36, 3))
        spec = DegradationSpec(model=DN, scale=3, seed=9)
        assert np.array_equal(degrade(img, spec), degrade(img, spec))

    def test_bd_commutes_with_horizontal_flip(self):
        rng = np.random.default_rng(4)
        img = rng.random((48, 48, 3))
        spec = DegradationSpec(model=BD, scale=3)
        a = degrade(img[:, ::-1], spec)
        b = degrade(img, spec)[:, ::-1]
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_bd_dn_restricted_to_scale3(self):
        for model in (BD, DN):
            with pytest.raises(ConfigError, match="scale 3"):
                DegradationSpec(model=model, scale=2).validate()

    def test_blur_matches_direct_stencil(self):
        rng = np.random.default_rng(5)
        img = rng.random((9, 9))
        k = gaussian_kernel2d(3, 0.8)
        out = blur2d(img, k)
        # interior pixel, direct weighted sum
        want = sum(
            k[i, j] * img[4 + i - 1, 4 + j - 1] for i in range(3) for j in range(3)
        )
        assert out[4, 4] == pytest.approx(want, rel=1e-12)

    def test_mod_crop_is_centered(self):
        img = np.arange(7 * 8 * 3, dtype=np.float64).reshape(7, 8, 3)
        out = mod_crop(img, 3)
        assert out.shape == (6, 6, 3)
        np.testing.assert_array_equal(out, img[0:6, 1:7])
