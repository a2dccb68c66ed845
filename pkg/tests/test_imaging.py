"""PNG round trips, luma conversion, and border shaving."""

import numpy as np
import pytest
from PIL import Image as PILImage

from mprnet.errors import ShapeError, UnsupportedImageError
from mprnet.imaging import (
    image_to_tensor,
    load_image,
    rgb_to_y,
    save_image,
    shave,
    tensor_to_image,
)


class TestPngIO:
    def test_single_red_pixel_roundtrip(self, tmp_path):
        path = tmp_path / "red.png"
        PILImage.fromarray(np.array([[[255, 0, 0]]], dtype=np.uint8)).save(path)
        img = load_image(path)
        assert img.shape == (1, 1, 3)
        np.testing.assert_allclose(img[0, 0], [1.0, 0.0, 0.0])
        save_image(img, tmp_path / "red2.png")
        np.testing.assert_array_equal(load_image(tmp_path / "red2.png"), img)

    def test_save_load_idempotent_at_8bit(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((9, 7, 3))
        save_image(img, tmp_path / "a.png")
        once = load_image(tmp_path / "a.png")
        save_image(once, tmp_path / "b.png")
        np.testing.assert_array_equal(load_image(tmp_path / "b.png"), once)

    def test_half_rounds_up_to_128(self, tmp_path):
        save_image(np.full((1, 1, 3), 0.5), tmp_path / "h.png")
        with PILImage.open(tmp_path / "h.png") as im:
            assert np.asarray(im)[0, 0].tolist() == [128, 128, 128]

    def test_non_png_rejected(self, tmp_path):
        path = tmp_path / "x.jpg"
        PILImage.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path, format="JPEG")
        with pytest.raises(UnsupportedImageError, match="PNG"):
            load_image(path)

    def test_palette_png_rejected(self, tmp_path):
        path = tmp_path / "p.png"
        PILImage.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).convert("P").save(path)
        with pytest.raises(UnsupportedImageError):
            load_image(path)

    def test_16bit_png_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        PILImage.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(path)
        with pytest.raises(UnsupportedImageError):
            load_image(path)

    def test_garbage_file_rejected(self, tmp_path):
        path = tmp_path / "g.png"
        path.write_bytes(b"not an image at all")
        with pytest.raises(UnsupportedImageError):
            load_image(path)


class TestLuma:
    def test_black_maps_to_16(self):
        y = rgb_to_y(np.zeros((2, 2, 3)))
        np.testing.assert_allclose(y, 16.0 / 255.0, rtol=1e-12)

    def test_white_maps_to_235(self):
        y = rgb_to_y(np.ones((2, 2, 3)))
        np.testing.assert_allclose(y, 235.0 / 255.0, rtol=1e-9)

    def test_green_brighter_than_blue(self):
        g = rgb_to_y(np.array([[[0.0, 1.0, 0.0]]]))
        b = rgb_to_y(np.array([[[0.0, 0.0, 1.0]]]))
        assert g[0, 0] > b[0, 0]

    def test_affine_in_inputs(self):
        rng = np.random.default_rng(1)
        x, y = rng.random((5, 4, 3)), rng.random((5, 4, 3))
        for alpha in (0.0, 0.3, 0.75, 1.0):
            mixed = rgb_to_y(alpha * x + (1 - alpha) * y)
            want = alpha * rgb_to_y(x) + (1 - alpha) * rgb_to_y(y)
            np.testing.assert_allclose(mixed, want, atol=1e-6)

    def test_wrong_channel_count(self):
        with pytest.raises(ShapeError):
            rgb_to_y(np.zeros((4, 4)))


class TestShave:
    def test_zero_border_is_identity(self):
        img = np.random.default_rng(2).random((6, 8, 3))
        np.testing.assert_array_equal(shave(img, 0), img)

    def test_border_arithmetic(self):
        assert shave(np.zeros((10, 10)), 2).shape == (6, 6)

    def test_composes(self):
        img = np.random.default_rng(3).random((12, 11))
        np.testing.assert_array_equal(shave(shave(img, 1), 1), shave(img, 2))

    def test_overshave_rejected(self):
        with pytest.raises(ShapeError):
            shave(np.zeros((6, 6)), 3)


class TestTensorBridge:
    def test_roundtrip(self):
        rng = np.random.default_rng(4)
        img = rng.random((5, 6, 3))
        t = image_to_tensor(img)
        assert t.shape == (1, 3, 5, 6)
        np.testing.assert_allclose(tensor_to_image(t), img, atol=1e-7)

    def test_output_is_clamped(self):
        from mprnet.tensor import Tensor

        arr = np.array([[[[-0.5, 1.5]]]] * 1, dtype=np.float32).reshape(1, 1, 1, 2)
        arr = np.repeat(arr, 3, axis=1)
        img = tensor_to_image(Tensor(arr))
        assert img.min() == 0.0 and img.max() == 1.0
