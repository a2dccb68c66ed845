"""Image I/O and colorspace utilities for the evaluation protocol.

Images are numpy float64 arrays in [0, 1]: RGB as (H, W, 3), luma as
(H, W). Files are 8-bit RGB PNGs; anything else is rejected rather than
silently converted, because the metrics depend on the exact quantization.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import ShapeError, UnsupportedImageError
from .tensor import Tensor

# ITU-R BT.601 studio swing (the rgb2ycbcr convention): 8-bit luma spans
# 16..235 for inputs in [0, 1]
_Y_COEFF = np.array([65.481, 128.553, 24.966])
_Y_OFFSET = 16.0


def load_image(path) -> np.ndarray:
    """Read an 8-bit RGB PNG into a float64 (H, W, 3) array in [0, 1]."""
    try:
        with PILImage.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedImageError(f"{path}: only PNG is supported, got {im.format}")
            if im.mode != "RGB":
                raise UnsupportedImageError(f"{path}: only 8-bit RGB is supported, got mode {im.mode}")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError:
        raise UnsupportedImageError(f"{path}: not a readable image file") from None
    return arr.astype(np.float64) / 255.0


def save_image(img: np.ndarray, path) -> None:
    """Write an RGB or luma image, rounding half-up to 8-bit levels."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None].repeat(3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"save_image expects (H,W,3) or (H,W), got {arr.shape}")
    levels = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    PILImage.fromarray(levels, mode="RGB").save(path, format="PNG")


def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """Luma on the 8-bit studio scale, stored back in [0, 1] as Y/255."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"rgb_to_y expects (H,W,3), got {arr.shape}")
    y = _Y_OFFSET + arr @ _Y_COEFF
    return y / 255.0


def shave(img: np.ndarray, border: int) -> np.ndarray:
    """Strip ``border`` pixels from every side."""
    if border == 0:
        return img
    h, w = img.shape[:2]
    if border < 0 or 2 * border >= min(h, w):
        raise ShapeError(f"cannot shave border {border} from a {h}x{w} image")
    return img[border : h - border, border : w - border]


def image_to_tensor(img: np.ndarray, dtype=np.float32) -> Tensor:
    """(H, W, 3) in [0, 1] -> network input (1, 3, H, W)."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"expected (H,W,3), got {arr.shape}")
    return Tensor(arr.transpose(2, 0, 1)[None].astype(dtype))


def tensor_to_image(t: Tensor) -> np.ndarray:
    """Network output (1, 3, H, W) -> (H, W, 3) clamped to [0, 1]."""
    if t.shape[0] != 1 or t.shape[1] != 3:
        raise ShapeError(f"expected (1,3,H,W), got {t.shape}")
    return np.clip(t.data[0].transpose(1, 2, 0).astype(np.float64), 0.0, 1.0)
