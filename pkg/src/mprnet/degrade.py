"""Low-resolution image synthesis: bicubic resampling, Gaussian blur, and
the three degradation pipelines.

The resampler follows the imresize convention the SR benchmarks assume:
Keys cubic with a = -0.5, kernel stretched by the scale ratio on downscale
(antialias), per-row weight normalization, clamp-to-edge indexing. Without
the antialias stretch the published bicubic baselines are unreachable.

Pipelines (HR is first center-cropped to a multiple of the scale):

    blur+down  Gaussian 7x7 sigma 1.6 (clamp-to-edge), then bicubic /3
    plain      bicubic downscale by 2, 3 or 4
    down+noise bicubic /3, then additive Gaussian noise, sigma 30/255,
               clipped to [0, 1]
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .imaging import load_image, save_image

BI, BD, DN = "bi", "bd", "dn"

_KEYS_A = -0.5


def bicubic_kernel(t) -> np.ndarray:
    """Keys cubic interpolation kernel with a = -0.5, support |t| < 2."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    out = np.zeros_like(t)
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    out[near] = (_KEYS_A + 2.0) * t[near] ** 3 - (_KEYS_A + 3.0) * t[near] ** 2 + 1.0
    out[far] = _KEYS_A * (t[far] ** 3 - 5.0 * t[far] ** 2 + 8.0 * t[far] - 4.0)
    return out


def _contributions(in_len: int, out_len: int, antialias: bool):
    """Sample positions and normalized weights for one resized axis."""
    scale = out_len / in_len
    if antialias and scale < 1.0:
        width = 4.0 / scale

        def kernel(t):
            return scale * bicubic_kernel(scale * t)

    else:
        width = 4.0
        kernel = bicubic_kernel

    x = np.arange(out_len, dtype=np.float64)
    u = (x + 0.5) / scale - 0.5
    left = np.floor(u - width / 2.0)
    taps = int(np.ceil(width)) + 2
    idx = left[:, None] + np.arange(taps)[None, :]
    weights = kernel(u[:, None] - idx)
    weights /= weights.sum(axis=1, keepdims=True)
    idx = np.clip(idx, 0, in_len - 1).astype(np.intp)  # clamp-to-edge
    return idx, weights


def _resize_axis0(img: np.ndarray, out_len: int, antialias: bool) -> np.ndarray:
    idx, w = _contributions(img.shape[0], out_len, antialias)
    gathered = img[idx]  # (out, taps, ...)
    return np.einsum("ot...,ot->o...", gathered, w)


def resize_bicubic(img: np.ndarray, out_h: int, out_w: int, antialias: bool = True) -> np.ndarray:
    """Separable bicubic resize of an (H, W) or (H, W, C) image in [0, 1]."""
    if out_h < 1 or out_w < 1:
        raise ConfigError(f"target extents must be positive, got {(out_h, out_w)}")
    arr = np.asarray(img, dtype=np.float64)
    arr = _resize_axis0(arr, out_h, antialias)
    arr = _resize_axis0(arr.swapaxes(0, 1), out_w, antialias).swapaxes(0, 1)
    return np.clip(arr, 0.0, 1.0)


def gaussian_kernel2d(k: int, sigma: float) -> np.ndarray:
    """k x k samples of a centered isotropic Gaussian, normalized to sum 1."""
    if k % 2 != 1:
        raise ConfigError(f"blur kernel size must be odd, got {k}")
    if sigma <= 0:
        raise ConfigError(f"blur sigma must be positive, got {sigma}")
    r = np.arange(k, dtype=np.float64) - (k - 1) / 2.0
    g1 = np.exp(-(r**2) / (2.0 * sigma * sigma))
    g2 = np.outer(g1, g1)
    return g2 / g2.sum()


def blur2d(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2-D correlation with clamp-to-edge padding, per channel."""
    arr = np.asarray(img, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    k = kernel.shape[0]
    pad = k // 2
    padded = np.pad(arr, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    out = np.einsum("hwcij,ij->hwc", win, kernel)
    return out[:, :, 0] if squeeze else out


@dataclass
class DegradationSpec:
    """Which pipeline to run and with what knobs."""

    model: str = BI
    scale: int = 3
    blur_sigma: float = 1.6
    blur_kernel: int = 7
    noise_level: float = 30.0  # on the 0..255 scale
    seed: int = 0

    def validate(self) -> "DegradationSpec":
        if self.model not in (BI, BD, DN):
            raise ConfigError(f"degradation model must be bi/bd/dn, got {self.model!r}")
        if self.model == BI and self.scale not in (2, 3, 4):
            raise ConfigError(f"bicubic degradation supports scales 2/3/4, got {self.scale}")
        if self.model in (BD, DN) and self.scale != 3:
            raise ConfigError(f"{self.model} degradation is defined for scale 3 only, got {self.scale}")
        if self.noise_level < 0:
            raise ConfigError(f"noise level must be >= 0, got {self.noise_level}")
        if self.blur_kernel % 2 != 1:
            raise ConfigError(f"blur kernel must be odd, got {self.blur_kernel}")
        return self


def mod_crop(img: np.ndarray, scale: int) -> np.ndarray:
    """Center-crop so both extents divide by the scale."""
    h, w = img.shape[:2]
    nh, nw = h - h % scale, w - w % scale
    top, left = (h - nh) // 2, (w - nw) // 2
    return img[top : top + nh, left : left + nw]


def degrade(img_hr: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    """HR image in [0, 1] -> LR image per the requested pipeline."""
    spec.validate()
    hr = mod_crop(np.asarray(img_hr, dtype=np.float64), spec.scale)
    h, w = hr.shape[:2]
    oh, ow = h // spec.scale, w // spec.scale
    if spec.model == BI:
        return resize_bicubic(hr, oh, ow, antialias=True)
    if spec.model == BD:
        blurred = blur2d(hr, gaussian_kernel2d(spec.blur_kernel, spec.blur_sigma))
        return resize_bicubic(blurred, oh, ow, antialias=True)
    lr = resize_bicubic(hr, oh, ow, antialias=True)
    if spec.noise_level > 0:
        rng = np.random.default_rng(spec.seed)
        lr = lr + rng.standard_normal(lr.shape) * (spec.noise_level / 255.0)
    return np.clip(lr, 0.0, 1.0)


def subdir_name(spec: DegradationSpec) -> str:
    if spec.model == BI:
        return f"X{spec.scale}"
    return spec.model.upper()


def degrade_directory(hr_dir, out_dir, spec: DegradationSpec) -> list[str]:
    """Degrade every PNG under hr_dir into out_dir/<X2|X3|X4|BD|DN>/,
    keeping filenames paired. Noise seeds are derived per file from the
    spec seed and the filename, so realizations are independent across
    images yet reproducible. Returns the processed names."""
    hr_dir, out_dir = Path(hr_dir), Path(out_dir)
    target = out_dir / subdir_name(spec)
    target.mkdir(parents=True, exist_ok=True)
    done = []
    for path in sorted(hr_dir.glob("*.png")):
        per_file = replace(spec, seed=(spec.seed ^ zlib.crc32(path.name.encode())) & 0xFFFFFFFF)
        lr = degrade(load_image(path), per_file)
        save_image(lr, target / path.name)
        done.append(path.name)
    return done
