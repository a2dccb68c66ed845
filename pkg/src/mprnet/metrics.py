"""PSNR and SSIM on the luma channel, plus directory-level evaluation.

PSNR works in [0, 1] units (the ratio is scale-free) and caps at 100 dB
for identical images. SSIM is the classic windowed form: 11x11 Gaussian
window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.0, and
valid-region windowing (no padding), averaged over the window centers
that fit entirely inside the image.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .imaging import load_image, rgb_to_y, shave

PSNR_CAP_DB = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: shapes {a.shape} and {b.shape} differ")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _filter_valid(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    k = window.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(img, (k, k))
    return np.einsum("hwij,ij->hw", win, window)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ssim: shapes {a.shape} and {b.shape} differ")
    if a.ndim != 2:
        raise ShapeError(f"ssim expects single-channel (H,W) images, got {a.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(f"ssim needs extents >= {SSIM_WINDOW}, got {a.shape}")

    w = _gaussian_window()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a**2
    var_b = _filter_valid(b * b, w) - mu_b**2
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class EvalRow:
    name: str
    psnr: float
    ssim: float


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    border: int = 0
    missing: list[str] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.rows])) if self.rows else float("nan")

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows])) if self.rows else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("name,psnr,ssim\n")
        for r in self.rows:
            buf.write(f"{r.name},{r.psnr:.6f},{r.ssim:.6f}\n")
        buf.write(f"MEAN,{self.mean_psnr:.6f},{self.mean_ssim:.6f}\n")
        return buf.getvalue()

    def format_table(self) -> str:
        width = max([len(r.name) for r in self.rows] + [len("MEAN"), len("image")])
        lines = [f"{'image':<{width}}  {'psnr':>8}  {'ssim':>7}"]
        for r in self.rows:
            lines.append(f"{r.name:<{width}}  {r.psnr:>8.2f}  {r.ssim:>7.4f}")
        lines.append(f"{'MEAN':<{width}}  {self.mean_psnr:>8.2f}  {self.mean_ssim:>7.4f}")
        for name in self.missing:
            lines.append(f"missing pair: {name} (excluded from means)")
        return "\n".join(lines)


def compare_pair(sr: np.ndarray, hr: np.ndarray, border: int) -> tuple[float, float]:
    """Y-channel PSNR/SSIM of one RGB pair after shaving the border."""
    ya = shave(rgb_to_y(sr), border)
    yb = shave(rgb_to_y(hr), border)
    return psnr(ya, yb), ssim(ya, yb)


def evaluate(sr_dir, hr_dir, scale: int, border: int | None = None) -> EvalReport:
    """Evaluate paired PNGs by filename. Unpaired names are listed in the
    report and excluded from the means. Border defaults to the scale."""
    sr_dir, hr_dir = Path(sr_dir), Path(hr_dir)
    border = scale if border is None else border
    sr_names = {p.name for p in sr_dir.glob("*.png")}
    hr_names = {p.name for p in hr_dir.glob("*.png")}
    report = EvalReport(border=border, missing=sorted(sr_names ^ hr_names))
    for name in sorted(sr_names & hr_names):
        sr = load_image(sr_dir / name)
        hr = load_image(hr_dir / name)
        p, s = compare_pair(sr, hr, border)
        report.rows.append(EvalRow(name, p, s))
    return report
