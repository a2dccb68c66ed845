#!/usr/bin/env python3
"""Reproduce the published Set5 bicubic baselines for the blur-downsample
and downsample-plus-noise pipelines at x3.

For each HR image: center-crop to a multiple of 3, degrade, bicubic-upsample
back, then Y-channel PSNR/SSIM with a 3-pixel shave. Expected means:
BD 28.34 dB / 0.8161, DN 24.14 dB / 0.5445.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from mprnet.degrade import BD, DN, DegradationSpec, degrade, mod_crop, resize_bicubic
from mprnet.imaging import load_image
from mprnet.metrics import compare_pair

EXPECTED = {BD: (28.34, 0.8161), DN: (24.14, 0.5445)}
TOLERANCE = {BD: (0.35, 0.015), DN: (0.50, 0.030)}


def baseline(hr_dir: Path, model: str, seed: int = 0) -> tuple[float, float]:
    psnrs, ssims = [], []
    for path in sorted(hr_dir.glob("*.png")):
        hr = mod_crop(load_image(path), 3)
        lr = degrade(hr, DegradationSpec(model=model, scale=3, seed=seed))
        sr = resize_bicubic(lr, hr.shape[0], hr.shape[1], antialias=False)
        p, s = compare_pair(sr, hr, border=3)
        psnrs.append(p)
        ssims.append(s)
    return float(np.mean(psnrs)), float(np.mean(ssims))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--set5", default=os.environ.get("MPR_SET5_DIR", "data/Set5/HR"))
    args = ap.parse_args()
    hr_dir = Path(args.set5)
    if not hr_dir.is_dir() or not list(hr_dir.glob("*.png")):
        print(f"no HR PNGs under {hr_dir}; run scripts/fetch_set5.py first", file=sys.stderr)
        sys.exit(2)

    ok = True
    for model in (BD, DN):
        p, s = baseline(hr_dir, model)
        ep, es = EXPECTED[model]
        tp, ts = TOLERANCE[model]
        good = abs(p - ep) <= tp and abs(s - es) <= ts
        ok &= good
        print(
            f"{model.upper()}: PSNR {p:.2f} (expected {ep} +- {tp}), "
            f"SSIM {s:.4f} (expected {es} +- {ts}) -> {'PASS' if good else 'FAIL'}"
        )
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
