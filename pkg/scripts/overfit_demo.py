#!/usr/bin/env python3
"""Desk-scale learning-capacity demo: overfit five small images at x2 and
report the trained PSNR against the bicubic-upsample baseline.

Uses the same deterministic test-card images as the acceptance suite, so
the run finishes in a couple of minutes on a laptop CPU.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from helpers import synth_card  # noqa: E402

from mprnet.degrade import DegradationSpec, degrade, mod_crop, resize_bicubic
from mprnet.imaging import image_to_tensor, tensor_to_image
from mprnet.metrics import compare_pair
from mprnet.model import Model, ModelConfig
from mprnet.training import TrainConfig, fit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--width", type=int, default=16)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    scale = 2
    hrs = [synth_card(s) for s in range(5)]
    pairs = [(mod_crop(h, scale), degrade(h, DegradationSpec(model="bi", scale=scale))) for h in hrs]

    def model_psnr(model):
        vals = [
            compare_pair(tensor_to_image(model.forward(image_to_tensor(lr))), hr, scale)[0]
            for hr, lr in pairs
        ]
        return float(np.mean(vals))

    base = float(
        np.mean(
            [
                compare_pair(resize_bicubic(lr, hr.shape[0], hr.shape[1], antialias=False), hr, scale)[0]
                for hr, lr in pairs
            ]
        )
    )
    print(f"bicubic baseline: {base:.2f} dB")

    cfg = ModelConfig(width=args.width, n_rcb=1, n_arb=1, scale=scale)
    tcfg = TrainConfig(patch_lr=24, batch=8, total_steps=args.steps, seed=0, checkpoint_every=0)
    model = Model.build(cfg, seed=0)
    print(f"model: {model.store.total_elements():,} parameters")

    t0 = time.time()
    result = fit(model, pairs, tcfg, out_dir=args.out)
    trained = model_psnr(result.model)
    print(f"{args.steps} steps in {time.time() - t0:.0f}s; final loss {result.losses[-1][1]:.4f}")
    print(f"trained PSNR {trained:.2f} dB ({trained - base:+.2f} vs bicubic)")


if __name__ == "__main__":
    main()
