#!/usr/bin/env python3
"""Depth/width calibration grid for the default model.

Prints parameter and multiply-add counts for the x4 model over the
candidate grid and marks the rows inside the target band. The tuple
closest to the parameter target (and inside the band) becomes the
package default recorded in ModelConfig and configs/default_x4.json.
"""

import argparse

from mprnet.complexity import calibration_grid

TARGET_PARAMS = 538_000
TARGET_MACS = 31.3e9


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scale", type=int, default=4)
    ap.add_argument("--band", type=float, default=0.15)
    args = ap.parse_args()

    rows = calibration_grid(scale=args.scale, target_params=TARGET_PARAMS, band=args.band)
    print(f"{'width':>5} {'rcb':>4} {'arb':>4} {'params':>10} {'macs':>9}  in-band")
    best = None
    for r in rows:
        print(f"{r.width:>5} {r.n_rcb:>4} {r.n_arb:>4} {r.params:>10,} {r.macs / 1e9:>8.2f}G  {'yes' if r.in_band else ''}")
        if r.in_band and (best is None or abs(r.params - TARGET_PARAMS) < abs(best.params - TARGET_PARAMS)):
            best = r
    if best is None:
        print("no grid point lands inside the band")
        return
    print(
        f"\nchosen default: width={best.width}, n_rcb={best.n_rcb}, n_arb={best.n_arb} "
        f"({best.params:,} params, {best.macs / 1e9:.2f}G multi-adds; "
        f"targets {TARGET_PARAMS:,} / {TARGET_MACS / 1e9:.1f}G)"
    )


if __name__ == "__main__":
    main()
