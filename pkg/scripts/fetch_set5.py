#!/usr/bin/env python3
"""Download the 5-image Set5 benchmark as PNGs into data/Set5/HR.

Needs ordinary internet access. The evaluation tests pick the directory
up automatically (or point them elsewhere with MPR_SET5_DIR).
"""

import argparse
import io
import sys
import urllib.request
from pathlib import Path

SOURCES = [
    # (name, url) - classic SelfExSR mirror of the benchmark
    (f"{name}.png", f"https://raw.githubusercontent.com/jbhuang0604/SelfExSR/master/data/Set5/image_SRF_2/img_{i:03d}_SRF_2_HR.png")
    for i, name in enumerate(["baby", "bird", "butterfly", "head", "woman"], start=1)
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/Set5/HR")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    from PIL import Image

    failures = 0
    for name, url in SOURCES:
        target = out / name
        if target.exists():
            print(f"{name}: already present")
            continue
        try:
            raw = urllib.request.urlopen(url, timeout=30).read()
            img = Image.open(io.BytesIO(raw)).convert("RGB")
            img.save(target, format="PNG")
            print(f"{name}: {img.size[0]}x{img.size[1]} saved")
        except Exception as e:
            failures += 1
            print(f"{name}: FAILED ({e})", file=sys.stderr)
    if failures:
        sys.exit(1)
    print(f"Set5 ready under {out}")


if __name__ == "__main__":
    main()
