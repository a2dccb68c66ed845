"""Command-line surface: degrade, train, sr, eval, count, ablate.

Exit codes: 0 success, 1 usage error (bad flags or invalid parameter
combinations), 2 data error (missing/corrupt files). All diagnostics go
to stderr. MPR_THREADS caps BLAS parallelism when set (0 means auto).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import complexity
from .degrade import DegradationSpec, degrade_directory, subdir_name
from .errors import ConfigError, MprError, UsageError
from .imaging import image_to_tensor, load_image, save_image, tensor_to_image
from .metrics import evaluate
from .model import ConnectionToggles, Model, ModelConfig, PathToggles
from .tensor import GradientTape, Tensor, backward, l1_loss
from .training import TrainConfig, fit
from .weights_io import load_weights, save_weights

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        raise _ArgumentError(message)


def apply_thread_cap() -> None:
    raw = os.environ.get("MPR_THREADS", "")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MPR_THREADS must be an integer, got {raw!r}")
    if n <= 0:
        return  # auto
    try:
        from threadpoolctl import threadpool_limits  # type: ignore

        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def load_config_file(path) -> tuple[ModelConfig, TrainConfig, dict]:
    """Read a JSON config: either a flat model config, or an object with
    "model" / "train" / "data" sections."""
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise MprError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}")
    if "model" in raw or "train" in raw:
        model_cfg = ModelConfig.from_dict(raw.get("model", {}))
        train_cfg = TrainConfig.from_dict(raw.get("train", {}))
        return model_cfg, train_cfg, raw.get("data", {})
    return ModelConfig.from_dict(raw), TrainConfig(), {}


def _build_parser() -> _Parser:
    p = _Parser(prog="mprnet", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("degrade", help="synthesize LR images from an HR directory")
    d.add_argument("--model", required=True, choices=["bi", "bd", "dn"])
    d.add_argument("--scale", required=True, type=int)
    d.add_argument("--in", dest="in_dir", required=True)
    d.add_argument("--out", dest="out_dir", required=True)
    d.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="train from degraded pairs on disk")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", dest="out_dir", required=True)
    t.add_argument("--resume", default=None)

    s = sub.add_parser("sr", help="super-resolve a directory of PNGs")
    s.add_argument("--weights", required=True)
    s.add_argument("--in", dest="in_dir", required=True)
    s.add_argument("--out", dest="out_dir", required=True)

    e = sub.add_parser("eval", help="Y-channel PSNR/SSIM of paired directories")
    e.add_argument("--sr", dest="sr_dir", required=True)
    e.add_argument("--hr", dest="hr_dir", required=True)
    e.add_argument("--scale", required=True, type=int)
    e.add_argument("--border", type=int, default=None)
    e.add_argument("--csv", default=None)

    c = sub.add_parser("count", help="parameter and multiply-accumulate report")
    c.add_argument("--config", required=True)

    a = sub.add_parser("ablate", help="build ablation rows and run their invariants")
    a.add_argument("--suite", required=True, choices=["arb", "connections"])
    a.add_argument("--config", required=True)
    return p


def _cmd_degrade(args) -> int:
    spec = DegradationSpec(model=args.model, scale=args.scale, seed=args.seed).validate()
    if not Path(args.in_dir).is_dir():
        raise MprError(f"input directory not found: {args.in_dir}")
    names = degrade_directory(args.in_dir, args.out_dir, spec)
    if not names:
        raise MprError(f"no PNG files in {args.in_dir}")
    print(f"degraded {len(names)} images into {Path(args.out_dir) / subdir_name(spec)}")
    return EXIT_OK


def _cmd_train(args) -> int:
    model_cfg, train_cfg, data_cfg = load_config_file(args.config)
    data = Path(args.data)
    hr_dir = data / "HR"
    lr_dir = data / data_cfg.get("lr_subdir", f"X{model_cfg.scale}")
    if not hr_dir.is_dir() or not lr_dir.is_dir():
        raise MprError(f"expected {hr_dir} and {lr_dir} to exist")
    pairs = []
    for hr_path in sorted(hr_dir.glob("*.png")):
        lr_path = lr_dir / hr_path.name
        if not lr_path.exists():
            print(f"warning: {hr_path.name} has no LR counterpart; skipped", file=sys.stderr)
            continue
        pairs.append((load_image(hr_path), load_image(lr_path)))
    if not pairs:
        raise MprError(f"no usable training pairs under {data}")

    model = Model.build(model_cfg, seed=train_cfg.seed)
    result = fit(model, pairs, train_cfg, out_dir=args.out_dir, resume_from=args.resume)
    save_weights(result.model.store, result.model.cfg, Path(args.out_dir) / "weights.mprw")
    last = result.losses[-1][1] if result.losses else float("nan")
    print(f"trained to step {result.final_step}; final loss {last:.6f}")
    return EXIT_OK


def _cmd_sr(args) -> int:
    store, cfg = load_weights(args.weights)
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    if not in_dir.is_dir():
        raise MprError(f"input directory not found: {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    model = Model(cfg=cfg, store=store)
    count = 0
    for path in sorted(in_dir.glob("*.png")):
        x = image_to_tensor(load_image(path))
        y = model.forward(x)
        save_image(tensor_to_image(y), out_dir / path.name)
        count += 1
    if count == 0:
        raise MprError(f"no PNG files in {in_dir}")
    print(f"super-resolved {count} images at x{cfg.scale} into {out_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    for d in (args.sr_dir, args.hr_dir):
        if not Path(d).is_dir():
            raise MprError(f"directory not found: {d}")
    report = evaluate(args.sr_dir, args.hr_dir, args.scale, args.border)
    if not report.rows:
        raise MprError("no paired images to evaluate")
    print(report.format_table())
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    return EXIT_OK


def _cmd_count(args) -> int:
    cfg, _, _ = load_config_file(args.config)
    report = complexity.complexity_report(cfg)
    print(report.format_table())
    print(f"params: {report.params:,}  multi-adds at 720p: {report.macs / 1e9:.2f}G")
    return EXIT_OK


def _ablation_rows(suite: str, base: ModelConfig) -> list[tuple[str, ModelConfig]]:
    rows = []
    if suite == "arb":
        combos = [
            ("ARB_B", PathToggles(True, False, False)),
            ("ARB_BA", PathToggles(True, True, False)),
            ("ARB_R", PathToggles(True, False, True)),
            ("ARB", PathToggles(True, True, True)),
        ]
        for name, paths in combos:
            rows.append((name, replace(base, paths=paths)))
    else:
        for lrc in (False, True):
            for grc in (False, True):
                for lrsc in (False, True):
                    name = "+".join(n for n, on in (("LRC", lrc), ("GRC", grc), ("LRSC", lrsc)) if on) or "none"
                    rows.append((name, replace(base, connections=ConnectionToggles(lrc, grc, lrsc))))
    return rows


def run_ablation_row(cfg: ModelConfig, seed: int = 0) -> int:
    """Build the row, run one forward/backward on a small input, check the
    shape contract and that every parameter receives gradient. Returns the
    parameter count."""
    model = Model.build(cfg, seed=seed)
    rng = np.random.default_rng(seed)
    x = Tensor(rng.random((1, 3, 10, 9), dtype=np.float32))
    t = Tensor(rng.random((1, 3, 10 * cfg.scale, 9 * cfg.scale), dtype=np.float32))
    model.store.zero_grad()
    with GradientTape() as tape:
        y = model.forward(x)
        loss = l1_loss(y, t)
    if y.shape != (1, 3, 10 * cfg.scale, 9 * cfg.scale):
        raise MprError(f"ablation row produced wrong output shape {y.shape}")
    backward(loss, tape)
    flat = [np.abs(p.grad).max() for _, p in model.store.items()]
    if not all(g > 0 for g in flat):
        raise MprError("ablation row has a parameter without gradient flow")
    n = model.store.total_elements()
    if n != complexity.count_params(cfg):
        raise MprError("parameter count disagrees with the built store")
    return n


def _cmd_ablate(args) -> int:
    base, _, _ = load_config_file(args.config)
    rows = _ablation_rows(args.suite, base)
    width = max(len(name) for name, _ in rows)
    print(f"{'row':<{width}}  {'params':>12}  invariants")
    for name, cfg in rows:
        n = run_ablation_row(cfg)
        print(f"{name:<{width}}  {n:>12,}  ok")
    return EXIT_OK


_COMMANDS = {
    "degrade": _cmd_degrade,
    "train": _cmd_train,
    "sr": _cmd_sr,
    "eval": _cmd_eval,
    "count": _cmd_count,
    "ablate": _cmd_ablate,
}


def run(argv) -> int:
    """Parse and execute one command; returns the process exit code."""
    parser = _build_parser()
    try:
        apply_thread_cap()
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _ArgumentError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (MprError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
