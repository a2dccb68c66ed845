"""Patch-based L1 training.

Every random decision of step t comes from a generator derived from
(seed, t), never from a free-running stream, so an interrupted run resumed
from a checkpoint replays the exact same batches and reproduces the loss
curve bit for bit.

Checkpoint files are a weight file followed by an optimizer section using
the same tensor framing (paths ``adam.m.<param>`` / ``adam.v.<param>``), a
trailer (step as u64, length-prefixed RNG state, which is the 8-byte
training seed), and a CRC32 over the appended section.
"""

from __future__ import annotations

import struct
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorruptFileError, ShapeError, TrainingError
from .model import Model, ModelConfig, WeightStore, mprnet_forward
from .tensor import GradientTape, Tensor, backward, l1_loss
from .weights_io import _Reader, _read_tensor_frame, _tensor_frame, parse_weights, weights_to_bytes


@dataclass
class TrainConfig:
    """Desk-scale defaults; the benchmark-faithful values are batch 64 and
    halve_every 400_000."""

    patch_lr: int = 64
    batch: int = 16
    lr0: float = 1e-3
    halve_every: int = 2_000
    total_steps: int = 2_000
    seed: int = 0
    checkpoint_every: int = 500
    loss: str = "l1"

    def validate(self) -> "TrainConfig":
        if self.patch_lr < 1 or self.batch < 1 or self.total_steps < 0:
            raise ConfigError("patch_lr and batch must be positive, total_steps >= 0")
        if self.halve_every < 1:
            raise ConfigError(f"halve_every must be >= 1, got {self.halve_every}")
        if self.loss != "l1":
            raise ConfigError(f"only the l1 loss is supported, got {self.loss!r}")
        return self

    def to_dict(self) -> dict:
        return {
            "patch_lr": self.patch_lr,
            "batch": self.batch,
            "lr0": self.lr0,
            "halve_every": self.halve_every,
            "total_steps": self.total_steps,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
            "loss": self.loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d).validate()


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Piecewise-constant schedule: halve the base rate every interval."""
    if step < 0:
        raise ConfigError(f"step must be >= 0, got {step}")
    return cfg.lr0 * 0.5 ** (step // cfg.halve_every)


def step_rng(seed: int, step: int) -> np.random.Generator:
    """The generator owning every random draw of one training step."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(step,)))


def sample_patch_pair(
    hr: np.ndarray, lr: np.ndarray, scale: int, patch_lr: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Random LR patch and the exactly corresponding HR patch.

    The top-left corner is drawn in LR coordinates and mapped up by the
    scale, so the pair stays aligned without any resampling.
    """
    lh, lw = lr.shape[:2]
    if lh < patch_lr or lw < patch_lr:
        raise ShapeError(f"LR image {lh}x{lw} is smaller than the {patch_lr} patch")
    y = int(rng.integers(0, lh - patch_lr + 1))
    x = int(rng.integers(0, lw - patch_lr + 1))
    s = scale
    lr_patch = lr[y : y + patch_lr, x : x + patch_lr]
    hr_patch = hr[s * y : s * (y + patch_lr), s * x : s * (x + patch_lr)]
    return lr_patch, hr_patch


def augment_pair(
    lr: np.ndarray, hr: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One coin for a horizontal flip, one for a 90-degree rotation,
    applied identically to both patches."""
    if rng.integers(2):
        lr = lr[:, ::-1]
        hr = hr[:, ::-1]
    if rng.integers(2):
        lr = np.rot90(lr)
        hr = np.rot90(hr)
    return np.ascontiguousarray(lr), np.ascontiguousarray(hr)


@dataclass
class OptimizerState:
    """Adam moments, one buffer pair per parameter path."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_store(cls, store: WeightStore) -> "OptimizerState":
        state = cls()
        for path, t in store.items():
            state.m[path] = np.zeros_like(t.data)
            state.v[path] = np.zeros_like(t.data)
        return state


def adam_step(
    params: WeightStore, grads: dict[str, np.ndarray], state: OptimizerState, lr: float
) -> None:
    """Bias-corrected Adam update, in place, in fixed path order."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for path, p in params.items():
        g = grads[path]
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in {path!r}; step aborted")
        m = state.m[path]
        v = state.v[path]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)


# ---------------------------------------------------------------------------
# checkpoints


def checkpoint_to_bytes(
    store: WeightStore, cfg: ModelConfig, state: OptimizerState, step: int, seed: int
) -> bytes:
    out = bytearray(weights_to_bytes(store, cfg))
    section = bytearray()
    for path in store.paths():
        section += _tensor_frame(f"adam.m.{path}", state.m[path])
        section += _tensor_frame(f"adam.v.{path}", state.v[path])
    rng_state = struct.pack("<Q", seed)
    section += struct.pack("<Q", step)
    section += struct.pack("<I", len(rng_state)) + rng_state
    section += struct.pack("<I", zlib.crc32(bytes(section)))
    return bytes(out + section)


def save_checkpoint(path, store: WeightStore, cfg: ModelConfig, state: OptimizerState, step: int, seed: int) -> None:
    with open(path, "wb") as f:
        f.write(checkpoint_to_bytes(store, cfg, state, step, seed))


def load_checkpoint(path) -> tuple[WeightStore, ModelConfig, OptimizerState, int, int]:
    with open(path, "rb") as f:
        buf = f.read()
    store, cfg, off = parse_weights(buf)
    r = _Reader(buf, off)
    state = OptimizerState()
    for p in store.paths():
        for kind, target in (("m", state.m), ("v", state.v)):
            name, data = _read_tensor_frame(r)
            if name != f"adam.{kind}.{p}":
                raise CorruptFileError(f"optimizer section out of order: got {name!r}")
            if data.shape != store[p].shape:
                raise CorruptFileError(f"optimizer buffer {name!r} shape {data.shape} != {store[p].shape}")
            target[p] = data.copy()
    step = struct.unpack("<Q", r.take(8))[0]
    rng_state = r.take(r.u32())
    seed = struct.unpack("<Q", rng_state)[0]
    stored_crc = r.u32()
    if stored_crc != zlib.crc32(buf[off : r.off - 4]):
        raise CorruptFileError("checkpoint optimizer section failed CRC")
    if r.off != len(buf):
        raise CorruptFileError(f"{len(buf) - r.off} trailing bytes after checkpoint")
    state.step = step
    return store, cfg, state, step, seed


# ---------------------------------------------------------------------------
# the loop


@dataclass
class FitResult:
    model: Model
    losses: list[tuple[int, float]]
    state: OptimizerState
    start_step: int
    final_step: int


def _build_pool(pairs, patch_lr: int) -> list[tuple[np.ndarray, np.ndarray]]:
    pool = []
    for i, (hr, lr) in enumerate(pairs):
        if lr.shape[0] < patch_lr or lr.shape[1] < patch_lr:
            warnings.warn(f"training image {i} is smaller than the patch size; skipping", stacklevel=3)
            continue
        pool.append((hr, lr))
    if not pool:
        raise TrainingError("no training image is large enough for the configured patch size")
    return pool


def _batch_tensors(
    pool, cfg: TrainConfig, scale: int, rng: np.random.Generator
) -> tuple[Tensor, Tensor]:
    lrs, hrs = [], []
    for _ in range(cfg.batch):
        hr, lr = pool[int(rng.integers(len(pool)))]
        lp, hp = sample_patch_pair(hr, lr, scale, cfg.patch_lr, rng)
        lp, hp = augment_pair(lp, hp, rng)
        lrs.append(lp.transpose(2, 0, 1))
        hrs.append(hp.transpose(2, 0, 1))
    return (
        Tensor(np.stack(lrs).astype(np.float32)),
        Tensor(np.stack(hrs).astype(np.float32)),
    )


def fit(
    model: Model,
    pairs,
    cfg: TrainConfig,
    out_dir=None,
    resume_from=None,
) -> FitResult:
    """Run the training loop.

    ``pairs`` is a sequence of (hr, lr) float images in [0, 1]. When
    ``out_dir`` is given, checkpoints land there every
    ``checkpoint_every`` steps along with a step,loss CSV; ``resume_from``
    restores weights, optimizer state, step counter and seed from a
    checkpoint and continues to ``total_steps``.
    """
    cfg.validate()
    seed = cfg.seed
    start_step = 0
    if resume_from is not None:
        store, mcfg, state, start_step, seed = load_checkpoint(resume_from)
        model = Model(cfg=mcfg, store=store)
    elif model is not None:
        state = OptimizerState.for_store(model.store)
    else:
        raise ConfigError("fit needs a model unless resuming from a checkpoint")

    pool = _build_pool(pairs, cfg.patch_lr)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    losses: list[tuple[int, float]] = []
    for step in range(start_step, cfg.total_steps):
        rng = step_rng(seed, step)
        lr_batch, hr_batch = _batch_tensors(pool, cfg, model.cfg.scale, rng)
        model.store.zero_grad()
        with GradientTape() as tape:
            loss = l1_loss(mprnet_forward(lr_batch, model.store, model.cfg), hr_batch)
        backward(loss, tape)
        grads = {p: t.grad for p, t in model.store.items()}
        adam_step(model.store, grads, state, lr_at(step, cfg))
        losses.append((step, loss.item()))

        done = step + 1
        if out_dir is not None and cfg.checkpoint_every > 0 and done % cfg.checkpoint_every == 0:
            blob = checkpoint_to_bytes(model.store, model.cfg, state, done, seed)
            (out_dir / f"ckpt_{done:07d}.mprc").write_bytes(blob)

    if out_dir is not None:
        mode = "a" if resume_from is not None and (out_dir / "loss_curve.csv").exists() else "w"
        with open(out_dir / "loss_curve.csv", mode) as f:
            if mode == "w":
                f.write("step,loss\n")
            for s, l in losses:
                f.write(f"{s},{l:.8f}\n")
        blob = checkpoint_to_bytes(model.store, model.cfg, state, cfg.total_steps, seed)
        (out_dir / "ckpt_final.mprc").write_bytes(blob)

    return FitResult(model, losses, state, start_step, cfg.total_steps)
