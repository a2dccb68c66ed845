"""Network assembly: config, weight store, and the forward graph.

The architecture is a shallow 3x3 feature extractor, a chain of residual
concatenation blocks built from three-path adaptive residual blocks, a
feature module (attention + global extractor, with an optional long-range
skip from the shallow features), a sub-pixel upsampling stage, and a 3x3
reconstruction layer.

``iter_layers`` is the single description of every learnable convolution;
building, parameter/MAC accounting and weight-file validation all walk it,
so they can never disagree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .conv import ConvParams, conv2d
from .errors import ConfigError, ShapeError
from .init_rng import he_normal
from .tensor import (
    Tensor,
    add,
    concat_channels,
    crop_center,
    global_avg_pool,
    l1_loss,
    mul,
    pad_replicate,
    pixel_shuffle,
    pool2d,
    relu,
    sigmoid,
    upsample_nearest,
)

ACT_AFTER_PW1 = "after_pw1"
ACT_AFTER_DW2 = "after_dw2"


@dataclass
class PathToggles:
    """Which learning paths an adaptive residual block uses."""

    bottleneck: bool = True
    adaptive: bool = True
    residual: bool = True


@dataclass
class ConnectionToggles:
    """Residual learning connections: local (inside each block chain),
    global (across the whole residual module), and the long-range skip
    from the shallow features to the feature module."""

    lrc: bool = True
    grc: bool = True
    lrsc: bool = True


@dataclass
class ModelConfig:
    """Every architectural knob. Defaults are the calibrated tuple from
    scripts/calibrate_width.py (width 48, 3 blocks of 3, which lands the
    x4 model at 528,819 parameters)."""

    width: int = 48
    n_rcb: int = 3
    n_arb: int = 3
    scale: int = 4
    tfam_mid: int | None = None  # resolved to width // 2
    pos_kernel: int = 7
    pos_stride: int = 3
    paths: PathToggles = field(default_factory=PathToggles)
    connections: ConnectionToggles = field(default_factory=ConnectionToggles)
    bn_act: str = ACT_AFTER_PW1

    def __post_init__(self):
        if self.tfam_mid is None:
            self.tfam_mid = self.width // 2

    def validate(self) -> "ModelConfig":
        if self.width < 2 or self.width % 2 != 0:
            raise ConfigError(f"width must be even and >= 2, got {self.width}")
        if self.tfam_mid < 2 or self.tfam_mid % 2 != 0:
            raise ConfigError(f"tfam_mid must be even and >= 2, got {self.tfam_mid}")
        if self.scale not in (2, 3, 4):
            raise ConfigError(f"scale must be 2, 3 or 4, got {self.scale}")
        if self.n_rcb < 1:
            raise ConfigError(f"n_rcb must be >= 1, got {self.n_rcb}")
        if self.n_arb < 1:
            raise ConfigError(f"n_arb must be >= 1, got {self.n_arb}")
        if self.pos_stride < 1 or self.pos_kernel < self.pos_stride:
            raise ConfigError(
                f"need pos_kernel >= pos_stride >= 1, got ({self.pos_kernel}, {self.pos_stride})"
            )
        if self.bn_act not in (ACT_AFTER_PW1, ACT_AFTER_DW2):
            raise ConfigError(f"bn_act must be {ACT_AFTER_PW1!r} or {ACT_AFTER_DW2!r}")
        return self

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "n_rcb": self.n_rcb,
            "n_arb": self.n_arb,
            "scale": self.scale,
            "tfam_mid": self.tfam_mid,
            "pos_kernel": self.pos_kernel,
            "pos_stride": self.pos_stride,
            "paths": {
                "bottleneck": self.paths.bottleneck,
                "adaptive": self.paths.adaptive,
                "residual": self.paths.residual,
            },
            "connections": {
                "lrc": self.connections.lrc,
                "grc": self.connections.grc,
                "lrsc": self.connections.lrsc,
            },
            "bn_act": self.bn_act,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        paths = d.pop("paths", {})
        conns = d.pop("connections", {})
        known = {k: d[k] for k in ("width", "n_rcb", "n_arb", "scale", "tfam_mid",
                                   "pos_kernel", "pos_stride", "bn_act") if k in d}
        cfg = cls(**known, paths=PathToggles(**paths), connections=ConnectionToggles(**conns))
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls.from_dict(json.loads(text))


# resolution tags for the multiply-accumulate convention
RES_LR = "lr"    # internal stages, 720p output divided by scale
RES_POS = "pos"  # pooled grid inside the positional attention unit
RES_VEC = "vec"  # 1x1 spatial (pooled-vector convolutions)
RES_UP1 = "up1"  # after the first x2 shuffle of an x4 model
RES_HR = "hr"    # 720p output stage


@dataclass(frozen=True)
class LayerSpec:
    path: str
    c_in: int
    c_out: int
    kernel: int
    groups: int = 1
    res: str = RES_LR

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.c_out, self.c_in // self.groups, self.kernel, self.kernel)

    @property
    def params(self) -> int:
        return self.c_out * (self.c_in // self.groups) * self.kernel * self.kernel + self.c_out

    def macs(self, out_h: int, out_w: int) -> int:
        return out_h * out_w * self.c_out * (self.c_in // self.groups) * self.kernel * self.kernel


def _tfam_layers(prefix: str, cfg: ModelConfig):
    c, mid = cfg.width, cfg.tfam_mid
    yield LayerSpec(f"{prefix}.ca", c, mid, 1, groups=2, res=RES_VEC)
    yield LayerSpec(f"{prefix}.pos", 2 * c, mid, 3, res=RES_POS)
    yield LayerSpec(f"{prefix}.merge", mid, c, 1, res=RES_LR)


def _arb_layers(prefix: str, cfg: ModelConfig):
    c = cfg.width
    if cfg.paths.bottleneck:
        yield LayerSpec(f"{prefix}.bn.dw1", c, c, 3, groups=c)
        yield LayerSpec(f"{prefix}.bn.pw1", c, c, 1)
        yield LayerSpec(f"{prefix}.bn.dw2", c, c, 3, groups=c)
        yield from _tfam_layers(f"{prefix}.bn.tfam", cfg)
        yield LayerSpec(f"{prefix}.bn.pw2", c, c, 1)
    if cfg.paths.adaptive:
        yield LayerSpec(f"{prefix}.adp", c, c, 1, res=RES_VEC)
    yield LayerSpec(f"{prefix}.out_dw", c, c, 3, groups=c)


def iter_layers(cfg: ModelConfig):
    """Yield every learnable convolution of the network, in graph order."""
    c = cfg.width
    yield LayerSpec("sfe", 3, c, 3)
    for i in range(cfg.n_rcb):
        for j in range(cfg.n_arb):
            yield from _arb_layers(f"rcb.{i}.arb.{j}", cfg)
        yield LayerSpec(f"rcb.{i}.fuse", (cfg.n_arb + 1) * c, c, 1)
    if cfg.connections.grc:
        yield LayerSpec("rm.fuse", (cfg.n_rcb + 1) * c, c, 1)
    yield from _tfam_layers("fm.tfam", cfg)
    yield LayerSpec("fm.gfe", c, c, 3)
    if cfg.scale == 4:
        yield LayerSpec("up.0", c, 4 * c, 3)
        yield LayerSpec("up.1", c, 4 * c, 3, res=RES_UP1)
    else:
        yield LayerSpec("up.0", c, cfg.scale * cfg.scale * c, 3)
    yield LayerSpec("rec", c, 3, 3, res=RES_HR)


class WeightStore:
    """Ordered map from layer path to parameter tensor.

    Iteration is always lexicographic by path, which fixes the on-disk
    tensor order and makes save/load round trips byte-stable.
    """

    def __init__(self, tensors: dict[str, Tensor] | None = None):
        self._tensors: dict[str, Tensor] = dict(tensors or {})

    def __getitem__(self, path: str) -> Tensor:
        return self._tensors[path]

    def __setitem__(self, path: str, t: Tensor) -> None:
        self._tensors[path] = t

    def __contains__(self, path: str) -> bool:
        return path in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def paths(self) -> list[str]:
        return sorted(self._tensors)

    def items(self):
        for p in self.paths():
            yield p, self._tensors[p]

    def total_elements(self) -> int:
        return sum(t.numel for _, t in self.items())

    def zero_grad(self) -> None:
        for _, t in self.items():
            t.zero_grad()

    def astype(self, dtype) -> "WeightStore":
        return WeightStore(
            {p: Tensor(t.data.astype(dtype), requires_grad=t.requires_grad) for p, t in self.items()}
        )


def build_model(cfg: ModelConfig, seed: int, dtype=np.float32) -> WeightStore:
    """Initialize every layer deterministically from (cfg, seed).

    Conv weights are He-style fan-in Gaussians, biases zero; each layer
    draws from its own stream so layouts can change without reshuffling
    unrelated layers.
    """
    cfg.validate()
    store = WeightStore()
    for spec in iter_layers(cfg):
        fan_in = (spec.c_in // spec.groups) * spec.kernel * spec.kernel
        w = he_normal(f"{spec.path}.weight", seed, spec.weight_shape, fan_in).astype(dtype)
        store[f"{spec.path}.weight"] = Tensor(w, requires_grad=True)
        store[f"{spec.path}.bias"] = Tensor(
            np.zeros((1, spec.c_out, 1, 1), dtype=dtype), requires_grad=True
        )
    return store


@dataclass
class ForwardTrace:
    """Optional capture of named intermediate maps during a forward pass."""

    maps: dict[str, Tensor] = field(default_factory=dict)


def _conv(x: Tensor, store: WeightStore, path: str, pad: int = 0, groups: int = 1) -> Tensor:
    p = ConvParams(store[f"{path}.weight"], store[f"{path}.bias"], padding=pad, groups=groups)
    return conv2d(x, p)


def pos_pool_geometry(extent: int, kernel: int, stride: int) -> tuple[int, int, int]:
    """(windows, pad_before, pad_after) so the strided pooling covers every
    pixel and the nearest-upsampled result can be center-cropped back."""
    n_out = math.ceil(extent / stride)
    padded = (n_out - 1) * stride + kernel
    pad = padded - extent
    return n_out, pad // 2, pad - pad // 2


def tfam_forward(
    x: Tensor,
    store: WeightStore,
    prefix: str,
    cfg: ModelConfig,
    trace: ForwardTrace | None = None,
    trace_key: str | None = None,
) -> Tensor:
    """Two-fold attention: a channel unit over pooled statistics and a
    positional unit over large-kernel avg/max pooling, merged into a
    sigmoid mask applied with an identity residual."""
    n, c, h, w = x.shape
    if c != cfg.width:
        raise ShapeError(f"attention expects {cfg.width} channels, got {c}")
    k, s = cfg.pos_kernel, cfg.pos_stride

    ca = _conv(global_avg_pool(x), store, f"{prefix}.ca", groups=2)  # (N, mid, 1, 1)

    _, pt, pb = pos_pool_geometry(h, k, s)
    _, pl, pr = pos_pool_geometry(w, k, s)
    xp = pad_replicate(x, pt, pb, pl, pr)
    if xp.shape[2] < k or xp.shape[3] < k:
        raise ConfigError(f"pooling kernel {k} exceeds padded input {xp.shape[2:]} ")
    pooled = concat_channels([pool2d(xp, "avg", k, s), pool2d(xp, "max", k, s)])
    pos = _conv(pooled, store, f"{prefix}.pos", pad=1)
    pos = crop_center(upsample_nearest(pos, s), h, w)

    mask = sigmoid(_conv(add(pos, ca), store, f"{prefix}.merge"))
    if trace is not None and trace_key is not None:
        trace.maps[trace_key] = mask
    return add(mul(x, mask), x)


def arb_forward(x: Tensor, store: WeightStore, prefix: str, cfg: ModelConfig) -> Tensor:
    """Adaptive residual block: bottleneck, identity and adaptive paths.

    Disabled paths contribute zero. The bottleneck keeps the block width
    everywhere, and the merged bottleneck+identity sum passes through one
    more depthwise conv before the adaptive correction is added.
    """
    c = cfg.width
    acc: Tensor | None = None
    if cfg.paths.bottleneck:
        b = _conv(x, store, f"{prefix}.bn.dw1", pad=1, groups=c)
        b = _conv(b, store, f"{prefix}.bn.pw1")
        if cfg.bn_act == ACT_AFTER_PW1:
            b = relu(b)
        b = _conv(b, store, f"{prefix}.bn.dw2", pad=1, groups=c)
        if cfg.bn_act == ACT_AFTER_DW2:
            b = relu(b)
        b = tfam_forward(b, store, f"{prefix}.bn.tfam", cfg)
        b = _conv(b, store, f"{prefix}.bn.pw2")
        acc = b
    if cfg.paths.residual:
        acc = x if acc is None else add(acc, x)
    if acc is None:
        acc = Tensor(np.zeros(x.shape, dtype=x.dtype))
    y = _conv(acc, store, f"{prefix}.out_dw", pad=1, groups=c)
    if cfg.paths.adaptive:
        y = add(y, _conv(global_avg_pool(x), store, f"{prefix}.adp"))
    return y


def rcb_forward(x: Tensor, store: WeightStore, prefix: str, cfg: ModelConfig) -> Tensor:
    """Residual concatenation block: chain the inner blocks, concatenate
    the input with every block output, fuse back to the block width, and
    optionally add the local residual."""
    feats = [x]
    cur = x
    for j in range(cfg.n_arb):
        cur = arb_forward(cur, store, f"{prefix}.arb.{j}", cfg)
        feats.append(cur)
    fused = _conv(concat_channels(feats), store, f"{prefix}.fuse")
    return add(x, fused) if cfg.connections.lrc else fused


def residual_module_forward(
    x: Tensor, store: WeightStore, cfg: ModelConfig, trace: ForwardTrace | None = None
) -> Tensor:
    feats = [x]
    cur = x
    for i in range(cfg.n_rcb):
        cur = rcb_forward(cur, store, f"rcb.{i}", cfg)
        if trace is not None:
            trace.maps[f"rcb.{i}"] = cur
        feats.append(cur)
    if cfg.connections.grc:
        return _conv(concat_channels(feats), store, "rm.fuse")
    return cur


def upnet_forward(x: Tensor, store: WeightStore, cfg: ModelConfig) -> Tensor:
    if cfg.scale == 4:
        x = pixel_shuffle(_conv(x, store, "up.0", pad=1), 2)
        x = pixel_shuffle(_conv(x, store, "up.1", pad=1), 2)
        return x
    return pixel_shuffle(_conv(x, store, "up.0", pad=1), cfg.scale)


def mprnet_forward(
    img: Tensor, store: WeightStore, cfg: ModelConfig, trace: ForwardTrace | None = None
) -> Tensor:
    """Full network: (N, 3, H, W) in [0, 1] -> (N, 3, sH, sW), unclamped."""
    n, c, h, w = img.shape
    if c != 3:
        raise ShapeError(f"expected 3 input channels, got {c}")
    if h < 8 or w < 8:
        raise ShapeError(f"input must be at least 8x8, got {h}x{w}")

    sfe = _conv(img, store, "sfe", pad=1)
    rm = residual_module_forward(sfe, store, cfg, trace)
    att = tfam_forward(rm, store, "fm.tfam", cfg, trace, "tfam_mask")
    fm = _conv(att, store, "fm.gfe", pad=1)
    if cfg.connections.lrsc:
        fm = add(fm, sfe)
    up = upnet_forward(fm, store, cfg)
    out = _conv(up, store, "rec", pad=1)

    if trace is not None:
        trace.maps.update({"sfe": sfe, "rm": rm, "fm": fm, "up": up, "out": out})
    return out


@dataclass
class Model:
    """A built network: immutable config plus its weight store."""

    cfg: ModelConfig
    store: WeightStore

    @classmethod
    def build(cls, cfg: ModelConfig, seed: int = 0) -> "Model":
        return cls(cfg=cfg.validate(), store=build_model(cfg, seed))

    def forward(self, x: Tensor, trace: ForwardTrace | None = None) -> Tensor:
        return mprnet_forward(x, self.store, self.cfg, trace)

    def loss(self, x: Tensor, target: Tensor) -> Tensor:
        return l1_loss(self.forward(x), target)
