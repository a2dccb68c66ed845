"""Parameter and multiply-accumulate accounting.

The MAC convention counts convolutions only, assuming the network emits a
1280x720 image: internal stages run at (1280/s, 720/s) (rounded up when s
does not divide), the pooled attention grid at its strided size, pooled
1x1 vector convolutions at a single position, and the reconstruction layer
at full 720p. Params and MACs both come from the same layer enumeration
that builds the model, so the totals always match a built store.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .model import (
    RES_HR,
    RES_LR,
    RES_POS,
    RES_UP1,
    RES_VEC,
    ModelConfig,
    iter_layers,
    pos_pool_geometry,
)

MAC_REF_W = 1280
MAC_REF_H = 720


@dataclass
class LayerRow:
    path: str
    params: int
    macs: int


@dataclass
class ComplexityReport:
    rows: list[LayerRow] = field(default_factory=list)

    @property
    def params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def macs(self) -> int:
        return sum(r.macs for r in self.rows)

    def format_table(self) -> str:
        width = max([len(r.path) for r in self.rows] + [len("TOTAL")])
        lines = [f"{'layer':<{width}}  {'params':>12}  {'macs':>16}"]
        for r in self.rows:
            lines.append(f"{r.path:<{width}}  {r.params:>12,}  {r.macs:>16,}")
        lines.append(f"{'TOTAL':<{width}}  {self.params:>12,}  {self.macs:>16,}")
        return "\n".join(lines)


def conv_params(c_in: int, c_out: int, kernel: int, groups: int = 1, bias: bool = True) -> int:
    return c_out * (c_in // groups) * kernel * kernel + (c_out if bias else 0)


def conv_macs(c_in: int, c_out: int, kernel: int, out_h: int, out_w: int, groups: int = 1) -> int:
    return out_h * out_w * c_out * (c_in // groups) * kernel * kernel


def _resolutions(cfg: ModelConfig) -> dict[str, tuple[int, int]]:
    lr_h = math.ceil(MAC_REF_H / cfg.scale)
    lr_w = math.ceil(MAC_REF_W / cfg.scale)
    pos_h, _, _ = pos_pool_geometry(lr_h, cfg.pos_kernel, cfg.pos_stride)
    pos_w, _, _ = pos_pool_geometry(lr_w, cfg.pos_kernel, cfg.pos_stride)
    return {
        RES_LR: (lr_h, lr_w),
        RES_POS: (pos_h, pos_w),
        RES_VEC: (1, 1),
        RES_UP1: (lr_h * 2, lr_w * 2),
        RES_HR: (MAC_REF_H, MAC_REF_W),
    }


def complexity_report(cfg: ModelConfig) -> ComplexityReport:
    cfg.validate()
    res = _resolutions(cfg)
    report = ComplexityReport()
    for spec in iter_layers(cfg):
        h, w = res[spec.res]
        report.rows.append(LayerRow(spec.path, spec.params, spec.macs(h, w)))
    return report


def count_params(cfg: ModelConfig) -> int:
    return complexity_report(cfg).params


def count_macs(cfg: ModelConfig) -> int:
    return complexity_report(cfg).macs


def local_receptive_field(cfg: ModelConfig) -> int:
    """Radius, in input pixels, reached by the purely local pathways.

    Pooled-vector branches (channel attention, adaptive path) average over
    the whole map and are excluded; this is the locality bound the probe
    test checks after zeroing those branches.
    """
    k, s = cfg.pos_kernel, cfg.pos_stride

    def tfam_radius(r: int) -> int:
        # mask: pad (< k) + pool window (k) + 3x3 conv on the strided grid
        # (radius s) + nearest upsample/crop misalignment (< s)
        return r + (k - 1) + s + s + (k - 1)

    def arb_radius(r: int) -> int:
        if cfg.paths.bottleneck:
            r = tfam_radius(r + 1 + 1)  # two depthwise 3x3
        r += 1  # merge depthwise 3x3
        return r

    r = 1  # shallow 3x3
    per_rcb = 0
    for _ in range(cfg.n_arb):
        per_rcb = arb_radius(per_rcb)
    r += cfg.n_rcb * per_rcb
    r = tfam_radius(r)
    r += 1  # global feature extractor
    # upsampling convs act before each shuffle; in input pixels each 3x3
    # contributes 1 at the current density
    if cfg.scale == 4:
        r += 1 + 1
    else:
        r += 1
    r += 1  # reconstruction conv (HR-side, < 1 input pixel, round up)
    return r


@dataclass
class CalibrationRow:
    width: int
    n_rcb: int
    n_arb: int
    params: int
    macs: int
    in_band: bool


def calibration_grid(
    scale: int = 4,
    target_params: int = 538_000,
    band: float = 0.15,
    widths=(48, 56, 64),
    rcb_counts=(2, 3, 4),
    arb_counts=(2, 3),
) -> list[CalibrationRow]:
    """Parameter counts over the depth/width grid used to pick defaults."""
    rows = []
    for w in widths:
        for r in rcb_counts:
            for a in arb_counts:
                cfg = ModelConfig(width=w, n_rcb=r, n_arb=a, scale=scale)
                rep = complexity_report(cfg)
                ok = abs(rep.params - target_params) <= band * target_params
                rows.append(CalibrationRow(w, r, a, rep.params, rep.macs, ok))
    return rows
