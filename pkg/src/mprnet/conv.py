"""2-D convolution with zero padding, stride and channel groups.

Forward lowers each group to a patch matrix (im2col) and a single BLAS
matmul, which fixes the reduction order; the depthwise case (groups equal
to channels) takes a vectorized einsum path instead of looping channels.
Backward scatters patch gradients with one strided accumulation per kernel
offset, again in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .tensor import Tensor, record


@dataclass
class ConvParams:
    """Weight (C_out, C_in/groups, k, k), optional bias (1, C_out, 1, 1)."""

    weight: Tensor
    bias: Tensor | None = None
    stride: int = 1
    padding: int = 0
    groups: int = 1


def _out_extent(e: int, k: int, pad: int, stride: int) -> int:
    return (e + 2 * pad - k) // stride + 1


def _check(x: Tensor, p: ConvParams) -> tuple[int, int, int, int, int]:
    n, c, h, w = x.shape
    c_out, c_in_g, kh, kw = p.weight.shape
    if kh != kw:
        raise ConfigError(f"square kernels only, got {kh}x{kw}")
    if p.groups < 1 or c % p.groups != 0 or c_out % p.groups != 0:
        raise ConfigError(f"groups={p.groups} must divide C_in={c} and C_out={c_out}")
    if c_in_g != c // p.groups:
        raise ConfigError(
            f"input channels {c} (groups={p.groups}) do not match weight shape {p.weight.shape}"
        )
    if p.stride < 1 or p.padding < 0:
        raise ConfigError(f"bad stride/padding ({p.stride}, {p.padding})")
    oh = _out_extent(h, kh, p.padding, p.stride)
    ow = _out_extent(w, kw, p.padding, p.stride)
    if oh < 1 or ow < 1:
        raise ConfigError(f"conv collapses {h}x{w} to {oh}x{ow} (k={kh}, pad={p.padding}, stride={p.stride})")
    if p.bias is not None and p.bias.shape != (1, c_out, 1, 1):
        raise ConfigError(f"bias shape {p.bias.shape} != (1, {c_out}, 1, 1)")
    return c_out, kh, oh, ow, c // p.groups


def _im2col(xd: np.ndarray, k: int, pad: int, stride: int, oh: int, ow: int) -> np.ndarray:
    n, c = xd.shape[:2]
    if pad:
        xd = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xd, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N, C, oh, ow, k, k)
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, oh * ow)
    return np.ascontiguousarray(cols)


def _col2im(gcols: np.ndarray, shape, k: int, pad: int, stride: int, oh: int, ow: int) -> np.ndarray:
    n, c, h, w = shape
    gp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=gcols.dtype)
    gwin = gcols.reshape(n, c, k, k, oh, ow)
    for i in range(k):
        for j in range(k):
            gp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += gwin[:, :, i, j]
    if pad:
        gp = gp[:, :, pad : pad + h, pad : pad + w]
    return np.ascontiguousarray(gp)


def conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """Grouped 2-D convolution, differentiable in x, weight and bias."""
    c_out, k, oh, ow, c_in_g = _check(x, p)
    n, c, h, w = x.shape
    g = p.groups

    if g == c and c_out == c:
        return _depthwise(x, p, k, oh, ow)

    wd = p.weight.data.reshape(g, c_out // g, c_in_g * k * k)
    cols_all = []
    outs = []
    for gi in range(g):
        xg = x.data[:, gi * c_in_g : (gi + 1) * c_in_g]
        cols = _im2col(xg, k, p.padding, p.stride, oh, ow)
        cols_all.append(cols)
        outs.append(np.matmul(wd[gi][None], cols))  # (N, C_out/g, oh*ow)
    y = np.concatenate(outs, axis=1).reshape(n, c_out, oh, ow)
    if p.bias is not None:
        y = y + p.bias.data
    out = Tensor(y)

    def bwd(grad):
        go = grad.reshape(n, c_out, oh * ow)
        gw = np.empty_like(p.weight.data)
        gx = np.empty_like(x.data)
        for gi in range(g):
            gog = go[:, gi * (c_out // g) : (gi + 1) * (c_out // g)]
            gw_g = np.matmul(gog, cols_all[gi].transpose(0, 2, 1)).sum(axis=0)
            gw[gi * (c_out // g) : (gi + 1) * (c_out // g)] = gw_g.reshape(-1, c_in_g, k, k)
            gcols = np.matmul(wd[gi].T[None], gog)
            gx[:, gi * c_in_g : (gi + 1) * c_in_g] = _col2im(
                gcols, (n, c_in_g, h, w), k, p.padding, p.stride, oh, ow
            )
        if p.bias is not None:
            gb = grad.sum(axis=(0, 2, 3)).reshape(1, c_out, 1, 1)
            return gx, gw, gb
        return gx, gw

    inputs = (x, p.weight) if p.bias is None else (x, p.weight, p.bias)
    return record(out, inputs, bwd)


def _depthwise(x: Tensor, p: ConvParams, k: int, oh: int, ow: int) -> Tensor:
    n, c, h, w = x.shape
    xd = x.data
    if p.padding:
        xd = np.pad(xd, ((0, 0), (0, 0), (p.padding, p.padding), (p.padding, p.padding)))
    win = np.lib.stride_tricks.sliding_window_view(xd, (k, k), axis=(2, 3))[:, :, :: p.stride, :: p.stride]
    wk = p.weight.data[:, 0]  # (C, k, k)
    y = np.einsum("nchwij,cij->nchw", win, wk, optimize=True)
    if p.bias is not None:
        y = y + p.bias.data
    out = Tensor(np.ascontiguousarray(y))

    def bwd(grad):
        gw = np.einsum("nchw,nchwij->cij", grad, win, optimize=True)[:, None]
        gp = np.zeros((n, c, h + 2 * p.padding, w + 2 * p.padding), dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                gp[:, :, i : i + p.stride * oh : p.stride, j : j + p.stride * ow : p.stride] += (
                    grad * wk[:, i, j][None, :, None, None]
                )
        gx = gp[:, :, p.padding : p.padding + h, p.padding : p.padding + w] if p.padding else gp
        gx = np.ascontiguousarray(gx)
        if p.bias is not None:
            gb = grad.sum(axis=(0, 2, 3)).reshape(1, c, 1, 1)
            return gx, gw, gb
        return gx, gw

    inputs = (x, p.weight) if p.bias is None else (x, p.weight, p.bias)
    return record(out, inputs, bwd)


def depthwise_conv2d(x: Tensor, p: ConvParams) -> Tensor:
    """Per-channel spatial convolution: groups = C_in = C_out."""
    c = x.shape[1]
    if p.groups != c or p.weight.shape[0] != c:
        raise ConfigError(
            f"depthwise conv needs groups == C_in == C_out, got groups={p.groups}, "
            f"C_in={c}, C_out={p.weight.shape[0]}"
        )
    return conv2d(x, p)
