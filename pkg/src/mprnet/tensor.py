"""Dense 4-D (N, C, H, W) tensors with reverse-mode automatic differentiation.

The op set is exactly what the super-resolution forward graph needs:
convolutions (see conv.py), activations, pooling, nearest upsampling,
pixel shuffle, channel concat, broadcast add/mul and an L1 loss.

Recording model: while a ``GradientTape`` is active, every op whose inputs
require grad appends one node (inputs, output, backward rule) to the tape.
Eager execution means recording order is already a topological order, so
``backward`` just replays the node list in reverse. Leaf tensors
(``requires_grad=True``, not produced by an op) accumulate into ``.grad``;
intermediate gradients live in a scratch map and are dropped afterwards.

Determinism: forward ops never mutate inputs, and every reduction has a
fixed order (single BLAS matmul per convolution group, numpy reductions
elsewhere), so identical inputs give bit-identical outputs across runs on
one machine. Set the environment variable MPR_DEBUG_FINITE=1 to assert
that every op output is finite.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError, ShapeError, UsageError

DEBUG_CHECK_FINITE = os.environ.get("MPR_DEBUG_FINITE", "0") == "1"

_ACTIVE_TAPE: "GradientTape | None" = None


class Tensor:
    """A 4-D array plus optional gradient buffer.

    ``data`` is contiguous float32 or float64 in NCHW order. Leaves created
    with ``requires_grad=True`` get a zero ``grad`` buffer immediately, so a
    leaf that never receives gradient reads back zeros after backward.
    """

    __slots__ = ("data", "requires_grad", "grad", "_creator")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if arr.ndim != 4:
            raise ShapeError(f"tensors are 4-D (N,C,H,W), got shape {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._creator = None  # TapeNode that produced this tensor, if any

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def numel(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False, dtype=np.float32) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


def zeros(shape, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, dtype=np.float32, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


class TapeNode:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class GradientTape:
    """Ordered record of ops for one backward pass.

    Use as a context manager; nesting is rejected because a tape owns its
    execution context. ``backward`` may run once per tape.
    """

    def __init__(self):
        self._nodes: list[TapeNode] = []
        self._consumed = False

    def __enter__(self) -> "GradientTape":
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise UsageError("a gradient tape is already active in this context")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def __len__(self) -> int:
        return len(self._nodes)


def active_tape() -> GradientTape | None:
    return _ACTIVE_TAPE


def record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Attach ``out`` to the active tape if any input carries gradient.

    ``backward_fn(grad_out) -> tuple`` returns one gradient array (or None)
    per input, in order.
    """
    if DEBUG_CHECK_FINITE and not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite values in op output")
    tape = _ACTIVE_TAPE
    if tape is not None and any(t.requires_grad for t in inputs):
        node = TapeNode(inputs, out, backward_fn)
        out.requires_grad = True
        out._creator = node
        tape._nodes.append(node)
    return out


def backward(loss: Tensor, tape: GradientTape) -> None:
    """Populate leaf gradients of everything ``loss`` depends on.

    Replays the tape in reverse recording order, visiting each node once.
    A second call on the same tape raises.
    """
    if tape._consumed:
        raise UsageError("backward already ran on this tape")
    if loss.numel != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    node_ids = {id(n) for n in tape._nodes}
    if loss._creator is None or id(loss._creator) not in node_ids:
        raise UsageError("loss was not recorded on this tape")
    tape._consumed = True

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape._nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        in_grads = node.backward_fn(g)
        for t, ig in zip(node.inputs, in_grads):
            if ig is None:
                continue
            if t._creator is not None and id(t._creator) in node_ids:
                key = id(t)
                if key in grads:
                    grads[key] += ig
                else:
                    grads[key] = ig
            elif t.requires_grad:
                t.grad += ig


# ---------------------------------------------------------------------------
# elementwise ops


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0))

    def bwd(g):
        return ((x.data > 0) * g,)

    return record(out, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    y[~pos] = e / (1.0 + e)
    out = Tensor(y)

    def bwd(g):
        return (y * (1.0 - y) * g,)

    return record(out, (x,), bwd)


def apply_unary(x: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ConfigError(f"unknown unary kind {kind!r}")


def _is_channel_vector(xs, ys) -> bool:
    return ys[0] == xs[0] and ys[1] == xs[1] and ys[2] == 1 and ys[3] == 1


def _check_binary(x: Tensor, y: Tensor, op: str) -> bool:
    """Returns True when y broadcasts as a per-channel vector over H, W."""
    if x.shape == y.shape:
        return False
    if _is_channel_vector(x.shape, y.shape):
        return True
    raise ShapeError(f"{op}: shapes {x.shape} and {y.shape} are not equal or (N,C,1,1)-broadcastable")


def add(x: Tensor, y: Tensor) -> Tensor:
    bcast = _check_binary(x, y, "add")
    out = Tensor(x.data + y.data)

    def bwd(g):
        gy = g.sum(axis=(2, 3), keepdims=True) if bcast else g
        return g, gy

    return record(out, (x, y), bwd)


def mul(x: Tensor, y: Tensor) -> Tensor:
    bcast = _check_binary(x, y, "mul")
    out = Tensor(x.data * y.data)

    def bwd(g):
        gx = g * y.data
        gy = g * x.data
        if bcast:
            gy = gy.sum(axis=(2, 3), keepdims=True)
        return gx, gy

    return record(out, (x, y), bwd)


def concat_channels(xs: list[Tensor]) -> Tensor:
    if not xs:
        raise ShapeError("concat_channels needs at least one tensor")
    ref = xs[0].shape
    bad = [i for i, t in enumerate(xs) if (t.shape[0], t.shape[2], t.shape[3]) != (ref[0], ref[2], ref[3])]
    if bad:
        raise ShapeError(f"concat_channels: inputs {bad} disagree with (N,H,W)={ref[0], ref[2], ref[3]}")
    out = Tensor(np.concatenate([t.data for t in xs], axis=1))
    splits = np.cumsum([t.shape[1] for t in xs])[:-1]

    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=1))

    return record(out, tuple(xs), bwd)


# ---------------------------------------------------------------------------
# pooling and resampling


def pool2d(x: Tensor, mode: str, kernel: int, stride: int) -> Tensor:
    if mode not in ("avg", "max"):
        raise ConfigError(f"pool2d mode must be avg or max, got {mode!r}")
    if kernel < 1 or stride < 1:
        raise ConfigError("pool2d kernel and stride must be positive")
    n, c, h, w = x.shape
    if kernel > h or kernel > w:
        raise ConfigError(f"pool2d kernel {kernel} exceeds input extent {(h, w)}")
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x.data, (kernel, kernel), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N,C,oh,ow,k,k)

    if mode == "avg":
        out = Tensor(win.mean(axis=(4, 5)))

        def bwd(g):
            gx = np.zeros_like(x.data)
            gw = g / (kernel * kernel)
            for i in range(kernel):
                for j in range(kernel):
                    gx[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += gw
            return (gx,)

    else:
        flat = win.reshape(n, c, oh, ow, kernel * kernel)
        arg = flat.argmax(axis=4)  # first max in row-major window scan
        out = Tensor(np.take_along_axis(flat, arg[..., None], axis=4)[..., 0])

        def bwd(g):
            gx = np.zeros_like(x.data)
            ii, jj = np.divmod(arg, kernel)
            nn, cc, yy, xx = np.indices(arg.shape, sparse=False)
            np.add.at(gx, (nn, cc, yy * stride + ii, xx * stride + jj), g)
            return (gx,)

    return record(out, (x,), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(2, 3), keepdims=True))

    def bwd(g):
        return (np.broadcast_to(g / (h * w), x.shape).copy(),)

    return record(out, (x,), bwd)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    if factor < 1:
        raise ConfigError("upsample factor must be >= 1")
    n, c, h, w = x.shape
    out = Tensor(np.repeat(np.repeat(x.data, factor, axis=2), factor, axis=3))

    def bwd(g):
        return (g.reshape(n, c, h, factor, w, factor).sum(axis=(3, 5)),)

    return record(out, (x,), bwd)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    n, c, h, w = x.shape
    if r < 1 or c % (r * r) != 0:
        raise ConfigError(f"pixel_shuffle needs C divisible by r^2, got C={c}, r={r}")
    co = c // (r * r)
    d = x.data.reshape(n, co, r, r, h, w)
    d = d.transpose(0, 1, 4, 2, 5, 3)  # (N, co, H, r, W, r)
    out = Tensor(np.ascontiguousarray(d.reshape(n, co, h * r, w * r)))

    def bwd(g):
        gg = g.reshape(n, co, h, r, w, r).transpose(0, 1, 3, 5, 2, 4)
        return (np.ascontiguousarray(gg.reshape(n, c, h, w)),)

    return record(out, (x,), bwd)


def space_to_depth(x: Tensor, r: int) -> Tensor:
    n, c, h, w = x.shape
    if r < 1 or h % r != 0 or w % r != 0:
        raise ConfigError(f"space_to_depth needs H,W divisible by r, got {(h, w)}, r={r}")
    d = x.data.reshape(n, c, h // r, r, w // r, r)
    d = d.transpose(0, 1, 3, 5, 2, 4)
    out = Tensor(np.ascontiguousarray(d.reshape(n, c * r * r, h // r, w // r)))

    def bwd(g):
        gg = g.reshape(n, c, r, r, h // r, w // r).transpose(0, 1, 4, 2, 5, 3)
        return (np.ascontiguousarray(gg.reshape(n, c, h, w)),)

    return record(out, (x,), bwd)


def pad_replicate(x: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    if min(top, bottom, left, right) < 0:
        raise ConfigError("replicate padding must be non-negative")
    n, c, h, w = x.shape
    ih = np.clip(np.arange(-top, h + bottom), 0, h - 1)
    iw = np.clip(np.arange(-left, w + right), 0, w - 1)
    out = Tensor(np.ascontiguousarray(x.data[:, :, ih][:, :, :, iw]))

    def bwd(g):
        gx = np.zeros_like(x.data)
        # fold the padded rows/cols back onto the clamped source pixels
        tmp = np.zeros((n, c, h, w + left + right), dtype=g.dtype)
        np.add.at(tmp, (slice(None), slice(None), ih), g)
        np.add.at(gx, (slice(None), slice(None), slice(None), iw), tmp)
        return (gx,)

    return record(out, (x,), bwd)


def crop_center(x: Tensor, out_h: int, out_w: int) -> Tensor:
    n, c, h, w = x.shape
    if out_h > h or out_w > w:
        raise ShapeError(f"crop_center target {(out_h, out_w)} exceeds input {(h, w)}")
    t = (h - out_h) // 2
    l = (w - out_w) // 2
    out = Tensor(np.ascontiguousarray(x.data[:, :, t : t + out_h, l : l + out_w]))

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[:, :, t : t + out_h, l : l + out_w] = g
        return (gx,)

    return record(out, (x,), bwd)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"l1_loss: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    out = Tensor(np.abs(diff).mean().reshape(1, 1, 1, 1).astype(pred.dtype))
    n = diff.size

    def bwd(g):
        s = np.sign(diff) * (g.reshape(()) / n)  # sign(0) = 0 pins the subgradient
        return s, -s

    return record(out, (pred, target), bwd)
