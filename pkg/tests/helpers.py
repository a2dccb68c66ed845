"""Shared test utilities: finite-difference gradient checking, seeded
tensors, and the deterministic test-card images used by the training
smoke tests."""

from __future__ import annotations

import numpy as np

from mprnet.tensor import GradientTape, Tensor, backward

GRAD_RTOL = 1e-4
GRAD_ATOL = 1e-6


def seeded_tensor(shape, seed=0, requires_grad=False, dtype=np.float64, low=-1.0, high=1.0):
    rng = np.random.default_rng(seed)
    data = rng.uniform(low, high, size=shape).astype(dtype)
    return Tensor(data, requires_grad=requires_grad)


def gradcheck(build_loss, leaves, h=1e-5, max_checks=6, rng_seed=0,
              rtol=GRAD_RTOL, atol=GRAD_ATOL):
    """Central finite differences against the recorded gradients.

    ``build_loss`` must rebuild the graph from the current leaf values each
    call (it runs once under a tape and then repeatedly tape-free for the
    perturbed evaluations). Checks up to ``max_checks`` sampled elements
    per leaf; relative error below ``rtol``, or absolute below ``atol``
    where the analytic value is tiny.
    """
    for t in leaves:
        assert t.dtype == np.float64, "gradient checks need 64-bit leaves"
        t.zero_grad()
    with GradientTape() as tape:
        loss = build_loss()
    backward(loss, tape)
    analytic = [t.grad.copy() for t in leaves]

    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for t, ana in zip(leaves, analytic):
        flat = t.data.reshape(-1)
        aflat = ana.reshape(-1)
        idxs = rng.choice(flat.size, size=min(max_checks, flat.size), replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            up = build_loss().item()
            flat[i] = orig - h
            down = build_loss().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = aflat[i]
            if abs(a) < 1e-8:
                err = abs(numeric - a)
                assert err < atol, f"grad mismatch at element {i}: analytic {a}, numeric {numeric}"
            else:
                err = abs(numeric - a) / max(abs(numeric), abs(a))
                assert err < rtol, f"grad mismatch at element {i}: analytic {a}, numeric {numeric}"
            worst = max(worst, err)
    return worst


def synth_card(seed: int, size: int = 96) -> np.ndarray:
    """Deterministic edge-dense RGB image in [0, 1], quantized to 8 bits.

    Smooth gradient background, dense hard-edged shapes, oriented gratings
    near the half-sampling frequency, and thin dark lines: content a
    bicubic upscaler blurs but a small network can learn to restore.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.zeros((size, size, 3))
    for c in range(3):
        a, b = rng.uniform(-1, 1, 2)
        img[:, :, c] = 0.5 + 0.2 * (a * xx + b * yy)
    for _ in range(40):
        cx, cy, r = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.02, 0.08)
        col = rng.uniform(0, 1, 3)
        if rng.integers(2):
            mask = (np.abs(xx - cx) < r) & (np.abs(yy - cy) < 0.6 * r)
        else:
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r**2
        img[mask] = col
    for _ in range(3):
        th = rng.uniform(0, np.pi)
        f = rng.uniform(10, 22)
        g = np.sin(2 * np.pi * f * (np.cos(th) * xx + np.sin(th) * yy))
        band = (xx > rng.uniform(0, 0.5)) & (xx < rng.uniform(0.5, 1))
        img[band] += 0.2 * g[band, None]
    for _ in range(6):
        pos = int(rng.integers(4, size - 4))
        if rng.integers(2):
            img[pos, :] *= 0.25
        else:
            img[:, pos] *= 0.25
    return np.round(np.clip(img, 0, 1) * 255) / 255


def conv2d_loop(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                stride: int = 1, pad: int = 0, groups: int = 1) -> np.ndarray:
    """Direct nested-loop convolution oracle (independent of the library)."""
    n_b, c_in, h, w_in = x.shape
    c_out, c_g, k, _ = w.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w_in + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((n_b, c_out, oh, ow), dtype=np.float64)
    cog = c_out // groups
    for n in range(n_b):
        for co in range(c_out):
            g = co // cog
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(c_g):
                        for ky in range(k):
                            for kx in range(k):
                                acc += (
                                    xp[n, g * c_g + ci, oy * stride + ky, ox * stride + kx]
                                    * w[co, ci, ky, kx]
                                )
                    out[n, co, oy, ox] = acc
    if b is not None:
        out += b
    return out
