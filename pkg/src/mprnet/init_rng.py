"""Deterministic per-layer weight initialization.

Each layer gets its own xoshiro256** stream, seeded from the global seed
mixed with a stable hash of the layer path, so adding or removing layers
never shifts the draws of the others. Normal samples come from Box-Muller
over the generator's 53-bit uniforms. Everything is plain integer and
float64 arithmetic, reproducible across platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256StarStar:
    def __init__(self, seed: int):
        s = seed & _MASK
        self.s = []
        for _ in range(4):
            s, v = _splitmix64(s)
            self.s.append(v)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles in [0, 1) from the top 53 bits of each draw."""
        raw = np.fromiter((self.next_u64() >> 11 for _ in range(n)), dtype=np.uint64, count=n)
        return raw.astype(np.float64) * (1.0 / (1 << 53))

    def normals(self, n: int) -> np.ndarray:
        m = (n + 1) // 2
        u1 = self.uniforms(m)
        u2 = self.uniforms(m)
        r = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 keeps log away from 0
        ang = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(ang), r * np.sin(ang)])
        return z[:n]


def layer_seed(global_seed: int, path: str) -> int:
    digest = hashlib.sha256(path.encode("utf-8")).digest()
    h = int.from_bytes(digest[:8], "little")
    return (global_seed ^ h) & _MASK


def he_normal(path: str, global_seed: int, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Zero-mean Gaussian scaled for ReLU fan-in: std = sqrt(2 / fan_in)."""
    rng = Xoshiro256StarStar(layer_seed(global_seed, path))
    n = int(np.prod(shape))
    std = np.sqrt(2.0 / fan_in)
    return (rng.normals(n) * std).reshape(shape).astype(np.float32)
