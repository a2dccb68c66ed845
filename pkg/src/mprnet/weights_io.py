"""Binary weight files.

Layout (all integers little-endian):

    magic   4 bytes  b"MPRW"
    version u32      currently 1
    cfg_len u32      followed by cfg_len bytes of UTF-8 JSON model config
    tensors, one frame each, in lexicographic path order:
        path_len u16, path bytes (UTF-8)
        rank     u8  (always 4)
        dims     4 x u32
        data     float32 little-endian, dims product values
    crc32   u32      over every byte before it

The embedded config determines exactly which tensors must follow, so the
parser reads precisely that many frames; anything structurally off raises
a distinct error without returning a partial store.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .errors import CorruptFileError, SchemaMismatchError, UnknownVersionError
from .model import ModelConfig, WeightStore, iter_layers
from .tensor import Tensor

MAGIC = b"MPRW"
VERSION = 1


def expected_layout(cfg: ModelConfig) -> dict[str, tuple[int, int, int, int]]:
    layout: dict[str, tuple[int, int, int, int]] = {}
    for spec in iter_layers(cfg):
        layout[f"{spec.path}.weight"] = spec.weight_shape
        layout[f"{spec.path}.bias"] = (1, spec.c_out, 1, 1)
    return layout


def _tensor_frame(path: str, arr: np.ndarray) -> bytes:
    name = path.encode("utf-8")
    head = struct.pack("<H", len(name)) + name + struct.pack("<B", 4)
    head += struct.pack("<4I", *arr.shape)
    return head + np.ascontiguousarray(arr.astype("<f4")).tobytes()


def weights_to_bytes(store: WeightStore, cfg: ModelConfig) -> bytes:
    cfg_blob = cfg.to_json().encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<I", len(cfg_blob))
    out += cfg_blob
    for path, t in store.items():
        out += _tensor_frame(path, t.data)
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def save_weights(store: WeightStore, cfg: ModelConfig, path) -> None:
    with open(path, "wb") as f:
        f.write(weights_to_bytes(store, cfg))


class _Reader:
    def __init__(self, buf: bytes, offset: int = 0):
        self.buf = buf
        self.off = offset

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise CorruptFileError(
                f"truncated file: needed {n} bytes at offset {self.off}, have {len(self.buf) - self.off}"
            )
        b = self.buf[self.off : self.off + n]
        self.off += n
        return b

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def _read_tensor_frame(r: _Reader) -> tuple[str, np.ndarray]:
    name = r.take(r.u16()).decode("utf-8")
    rank = r.u8()
    if rank != 4:
        raise CorruptFileError(f"tensor {name!r}: rank {rank} != 4")
    dims = struct.unpack("<4I", r.take(16))
    count = int(np.prod(dims))
    if count > (1 << 31):
        raise CorruptFileError(f"tensor {name!r}: implausible element count {count}")
    data = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(dims)
    return name, data


def parse_weights(buf: bytes, offset: int = 0) -> tuple[WeightStore, ModelConfig, int]:
    """Parse one weight section starting at ``offset``; returns the store,
    its config, and the offset just past the section's CRC."""
    r = _Reader(buf, offset)
    if r.take(4) != MAGIC:
        raise CorruptFileError("not a weight file (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise UnknownVersionError(f"unsupported weight format version {version}")
    try:
        cfg = ModelConfig.from_json(r.take(r.u32()).decode("utf-8"))
    except (ValueError, TypeError, KeyError) as e:
        raise CorruptFileError(f"bad embedded config: {e}") from None

    layout = expected_layout(cfg)
    parsed: dict[str, np.ndarray] = {}
    for _ in range(len(layout)):
        name, data = _read_tensor_frame(r)
        parsed[name] = data
    stored_crc = r.u32()
    actual_crc = zlib.crc32(buf[offset : r.off - 4])
    if stored_crc != actual_crc:
        raise CorruptFileError(f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")

    for name, shape in layout.items():
        if name not in parsed:
            raise SchemaMismatchError(f"missing tensor {name!r} for the embedded config")
        if parsed[name].shape != shape:
            raise SchemaMismatchError(
                f"tensor {name!r}: file shape {parsed[name].shape} != expected {shape}"
            )
    extra = set(parsed) - set(layout)
    if extra:
        raise SchemaMismatchError(f"unexpected tensors {sorted(extra)}")

    store = WeightStore({n: Tensor(parsed[n].copy(), requires_grad=True) for n in parsed})
    return store, cfg, r.off


def load_weights(path) -> tuple[WeightStore, ModelConfig]:
    with open(path, "rb") as f:
        buf = f.read()
    store, cfg, end = parse_weights(buf)
    if end != len(buf):
        raise CorruptFileError(f"{len(buf) - end} trailing bytes after weight section")
    return store, cfg
