"""Flat binary parameter container.

Layout (all integers little-endian)::

    b"EASEv1"                          6-byte magic
    uint32  n_blocks
    n_blocks x {
        uint16 name_len, name (utf-8),
        uint8  ndim, ndim x uint32 dims
    }
    float64 data of every block, little-endian, C order, in table order

Blocks are named ``<group>/<param>``; groups used by the trainer are
``perception``, ``qnet``, ``target`` and ``meta``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"EASEv1"


def save_blocks(path, blocks: dict) -> None:
    header = [MAGIC, struct.pack("<I", len(blocks))]
    payload = []
    for name, arr in blocks.items():
        arr = np.asarray(arr, dtype="<f8")
        enc = name.encode("utf-8")
        header.append(struct.pack("<H", len(enc)) + enc)
        header.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        payload.append(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(b"".join(header + payload))


def load_blocks(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:6] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:6]!r}")
    try:
        (n,) = struct.unpack_from("<I", raw, 6)
        off = 10
        table = []
        for _ in range(n):
            (ln,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off : off + ln].decode("utf-8")
            off += ln
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            dims = struct.unpack_from(f"<{ndim}I", raw, off)
            off += 4 * ndim
            table.append((name, tuple(dims)))
        out = {}
        for name, dims in table:
            count = int(np.prod(dims)) if dims else 1
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape(dims)
            out[name] = arr.astype(np.float64)
            off += 8 * count
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated or corrupt checkpoint ({exc})") from None
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")
    return out


def group(blocks: dict, prefix: str) -> dict:
    p = prefix + "/"
    return {k[len(p) :]: v for k, v in blocks.items() if k.startswith(p)}


def check_shapes(found: dict, expected: dict, prefix: str) -> None:
    for name, arr in expected.items():
        if name not in found:
            raise FormatError(f"missing block {prefix}/{name}")
        if tuple(found[name].shape) != tuple(np.shape(arr)):
            raise FormatError(
                f"block {prefix}/{name}: checkpoint shape {tuple(found[name].shape)} "
                f"vs expected {tuple(np.shape(arr))}"
            )
