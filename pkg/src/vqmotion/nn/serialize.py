"""Flat binary serialization for named float64 arrays.

Layout, all integers little-endian unsigned 32-bit unless noted:

    version | entry count | entries...
    entry: name length | name bytes (utf-8) | rank | dims... | float64 LE data

Reads are strict: any size mismatch raises with the byte offset at which
decoding failed, and unknown versions are rejected up front.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import Array

FORMAT_VERSION = 1


class SegmentError(ValueError):
    def __init__(self, msg: str, offset: int) -> None:
        super().__init__(f"{msg} (at byte {offset})")
        self.offset = offset


def dump_arrays(entries: dict[str, Array]) -> bytes:
    parts = [struct.pack("<II", FORMAT_VERSION, len(entries))]
    for name, arr in entries.items():
        raw = name.encode("utf-8")
        a = np.asarray(arr, dtype="<f8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    return b"".join(parts)


def load_arrays(blob: bytes) -> dict[str, Array]:
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise SegmentError(f"truncated: wanted {n} bytes", off)
        chunk = blob[off : off + n]
        off += n
        return chunk

    version, count = struct.unpack("<II", take(8))
    if version != FORMAT_VERSION:
        raise SegmentError(f"unsupported format version {version}", 0)
    out: dict[str, Array] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        n_items = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(take(8 * n_items), dtype="<f8").reshape(shape)
        out[name] = data.astype(np.float64).copy()
    if off != len(blob):
        raise SegmentError(f"{len(blob) - off} trailing bytes", off)
    return out


def write_arrays(path, entries: dict[str, Array]) -> None:
    with open(path, "wb") as f:
        f.write(dump_arrays(entries))


def read_arrays(path) -> dict[str, Array]:
    with open(path, "rb") as f:
        return load_arrays(f.read())
