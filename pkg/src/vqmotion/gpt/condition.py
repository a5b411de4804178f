"""Condition-feature exchange: MCF1 files and a hashed text provider.

File layout: b"MCF1", width u32 LE, count u32 LE, then count rows of
width float64 LE values. Features are consumed as-is; the text provider
exists so the conditioned path can be exercised without any external
encoder.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

_MAGIC = b"MCF1"


class ConditionFileError(ValueError):
    pass


def write_condition_file(path, rows: np.ndarray) -> None:
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ConditionFileError(f"need a nonempty (count, width) array, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConditionFileError("condition features must be finite")
    count, width = arr.shape
    blob = _MAGIC + struct.pack("<II", width, count) + arr.astype("<f8").tobytes()
    Path(path).write_bytes(blob)


def read_condition_file(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ConditionFileError(f"{path}: not a condition-feature file")
    if len(blob) < 12:
        raise ConditionFileError(f"{path}: truncated header")
    width, count = struct.unpack("<II", blob[4:12])
    expected = 12 + 8 * width * count
    if width < 1 or count < 1 or len(blob) != expected:
        raise ConditionFileError(
            f"{path}: body is {len(blob)} bytes, header implies {expected}")
    rows = np.frombuffer(blob, dtype="<f8", offset=12).reshape(count, width)
    arr = rows.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ConditionFileError(f"{path}: non-finite feature values")
    return arr


def text_features(text: str, width: int) -> np.ndarray:
    """Deterministic per-word feature rows for a description string.

    Each whitespace token hashes to an RNG seed whose Gaussian draw becomes
    the token's feature row (normalized to roughly unit length). The empty
    string still yields one row, so downstream attention always has a key.
    """
    if width < 1:
        raise ValueError("feature width must be positive")
    tokens = text.lower().split() or [""]
    rows = np.empty((len(tokens), width))
    for i, tok in enumerate(tokens):
        seed = int.from_bytes(
            hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")
        rows[i] = np.random.default_rng(seed).standard_normal(width)
    return rows / np.sqrt(width)
