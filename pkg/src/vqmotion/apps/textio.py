"""Index-sequence text form: emit for prompts, parse back from free text.

One code per token: a bare integer when a single quantizer layer is in
play, else colon-joined digits "d0:d1:...:dq-1". The parser scans
arbitrary prose for such tokens, so responses with interleaved
commentary lines parse without preprocessing; any digits embedded in the
prose are treated as indices, which is the documented cost of that
tolerance.
"""

import re

import numpy as np

TOKEN = re.compile(r"\d+(?::\d+)*")

# matches the original large-vocabulary setting; desk codecs pass their own
DEFAULT_CODEBOOK_SIZE = 512


def serialize_indices(s) -> str:
    """Index array (K,) or (K, Q) -> "a, b, ..." or "a:b, c:d, ..."."""
    arr = np.asarray(s)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"expected (K,) or (K, Q) indices, got shape {np.asarray(s).shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"indices must be integers, got dtype {arr.dtype}")
    if (arr < 0).any():
        raise ValueError("indices must be nonnegative")
    return ", ".join(":".join(str(int(d)) for d in row) for row in arr)


def parse_index_response(text: str, size: int = DEFAULT_CODEBOOK_SIZE) -> np.ndarray:
    """Extract every index token from free text and validate the range.

    Returns (K,) for single-integer tokens, (K, Q) when tokens are
    colon tuples. Token arity must be consistent; the first
    out-of-range index aborts with its position named.
    """
    tokens = TOKEN.findall(text)
    if not tokens:
        raise ValueError("no index sequence found in the response")
    rows = [[int(d) for d in tok.split(":")] for tok in tokens]
    arity = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != arity:
            raise ValueError(
                f"token {i} has {len(row)} layers, expected {arity} (mixed tuple arity)")
        for q, val in enumerate(row):
            if val >= size:
                where = f"position {i}" if arity == 1 else f"position {i} layer {q}"
                raise ValueError(f"index {val} at {where} out of range [0, {size})")
    out = np.array(rows, dtype=np.int64)
    return out[:, 0] if arity == 1 else out
