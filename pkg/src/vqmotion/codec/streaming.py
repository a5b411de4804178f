"""Incremental encoding that reproduces full-clip encoder outputs exactly.

The conv stack is centered, so a code depends on a bounded window of input
frames on both sides. Codes are emitted as soon as no future frame can
reach them; flush() emits the remainder using the true end-of-stream
padding. Every emission re-runs the encoder over the frames seen so far,
which is quadratic in stream length but exact; streams here are short.
"""

import numpy as np

from ..nn import Tensor, no_grad

# one-sided receptive-field extents of the encoder, in input frames:
# proj k3 (+-1), stride-2 stage (+-1/+2 then 3 res blocks at stride 2),
# second stage at stride 4, output proj at stride 4
RF_LEFT = 26
RF_RIGHT = 29


class StreamingEncoder:
    def __init__(self, encoder):
        self._encoder = encoder
        self._frames: list[np.ndarray] = []
        self._emitted = 0

    @property
    def frames_seen(self) -> int:
        return len(self._frames)

    def _encode_prefix(self, length: int) -> np.ndarray:
        x = np.stack(self._frames[:length]).T[None]  # (1, F, length)
        with no_grad():
            v = self._encoder(Tensor(x)).data[0].T  # (length/4, C)
        return v

    def push(self, features: np.ndarray) -> np.ndarray:
        """Feed frames (n, feature_dim); returns newly settled codes (m, C)."""
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"expected (frames, features), got {feats.shape}")
        self._frames.extend(feats)
        n = len(self._frames)
        # code k reaches input frame 4k + RF_RIGHT at most; settled once
        # every such frame exists
        prefix = n - (n % 4)
        stable = max((n - 1 - RF_RIGHT) // 4 + 1, 0)
        stable = min(stable, prefix // 4)
        if stable <= self._emitted:
            return np.zeros((0, self._code_width()))
        v = self._encode_prefix(prefix)
        out = v[self._emitted : stable]
        self._emitted = stable
        return out

    def flush(self) -> np.ndarray:
        """Emit every remaining code; the stream length must divide by 4."""
        n = len(self._frames)
        if n % 4 != 0:
            raise ValueError(f"stream length {n} not divisible by 4")
        if n == 0:
            return np.zeros((0, self._code_width()))
        v = self._encode_prefix(n)
        out = v[self._emitted :]
        self._emitted = v.shape[0]
        return out

    def _code_width(self) -> int:
        return self._encoder.proj_out.w.shape[0]
