"""Endless playback of quantized codes with jumps between near-duplicates.

Codes play in clip order. After emitting position k, every other position
whose code lies strictly within the distance threshold of code k
qualifies as a jump target; one is chosen uniformly and playback resumes
with its successor (the target's own code is a near-copy of what was
just played). Without a qualifying pair anywhere the stream degenerates
to a plain loop, which is still valid output.
"""

import logging

import numpy as np

from ..codec import Codec
from ..codec.model import window_features
from ..data import MotionClip
from ..nn import no_grad
from ..sim import Engine

log = logging.getLogger(__name__)


def qualified_positions(z: np.ndarray, theta: float) -> list[np.ndarray]:
    """Per position, the sorted other positions with code distance < theta."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError(f"need at least 2 codes, got shape {z.shape}")
    d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    mask = d2 < theta * theta
    return [np.flatnonzero(row) for row in mask]


def matching_positions(z: np.ndarray, theta: float, seed: int):
    """Infinite stream of (position, jump target or None) pairs."""
    targets = qualified_positions(z, theta)
    if not any(t.size for t in targets):
        log.warning("no code pair within %g; playback will simply loop", theta)
    rng = np.random.default_rng(seed)
    n = len(targets)
    k = 0
    while True:
        cands = targets[k]
        if cands.size:
            j = int(cands[rng.integers(cands.size)])
            yield k, j
            k = (j + 1) % n
        else:
            yield k, None
            k = (k + 1) % n


def code_matching_stream(z: np.ndarray, s: np.ndarray, theta: float, seed: int):
    """Infinite stream of index tuples driven by matching_positions."""
    s = np.asarray(s)
    if s.shape[0] != np.asarray(z).shape[0]:
        raise ValueError("codes and index tuples disagree on length")
    for k, _ in matching_positions(z, theta, seed):
        yield s[k]


def latent_motion_matching(codec: Codec, engine: Engine, clip: MotionClip,
                           theta: float, seed: int = 0):
    """Encode a clip and stream its index tuples with near-duplicate jumps."""
    usable = clip.n_frames - clip.n_frames % 4
    if usable < 8:
        raise ValueError(f"clip must encode to at least 2 codes, got {clip.n_frames} frames")
    feats = window_features(engine, clip.window(0, usable))
    with no_grad():
        v = codec.encode(feats.T[None]).data
    z, s = codec.quant.quantize(v)
    return code_matching_stream(z[0], s[0], theta, seed)
