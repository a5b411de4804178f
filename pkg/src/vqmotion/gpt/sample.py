"""Ancestral sampling and sliding-window generation.

Depth layers decode sequentially inside a step, shallow first. Contexts
never grow past the model's k_max; generation restarts the window with
the most recent k_overlap codes carried over and a fresh start draw.
"""

from __future__ import annotations

import numpy as np

from ..nn.tensor import no_grad
from .model import GptNet

# at or below this temperature softmax sampling is replaced by greedy argmax
GREEDY_TEMPERATURE = 1e-8


def _draw(logits: np.ndarray, temperature: float, rng: np.random.Generator) -> np.ndarray:
    if temperature <= 0.0:
        raise ValueError(f"temperature {temperature} must be positive")
    if temperature <= GREEDY_TEMPERATURE:
        return np.argmax(logits, axis=1)
    scaled = logits / temperature
    scaled = scaled - scaled.max(axis=1, keepdims=True)
    e = np.exp(scaled)
    cdf = np.cumsum(e, axis=1)
    u = rng.random((logits.shape[0], 1)) * cdf[:, -1:]
    return np.minimum((cdf < u).sum(axis=1), logits.shape[1] - 1)


def sample_step(net: GptNet, prefix, cond=None, temperature: float = 1.0,
                rng: np.random.Generator | None = None, start_noise=None) -> np.ndarray:
    """Draw the next (B, Q) index tuple after a (B, k, Q) prefix batch."""
    if rng is None:
        rng = np.random.default_rng(0)
    arr = np.asarray(prefix)
    with no_grad():
        f = net.prefix_feature(arr, cond, start_noise)
        chosen = np.zeros((arr.shape[0], 0), dtype=np.int64)
        for _ in range(net.cfg.n_codebooks):
            logits = net.layer_logits(f, chosen).data
            idx = _draw(logits, temperature, rng)
            chosen = np.concatenate([chosen, idx[:, None]], axis=1)
    return chosen


def sample_next(net: GptNet, prefix, cond=None, temperature: float = 1.0,
                rng: np.random.Generator | None = None, start_noise=None) -> np.ndarray:
    """Single-sequence wrapper over sample_step: (k, Q) prefix to (Q,) tuple."""
    arr = np.asarray(prefix)
    if arr.ndim != 2:
        raise ValueError(f"expected a (steps, layers) prefix, got {arr.shape}")
    noise = None if start_noise is None else np.asarray(start_noise)[None]
    return sample_step(net, arr[None], cond, temperature, rng, noise)[0]


def generate_batch(net: GptNet, n: int, length: int, cond=None,
                   temperature: float = 1.0,
                   rng: np.random.Generator | None = None,
                   stats: dict | None = None) -> np.ndarray:
    """Sample n sequences of `length` steps: (n, length, Q) indices."""
    if length < 1:
        raise ValueError("length must be at least 1")
    if rng is None:
        rng = np.random.default_rng(0)
    cfg = net.cfg
    noise = rng.normal(size=(n, cfg.width)) * cfg.start_noise
    window = np.zeros((n, 0, cfg.n_codebooks), dtype=np.int64)
    out = []
    restarts = 0
    while len(out) < length:
        if window.shape[1] >= cfg.k_max:
            window = window[:, -cfg.k_overlap:]
            noise = rng.normal(size=(n, cfg.width)) * cfg.start_noise
            restarts += 1
        step = sample_step(net, window, cond, temperature, rng, noise)
        window = np.concatenate([window, step[:, None, :]], axis=1)
        out.append(step)
    if stats is not None:
        stats["restarts"] = restarts
        stats["windows"] = restarts + 1
    return np.stack(out, axis=1)


def generate(net: GptNet, length: int, cond=None, temperature: float = 1.0,
             rng: np.random.Generator | None = None,
             stats: dict | None = None) -> np.ndarray:
    """One generated index sequence, shape (length, Q)."""
    return generate_batch(net, 1, length, cond, temperature, rng, stats)[0]
