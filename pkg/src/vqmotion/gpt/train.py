"""Teacher-forced NLL training over encoded index streams."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from ..nn.optim import RAdam
from .model import GptNet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GptTrainConfig:
    iterations: int = 2000
    batch: int = 16
    window: int = 50      # code steps per training example, capped by the model
    lr: float = 1e-3
    lr_final: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.batch < 1 or self.window < 1:
            raise ValueError("iterations, batch, and window must be positive")
        if self.lr <= 0.0 or self.lr_final <= 0.0:
            raise ValueError("learning rates must be positive")

    def scaled(self, **kw) -> "GptTrainConfig":
        return replace(self, **kw)


def stream_windows(streams: list[np.ndarray], window: int) -> list[tuple[int, int]]:
    """All (stream, start) pairs that admit a full window; shorter streams skipped."""
    starts = [(i, j) for i, s in enumerate(streams)
              for j in range(s.shape[0] - window + 1)]
    if not starts:
        raise ValueError(f"no stream is at least {window} code steps long")
    return starts


def train_gpt(net: GptNet, streams: list[np.ndarray], tcfg: GptTrainConfig,
              cond_rows: np.ndarray | None = None,
              opt: RAdam | None = None) -> list[dict]:
    """Minimize per-token NLL over random windows; returns per-iteration records.

    `cond_rows` must be a (count, cond_width) feature block shared by every
    stream when the model is conditioned (per-stream conditions are wired
    at the application layer, which trains one model per condition block).
    """
    window = min(tcfg.window, net.cfg.k_max)
    starts = stream_windows(streams, window)
    for s in streams:
        if s.ndim != 2 or s.shape[1] != net.cfg.n_codebooks:
            raise ValueError(f"stream shape {s.shape} does not match the model")
    rng = np.random.default_rng(tcfg.seed)
    if opt is None:
        opt = RAdam(net.parameters(), lr=tcfg.lr)
    tokens = tcfg.batch * window * net.cfg.n_codebooks
    records = []
    for it in range(tcfg.iterations):
        frac = it / max(tcfg.iterations - 1, 1)
        opt.lr = tcfg.lr + (tcfg.lr_final - tcfg.lr) * frac
        picks = rng.integers(0, len(starts), size=tcfg.batch)
        codes = np.stack([streams[i][j:j + window] for i, j in (starts[p] for p in picks)])
        noise = rng.normal(size=(tcfg.batch, net.cfg.width)) * net.cfg.start_noise
        loss = net.nll(codes, cond_rows, noise) * (1.0 / tokens)
        value = float(loss.data)
        if np.isfinite(value):
            opt.zero_grad()
            loss.backward()
            opt.step()
        else:
            log.warning("non-finite NLL %r at iteration %d, update skipped", value, it)
        records.append({"iteration": it, "nll": value})
    return records
