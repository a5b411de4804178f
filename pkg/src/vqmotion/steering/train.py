"""Distillation of reference locomotion into the steering policy.

Reference clips are encoded once with the frozen codec into (code, index,
task) triples; training unrolls the policy over short windows and feeds
back either the reference code or the policy's own quantized output,
switching per step with the scheduled-sampling probability.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from ..codec import Codec, CodebookStack, window_features
from ..data import MotionClip
from ..nn import Tensor, no_grad, stack, straight_through
from ..nn.optim import RAdam
from ..sim import Engine
from .config import SteerConfig
from .policy import SteeringPolicyNet
from .task import FRAMES_PER_CODE, build_task_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SteerTrainConfig:
    iterations: int = 3000
    batch: int = 32
    unroll: int = 8       # code steps per training window
    lr: float = 1e-3
    lr_final: float = 1e-4
    p_start: float = 0.8  # teacher-forcing probability at iteration 0
    p_end: float = 0.0
    w_match: float = 1.0
    w_project: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.batch < 1 or self.unroll < 1:
            raise ValueError("iterations, batch, and unroll must be positive")
        if self.lr <= 0.0 or self.lr_final <= 0.0:
            raise ValueError("learning rates must be positive")
        for p in (self.p_start, self.p_end):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"teacher-forcing probability {p} outside [0, 1]")
        if self.w_match < 0 or self.w_project < 0:
            raise ValueError("loss weights must be non-negative")

    def scaled(self, **kw) -> "SteerTrainConfig":
        return replace(self, **kw)


def encode_reference(codec: Codec, engine: Engine, clip: MotionClip,
                     cfg: SteerConfig) -> dict:
    """Frozen-codec encoding of one clip.

    Returns {"z": (K, C) codes, "idx": (K, Q) index tuples, "g": (Kg, 4S)
    task rows}, where Kg <= K counts the steps that still have the full
    lookahead ahead of them.
    """
    feats = window_features(engine, clip)
    t4 = feats.shape[0] - feats.shape[0] % 4
    if t4 == 0:
        return {"z": np.zeros((0, cfg.code_width)), "idx": np.zeros((0, 0), dtype=np.int64),
                "g": np.zeros((0, cfg.task_dim))}
    with no_grad():
        v = codec.encode(feats[:t4].T[None]).data
    z, idx = codec.quant.quantize(v)
    k_total = z.shape[1]
    last_step = int(round(cfg.sample_offsets[-1] * clip.fps))
    k_g = min(k_total, max(0, (clip.n_frames - 1 - last_step) // FRAMES_PER_CODE + 1))
    g = np.stack([build_task_params(clip, k, cfg).vector() for k in range(k_g)]) \
        if k_g else np.zeros((0, cfg.task_dim))
    return {"z": z[0], "idx": idx[0], "g": g}


def steering_windows(entries: list[dict], unroll: int) -> list[tuple[int, int]]:
    """All (entry, start) pairs admitting a full unroll; short entries skipped.

    A window starting at s consumes codes from s-1 and task rows through
    s+unroll, so entries need at least unroll + 2 task rows.
    """
    wins = [(i, s) for i, e in enumerate(entries)
            for s in range(1, e["g"].shape[0] - unroll)]
    if not wins:
        raise ValueError(f"no reference entry spans {unroll + 2} task steps")
    return wins


def train_steering(net: SteeringPolicyNet, quant: CodebookStack,
                   entries: list[dict], tcfg: SteerTrainConfig,
                   opt: RAdam | None = None) -> list[dict]:
    """Scheduled-sampling unroll training; returns per-iteration records.

    At each unroll step the fed-back code is the reference with probability
    p (decaying linearly p_start -> p_end over the run), otherwise the
    policy's own quantized output through the straight-through estimator.
    Code errors are measured in whitened units (the net's code stats are
    pinned to this dataset first), so both loss terms sit at unit scale.
    Records carry the realized teacher rate so schedules can be audited.
    """
    wins = steering_windows(entries, tcfg.unroll)
    rng = np.random.default_rng(tcfg.seed)
    pop = np.concatenate([e["z"] for e in entries])
    net.set_code_stats(pop.mean(axis=0), pop.std(axis=0))
    inv_sigma = Tensor(1.0 / net.code_sigma)
    if opt is None:
        opt = RAdam(net.parameters(), lr=tcfg.lr)
    records = []
    for it in range(tcfg.iterations):
        frac = it / max(tcfg.iterations - 1, 1)
        opt.lr = tcfg.lr + (tcfg.lr_final - tcfg.lr) * frac
        p = tcfg.p_start + (tcfg.p_end - tcfg.p_start) * frac
        rows = [wins[j] for j in rng.integers(0, len(wins), size=tcfg.batch)]
        teacher = rng.random((tcfg.batch, tcfg.unroll)) < p
        z_fed = Tensor(np.stack([entries[e]["z"][s - 1] for e, s in rows]))
        v_terms, g_terms, fed = [], [], []
        for t in range(tcfg.unroll):
            g_in = np.stack([entries[e]["g"][s + t] for e, s in rows])
            z_star = np.stack([entries[e]["z"][s + t] for e, s in rows])
            g_next = np.stack([entries[e]["g"][s + t + 1] for e, s in rows])
            v, g_hat = net.split(net(z_fed, Tensor(g_in)))
            v_terms.append((((v - Tensor(z_star)) * inv_sigma) ** 2).mean())
            g_terms.append(((g_hat - Tensor(g_next)) ** 2).mean())
            z_np, _ = quant.quantize(v.data)
            st = straight_through(v, Tensor(z_np))
            m = Tensor(teacher[:, t : t + 1].astype(np.float64))
            z_fed = Tensor(z_star) * m + st * (1.0 - m)
            fed.append(z_fed)
        match = v_terms[0] + g_terms[0]
        for t in range(1, tcfg.unroll):
            match = match + v_terms[t] + g_terms[t]
        match = match * (1.0 / tcfg.unroll)
        g_first = np.stack([entries[e]["g"][s] for e, s in rows])
        proj = ((net.project(stack(fed, axis=1)) - Tensor(g_first)) ** 2).mean()
        loss = match * tcfg.w_match + proj * tcfg.w_project
        value = float(loss.data)
        if np.isfinite(value):
            opt.zero_grad()
            loss.backward()
            opt.step()
        else:
            log.warning("non-finite loss %r at iteration %d, update skipped", value, it)
        records.append({
            "iteration": it, "loss": value, "match": float(match.data),
            "project": float(proj.data), "p": p,
            "teacher_rate": float(teacher.mean()),
        })
    return records


def next_code_retrieval(net: SteeringPolicyNet, quant: CodebookStack,
                        entries: list[dict], unroll: int) -> np.ndarray:
    """Free-running retrieval score per window.

    Each window is unrolled from the reference starting code with the
    policy's own quantized codes fed back; the score is the fraction of
    steps whose index tuple equals the reference one.
    """
    wins = steering_windows(entries, unroll)
    scores = np.empty(len(wins))
    for w, (e, s) in enumerate(wins):
        ent = entries[e]
        z_prev = ent["z"][s - 1 : s]
        hits = 0
        for t in range(unroll):
            with no_grad():
                out = net(Tensor(z_prev), Tensor(ent["g"][s + t : s + t + 1])).data
            z_prev, idx = quant.quantize(out[:, : net.cfg.code_width])
            hits += int((idx[0] == ent["idx"][s + t]).all())
        scores[w] = hits / unroll
    return scores
