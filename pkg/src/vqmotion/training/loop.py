"""Alternating model-based training.

Each iteration: collect tracking episodes in the real simulator and push
them to replay, fit the dynamics model on replayed windows, then fit the
encoder and policy by re-tracking reference windows through the learned
dynamics. Codebooks are maintained by EMA plus periodic reset of inactive
entries; the codec phase waits until the dynamics model has warmed up.
"""

import json
import logging
import time
from dataclasses import asdict

import numpy as np

from ..codec import Codec, CodecConfig, desk_codec, paper_scale_codec
from ..codec.model import window_features
from ..codec.quantize import _rng_from_state_array, _rng_state_array
from ..data import GaitParams, clip_states, desk_corpus, generate_gait
from ..nn import RAdam, Tensor, no_grad, stack
from ..nn.serialize import read_arrays, write_arrays
from ..sim import Engine, SimDivergence, SimState, planar_biped
from ..world import (
    ReplayBuffer,
    ReplayError,
    WorldConfig,
    WorldModel,
    desk_world,
    paper_scale_world,
    train_world_step,
)
from .config import TrainConfig, desk_train
from .report import TrainReport

log = logging.getLogger(__name__)

Array = np.ndarray


def action_ema(actions: Array, beta: float) -> Array:
    """EMA along the time axis (second to last); the first action seeds it."""
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    actions = np.asarray(actions, dtype=float)
    out = np.empty_like(actions)
    out[..., 0, :] = actions[..., 0, :]
    for t in range(1, actions.shape[-2]):
        out[..., t, :] = (1.0 - beta) * out[..., t - 1, :] + beta * actions[..., t, :]
    return out


class CorpusWindows:
    """Clip corpus prepared for window sampling.

    Features are precomputed per clip; a window of T frames is encoded
    from frames [j, j+T) and tracked against frames [j+1, j+T], so every
    valid start leaves T+1 consecutive frames.
    """

    def __init__(self, clips, engine: Engine, window: int):
        if window % 4:
            raise ValueError("window must be a multiple of the downsampling factor")
        self.window = window
        self.feats = [window_features(engine, c) for c in clips]
        self.states = [clip_states(c) for c in clips]
        self.starts = [
            (i, j) for i, f in enumerate(self.feats) for j in range(f.shape[0] - window)
        ]
        if not self.starts:
            raise ValueError(f"no clip is longer than {window} frames")

    def sample(self, n: int, rng: np.random.Generator):
        """Returns encoder input (B, F, T), targets (B, T, F), start states."""
        picks = rng.integers(0, len(self.starts), size=n)
        enc, tgt, st = [], [], []
        w = self.window
        for p in picks:
            i, j = self.starts[p]
            enc.append(self.feats[i][j : j + w].T)
            tgt.append(self.feats[i][j + 1 : j + w + 1])
            st.append(self.states[i].select([j]))
        return np.stack(enc), np.stack(tgt), SimState.concat(st)


def _json_to_array(payload: dict) -> Array:
    return np.frombuffer(json.dumps(payload).encode(), dtype=np.uint8).astype(np.float64)


def _json_from_array(arr: Array) -> dict:
    return json.loads(arr.astype(np.uint8).tobytes().decode())


class Trainer:
    def __init__(self, cfg: TrainConfig | None = None,
                 codec_cfg: CodecConfig | None = None,
                 world_cfg: WorldConfig | None = None,
                 clips=None, char=None):
        self.cfg = cfg or desk_train()
        if codec_cfg is None:
            codec_cfg = paper_scale_codec() if self.cfg.preset == "paper-scale" else desk_codec()
        if world_cfg is None:
            world_cfg = paper_scale_world() if self.cfg.preset == "paper-scale" else desk_world()
        self.codec_cfg = codec_cfg.scaled(window=self.cfg.window, decay=self.cfg.gamma)
        self.world_cfg = world_cfg
        if self.world_cfg.feature_dim != self.codec_cfg.feature_dim:
            raise ValueError("codec and dynamics model disagree on feature width")
        char = char or planar_biped()
        self.engine = Engine(char)
        if self.engine.feature_dim != self.codec_cfg.feature_dim:
            raise ValueError("character feature width does not match the configs")
        clips = clips if clips is not None else desk_corpus()
        # corpus entries may be parameter records; synthesize those here
        clips = [generate_gait(c) if isinstance(c, GaitParams) else c for c in clips]
        self.corpus = CorpusWindows(clips, self.engine, self.cfg.window)

        self.codec = Codec(self.codec_cfg, seed=self.cfg.seed)
        self.world = WorldModel(self.world_cfg, np.random.default_rng(self.cfg.seed + 10))
        self.replay = ReplayBuffer(self.world_cfg.replay_capacity,
                                   self.world_cfg.feature_dim, self.world_cfg.action_dim)
        self.opt_codec = RAdam(self.codec.parameters(), lr=self.cfg.codec_lr)
        self.opt_world = RAdam(self.world.parameters(), lr=self.cfg.world_lr)
        self._rng = np.random.default_rng(self.cfg.seed + 20)
        self.iteration = 0
        self.episodes_flagged = 0
        self._last_pool: Array | None = None
        self.report = TrainReport(header=self._header())
        self._seed_codebooks()

    def _header(self) -> dict:
        return {
            "preset": self.cfg.preset,
            "train": self.cfg.as_dict(),
            "codec": asdict(self.codec_cfg),
            "world": asdict(self.world_cfg),
        }

    def _seed_codebooks(self) -> None:
        n = min(64, max(8, len(self.corpus.starts)))
        enc, _, _ = self.corpus.sample(n, np.random.default_rng(self.cfg.seed + 30))
        with no_grad():
            v = self.codec.encode(enc)
        self.codec.quant.initialize(v.data)

    # -- phase 1: episode collection in the real simulator -----------------

    def _sample_layers(self) -> int | None:
        if not self.cfg.quantizer_dropout:
            return None
        return self.codec.quant.sample_active_layers(self._rng)

    def collect_wave(self) -> dict:
        """Track sampled reference windows in the simulator, push to replay."""
        cfg = self.cfg
        n = -(-cfg.frames_per_iteration // cfg.window)
        enc, _, st = self.corpus.sample(n, self._rng)
        with no_grad():
            v = self.codec.encode(enc)
            z, _ = self.codec.quant.quantize(v.data, self._sample_layers())
            u = self.codec.upsample(Tensor(z)).data
        episodes = self._rollout_collect(u, st)
        frames = flagged = stored = 0
        rows = []
        for feats, acts, truncated in episodes:
            flagged += truncated
            if acts.shape[0] >= 1:
                self.replay.push(feats, acts)
                frames += acts.shape[0]
                stored += 1
            rows.append(feats)
        self.episodes_flagged += flagged
        return {
            "frames": frames,
            "episodes": stored,
            "flagged": flagged,
            "feats": np.concatenate(rows) if rows else np.zeros((0, self.world_cfg.feature_dim)),
        }

    def _rollout_collect(self, u: Array, st: SimState):
        """Per-env episodes (feats, actions, truncated); divergent envs stop early."""
        n_envs, steps, _ = u.shape
        beta = self.cfg.action_beta
        feats_rows = [[] for _ in range(n_envs)]
        act_rows = [[] for _ in range(n_envs)]
        truncated = [False] * n_envs
        alive = np.arange(n_envs)
        first = self.engine.featurize(st)
        for i in range(n_envs):
            feats_rows[i].append(first[i])
        prev = None
        for t in range(steps):
            obs = self.engine.featurize(st)
            with no_grad():
                a_hat = self.codec.policy(Tensor(obs), Tensor(u[alive, t])).data
            bar = a_hat if prev is None else (1.0 - beta) * prev + beta * a_hat
            pre = st
            while True:
                try:
                    st = self.engine.control_step(pre, bar)
                    break
                except SimDivergence as exc:
                    for env in alive[exc.mask]:
                        truncated[env] = True
                    keep = ~exc.mask
                    alive = alive[keep]
                    if alive.size == 0:
                        st = None
                        break
                    # rerun the survivors from the same pre-step state; the
                    # dynamics are per-env, so the subset result is identical
                    pre = pre.select(keep)
                    bar = bar[keep]
            if st is None:
                break
            nxt = self.engine.featurize(st)
            for k, env in enumerate(alive):
                feats_rows[env].append(nxt[k])
                act_rows[env].append(bar[k])
            prev = bar
        n_act = self.codec_cfg.action_dim
        return [
            (np.array(feats_rows[i]),
             np.array(act_rows[i]) if act_rows[i] else np.zeros((0, n_act)),
             truncated[i])
            for i in range(n_envs)
        ]

    # -- phase 2: dynamics-model fitting -----------------------------------

    def world_phase(self) -> float | None:
        losses = []
        for _ in range(self.cfg.world_steps):
            try:
                batch = self.replay.sample(self.cfg.world_batch, self.cfg.world_horizon,
                                           self._rng)
            except ReplayError:
                log.warning("replay too small for a dynamics batch, phase skipped")
                break
            losses.append(train_world_step(self.world, batch, self.opt_world))
        return float(np.mean(losses)) if losses else None

    # -- phase 3: codec fitting through the learned dynamics ---------------

    def codec_step(self) -> dict:
        """One encoder+policy update by re-tracking windows under the model."""
        cfg = self.cfg
        enc, tgt, _ = self.corpus.sample(cfg.codec_batch, self._rng)
        v = self.codec.encode(enc)
        z_st, s = self.codec.quantize_st(v, self._sample_layers())
        u = self.codec.upsample(z_st)

        state = Tensor(enc[:, :, 0])
        preds, hats, bars = [], [], []
        bar = None
        for t in range(cfg.window):
            a_hat = self.codec.policy(state, u[:, t])
            bar = a_hat if bar is None else bar * (1.0 - cfg.action_beta) + a_hat * cfg.action_beta
            state = self.world.predict(state, bar)
            preds.append(state)
            hats.append(a_hat)
            bars.append(bar)

        err = (stack(preds, axis=1) - Tensor(tgt)) * self.world.inv_std
        recon = (err * err).mean()
        sg_z = Tensor(z_st.data)
        commit = ((v - sg_z) * (v - sg_z)).mean()
        vq_value = float(np.mean((v.data - z_st.data) ** 2))
        a_hat_all = stack(hats, axis=1)
        smooth_gap = a_hat_all - stack(bars, axis=1)
        reg = (smooth_gap * smooth_gap).mean() * cfg.w1 + (a_hat_all * a_hat_all).mean() * cfg.w2

        breakdown = {
            "recon": float(recon.data),
            "commit": float(commit.data),
            "vq": vq_value,
            "reg": float(reg.data),
        }
        breakdown["total"] = (breakdown["recon"] + cfg.beta1 * breakdown["commit"]
                              + cfg.beta2 * breakdown["vq"] + cfg.beta3 * breakdown["reg"])
        if not np.isfinite(breakdown["total"]):
            log.warning("non-finite codec loss %r, update skipped", breakdown["total"])
            breakdown["skipped"] = True
            return breakdown

        loss = recon + commit * cfg.beta1 + reg * cfg.beta3
        self.opt_codec.zero_grad()
        loss.backward()
        self.opt_codec.step()
        self.codec.quant.ema_update(v.data, s)
        self._last_pool = v.data.reshape(-1, self.codec_cfg.code_width)
        return breakdown

    # -- the loop -----------------------------------------------------------

    def run(self, iterations: int | None = None, out_dir=None) -> TrainReport:
        cfg = self.cfg
        n = cfg.iterations if iterations is None else iterations
        t0 = time.time()
        for _ in range(n):
            it = self.iteration
            wave = self.collect_wave()
            self.world.norm.update(wave["feats"])
            world_loss = self.world_phase()

            codec_recs: list[dict] = []
            resets = 0
            if it >= cfg.warmup_iterations:
                for _ in range(cfg.codec_steps):
                    codec_recs.append(self.codec_step())
                if (it + 1) % cfg.reset_every == 0 and self._last_pool is not None:
                    resets = self.codec.quant.reset_inactive(
                        self._last_pool, cfg.min_usage_frac)

            def _mean(key):
                vals = [r[key] for r in codec_recs if not r.get("skipped")]
                return float(np.mean(vals)) if vals else None

            self.report.append({
                "iteration": it,
                "world": world_loss,
                "recon": _mean("recon"),
                "commit": _mean("commit"),
                "vq": _mean("vq"),
                "reg": _mean("reg"),
                "total": _mean("total"),
                "frames": wave["frames"],
                "episodes": wave["episodes"],
                "flagged": wave["flagged"],
                "utilization": [float(x) for x in self.codec.quant.utilization()],
                "resets": resets,
                "wall": time.time() - t0,
            })
            self.iteration = it + 1
            if out_dir is not None and (it + 1) % cfg.checkpoint_every == 0:
                self.save_checkpoint(out_dir)
        if out_dir is not None:
            self.save_checkpoint(out_dir)
        return self.report

    # -- checkpointing -------------------------------------------------------

    def state(self) -> dict[str, Array]:
        out: dict[str, Array] = {}
        for prefix, source in (
            ("codec.", self.codec.state()),
            ("world.", self.world.state()),
            ("opt_codec.", self.opt_codec.state()),
            ("opt_world.", self.opt_world.state()),
            ("replay.", self.replay.state()),
        ):
            for k, arr in source.items():
                out[prefix + k] = arr
        out["trainer.rng"] = _rng_state_array(self._rng)
        out["trainer.counters"] = np.array(
            [self.iteration, self.episodes_flagged], dtype=np.float64)
        out["config.json"] = _json_to_array(self._header())
        return out

    def load_state(self, state: dict[str, Array]) -> None:
        def sub(prefix):
            return {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}

        self.codec.load_state(sub("codec."))
        self.world.load_state(sub("world."))
        self.opt_codec.load_state(sub("opt_codec."))
        self.opt_world.load_state(sub("opt_world."))
        self.replay.load_state(sub("replay."))
        self._rng = _rng_from_state_array(state["trainer.rng"])
        self.iteration = int(state["trainer.counters"][0])
        self.episodes_flagged = int(state["trainer.counters"][1])

    def save_checkpoint(self, out_dir) -> str:
        import os

        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"ckpt_{self.iteration:06d}.seg")
        write_arrays(path, self.state())
        self.report.write_jsonl(os.path.join(out_dir, "report.jsonl"))
        return path

    @classmethod
    def restore(cls, path, clips=None, char=None) -> "Trainer":
        blob = read_arrays(path)
        header = _json_from_array(blob["config.json"])
        trainer = cls(
            TrainConfig(**header["train"]),
            CodecConfig(**header["codec"]),
            WorldConfig(**header["world"]),
            clips=clips, char=char,
        )
        trainer.load_state(blob)
        return trainer


def train_loop(cfg: TrainConfig | None = None, out_dir=None, **kw) -> tuple[Trainer, TrainReport]:
    """Build a trainer, run its full iteration budget, return it + report."""
    trainer = Trainer(cfg, **kw)
    report = trainer.run(out_dir=out_dir)
    return trainer, report
