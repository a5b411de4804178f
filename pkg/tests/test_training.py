"""Alternating training loop: collection, codec updates, maintenance, resume."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqmotion.codec import CodebookStack, desk_codec
from vqmotion.data import GaitParams, generate_gait
from vqmotion.nn import Tensor, no_grad, stack
from vqmotion.training import (
    CorpusWindows,
    TrainConfig,
    Trainer,
    TrainReport,
    action_ema,
    desk_train,
    paper_scale_train,
)
from vqmotion.world import desk_world


def tiny_clips(n=2, duration=3.0):
    return [generate_gait(GaitParams("walk", speed=1.0, duration=duration, seed=s))
            for s in range(1, n + 1)]


def tiny_cfg(**kw):
    base = dict(iterations=4, warmup_iterations=1, frames_per_iteration=96,
                world_steps=2, world_batch=32, world_horizon=4,
                codec_steps=2, codec_batch=4, checkpoint_every=100)
    base.update(kw)
    return desk_train().scaled(**base)


def tiny_trainer(**kw):
    clips = kw.pop("clips", None) or tiny_clips()
    return Trainer(tiny_cfg(**kw), clips=clips)


class TestActionEma:
    def test_beta_one_is_identity(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(5, 3))
        assert np.array_equal(action_ema(a, 1.0), a)

    def test_paper_arithmetic(self):
        out = action_ema(np.array([[0.0], [1.0]]), 0.8)
        assert np.allclose(out, [[0.0], [0.8]], atol=1e-15)

    @settings(deadline=None, max_examples=30)
    @given(beta=st.floats(min_value=0.05, max_value=1.0),
           t=st.integers(min_value=1, max_value=20))
    def test_constant_input_is_fixed_point(self, beta, t):
        a = np.full((t, 4), 2.5)
        assert np.allclose(action_ema(a, beta), a, atol=1e-12)

    def test_step_input_matches_geometric_closed_form(self):
        rng = np.random.default_rng(1)
        a0, b, beta = rng.normal(), rng.normal(), 0.3
        seq = np.full((12, 1), b)
        seq[0, 0] = a0
        out = action_ema(seq, beta)
        t = np.arange(12)
        expected = b + (1 - beta) ** t * (a0 - b)
        assert np.allclose(out[:, 0], expected, atol=1e-12)

    def test_batched_matches_per_row(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 7, 2))
        batched = action_ema(a, 0.8)
        rows = np.stack([action_ema(a[i], 0.8) for i in range(3)])
        assert np.array_equal(batched, rows)

    def test_invalid_beta(self):
        with pytest.raises(ValueError):
            action_ema(np.zeros((3, 1)), 0.0)
        with pytest.raises(ValueError):
            action_ema(np.zeros((3, 1)), 1.2)


class TestCorpusWindows:
    def test_window_starts_cover_clip(self):
        tr = tiny_trainer()
        # 3 s at 20 fps = 60 frames; window 24 leaves starts 0..35 per clip
        assert len(tr.corpus.starts) == 2 * 36

    def test_sample_shapes_and_alignment(self):
        tr = tiny_trainer()
        enc, tgt, st0 = tr.corpus.sample(5, np.random.default_rng(0))
        assert enc.shape == (5, 58, 24)
        assert tgt.shape == (5, 24, 58)
        assert st0.batch == 5
        # targets are the encoder input shifted one frame left
        assert np.array_equal(enc[:, :, 1:], np.transpose(tgt, (0, 2, 1))[:, :, :-1])

    def test_too_short_corpus_rejected(self):
        with pytest.raises(ValueError, match="longer"):
            tiny_trainer(clips=tiny_clips(duration=1.2))


class TestCollection:
    def test_full_windows_record_24_transitions(self):
        tr = tiny_trainer()
        wave = tr.collect_wave()
        assert wave["flagged"] == 0
        assert wave["frames"] == wave["episodes"] * 24
        snap = tr.replay.snapshot()
        counts = np.bincount(snap["episode"] - snap["episode"].min())
        assert np.all(counts == 24)

    def test_collection_deterministic_for_seed(self):
        a, b = tiny_trainer(), tiny_trainer()
        wa, wb = a.collect_wave(), b.collect_wave()
        assert wa["frames"] == wb["frames"]
        sa, sb = a.replay.snapshot(), b.replay.snapshot()
        assert np.array_equal(sa["feats"], sb["feats"])
        assert np.array_equal(sa["actions"], sb["actions"])

    def test_divergent_env_truncated_and_flagged(self):
        tr = tiny_trainer()
        _, _, st0 = tr.corpus.sample(3, np.random.default_rng(0))
        st0.root_vel[1, 0] = np.inf  # env 1 blows up on its first step
        u = np.zeros((3, 24, tr.codec_cfg.code_width))
        episodes = tr._rollout_collect(u, st0)
        assert [e[2] for e in episodes] == [False, True, False]
        assert episodes[1][1].shape[0] == 0  # no transitions survived
        for i in (0, 2):
            assert episodes[i][1].shape == (24, 6)
            assert episodes[i][0].shape == (25, 58)
            assert np.all(np.isfinite(episodes[i][0]))

    def test_survivors_match_clean_rollout(self):
        # envs that never diverge record the same data whether or not a
        # neighbor env blew up mid-batch
        tr = tiny_trainer()
        _, _, st0 = tr.corpus.sample(3, np.random.default_rng(0))
        u = np.zeros((3, 24, tr.codec_cfg.code_width))
        clean = tr._rollout_collect(u, st0.copy())
        broken = st0.copy()
        broken.root_vel[1, 0] = np.inf
        mixed = tr._rollout_collect(u, broken)
        for i in (0, 2):
            assert np.array_equal(clean[i][0], mixed[i][0])
            assert np.array_equal(clean[i][1], mixed[i][1])

    def test_smoothed_actions_are_actuated(self):
        # recorded actions follow the EMA recurrence of the raw policy outputs
        tr = tiny_trainer()
        rng = np.random.default_rng(3)
        last = tr.codec.policy.expert_nets[0].layers[-1]
        last.w.data[...] = rng.normal(scale=0.05, size=last.w.data.shape)
        _, _, st0 = tr.corpus.sample(2, np.random.default_rng(1))
        u = rng.normal(size=(2, 8, tr.codec_cfg.code_width))
        episodes = tr._rollout_collect(u, st0)
        feats, acts, _ = episodes[0]
        raw = []
        state = st0.select([0])
        eng = tr.engine
        for t in range(8):
            obs = eng.featurize(state)
            with no_grad():
                raw.append(tr.codec.policy(Tensor(obs), Tensor(u[:1, t])).data[0])
            state = eng.control_step(state, acts[t][None])
        assert np.allclose(acts, action_ema(np.array(raw), tr.cfg.action_beta), atol=1e-12)


class TestCodecStep:
    def prepared(self, **kw):
        tr = tiny_trainer(**kw)
        for _ in range(2):
            wave = tr.collect_wave()
            tr.world.norm.update(wave["feats"])
            tr.world_phase()
        return tr

    def test_breakdown_sums_and_identity(self):
        tr = self.prepared()
        rec = tr.codec_step()
        total = (rec["recon"] + tr.cfg.beta1 * rec["commit"]
                 + tr.cfg.beta2 * rec["vq"] + tr.cfg.beta3 * rec["reg"])
        assert abs(rec["total"] - total) < 1e-10
        assert abs(rec["commit"] - rec["vq"]) < 1e-12

    def test_reported_recon_matches_independent_replay(self):
        # one valid window start makes the sampled batch deterministic
        clips = [generate_gait(GaitParams("walk", speed=1.0, duration=1.25, seed=3))]
        tr = self.prepared(clips=clips, frames_per_iteration=24, codec_batch=2,
                           quantizer_dropout=False, world_batch=16, world_horizon=2)
        enc, tgt, _ = tr.corpus.sample(2, np.random.default_rng(0))
        with no_grad():
            v = tr.codec.encode(enc)
            z, _ = tr.codec.quant.quantize(v.data)
            u = tr.codec.upsample(Tensor(z))
            state = Tensor(enc[:, :, 0])
            preds = []
            bar = None
            for t in range(tr.cfg.window):
                a = tr.codec.policy(state, u[:, t])
                bar = a if bar is None else bar * (1 - tr.cfg.action_beta) + a * tr.cfg.action_beta
                state = tr.world.predict(state, bar)
                preds.append(state)
            err = (stack(preds, axis=1) - Tensor(tgt)) * tr.world.inv_std
            expected = float((err * err).mean().data)
        rec = tr.codec_step()
        assert rec["recon"] == pytest.approx(expected, abs=1e-10)

    def test_updates_touch_codec_but_not_world(self):
        tr = self.prepared()
        world_before = {k: v.copy() for k, v in tr.world.state().items()}
        enc_before = {k: v.copy() for k, v in tr.codec.state().items()
                      if not k.startswith("quant.")}
        entries_before = tr.codec.quant.entries.copy()
        tr.codec_step()
        assert all(np.array_equal(v, tr.world.state()[k]) for k, v in world_before.items())
        after = tr.codec.state()
        assert any(not np.array_equal(v, after[k]) for k, v in enc_before.items())
        assert not np.array_equal(entries_before, tr.codec.quant.entries)
        # frozen zero rows of the residual layers survive the EMA update
        assert np.all(tr.codec.quant.entries[1:, 0] == 0.0)

    def test_nonfinite_loss_skips_optimizer(self, caplog):
        tr = self.prepared()
        tr.world.net.layers[0].w.data[0, 0] = np.nan
        steps_before = tr.opt_codec.step_count
        with caplog.at_level(logging.WARNING):
            rec = tr.codec_step()
        assert rec.get("skipped")
        assert tr.opt_codec.step_count == steps_before


class TestCodebookMaintenance:
    def test_constant_assignment_converges_geometrically(self):
        stack_ = CodebookStack(1, 2, 3, decay=0.99, seed=0)
        x = np.array([1.0, -2.0, 0.5])
        stack_.initialize(np.random.default_rng(0).normal(size=(16, 3)))
        for _ in range(1000):
            _, s = stack_.quantize(x[None])
            stack_.ema_update(x[None], s)
        idx = stack_.quantize(x[None])[1][0, 0]
        assert np.max(np.abs(stack_.entries[0, idx] - x)) < 1e-3

    def test_zero_decay_jumps_to_batch_mean(self):
        stack_ = CodebookStack(1, 2, 2, decay=0.0, seed=0)
        stack_.initialize(np.random.default_rng(1).normal(size=(16, 2)))
        batch = np.array([[5.0, 5.0], [7.0, 7.0]])
        _, s = stack_.quantize(batch)
        if len(np.unique(s[:, 0])) == 1:  # both rows on one entry
            stack_.ema_update(batch, s)
            assert np.allclose(stack_.entries[0, s[0, 0]], batch.mean(axis=0), atol=1e-12)
        else:
            stack_.ema_update(batch, s)
            for r in range(2):
                assert np.allclose(stack_.entries[0, s[r, 0]], batch[r], atol=1e-12)

    def test_poisoned_entry_reset_during_training(self):
        tr = tiny_trainer(iterations=8, warmup_iterations=1, reset_every=3)
        tr.codec.quant.entries[0, 7] = 1e6  # far outside any encoder output
        tr.codec.quant.usage[0, 7] = 0.0
        tr.run(8)
        assert np.max(np.abs(tr.codec.quant.entries[0, 7])) < 1e3

    def test_report_rejects_bad_utilization(self):
        rep = TrainReport(header={})
        with pytest.raises(ValueError):
            rep.append({"utilization": [0.5, 1.2]})


class TestLoop:
    def test_smoke_run_report_shape(self):
        tr = tiny_trainer(iterations=4)
        rep = tr.run()
        assert len(rep.records) == 4
        assert [r["iteration"] for r in rep.records] == [0, 1, 2, 3]
        warm = rep.records[0]
        assert warm["recon"] is None and warm["world"] is not None
        late = rep.records[-1]
        assert late["recon"] is not None
        assert all(0 <= u <= 1 for u in late["utilization"])
        assert late["wall"] > 0

    def test_replay_untouched_by_codec_phase(self):
        tr = tiny_trainer()
        wave = tr.collect_wave()
        tr.world.norm.update(wave["feats"])
        tr.world_phase()
        size = len(tr.replay)
        snap = tr.replay.snapshot()
        tr.codec_step()
        assert len(tr.replay) == size
        assert np.array_equal(tr.replay.snapshot()["feats"], snap["feats"])

    def test_world_loss_improves_under_stationary_policy(self):
        # codec updates never kick in, so collection stays stationary and
        # the dynamics fit must improve on average
        tr = tiny_trainer(iterations=14, warmup_iterations=99,
                          world_steps=10, world_batch=64)
        rep = tr.run()
        losses = [r["world"] for r in rep.records]
        assert np.mean(losses[-3:]) < 0.5 * np.mean(losses[:3])

    def test_resume_from_state_is_bitwise(self):
        a = tiny_trainer(iterations=6)
        a.run(3)
        carried = {k: v.copy() for k, v in a.state().items()}
        b = tiny_trainer(iterations=6)
        b.load_state(carried)
        ra = a.run(2)  # records accumulate: iterations 0..4 on a, 3..4 on b
        rb = b.run(2)
        strip = lambda rec: {k: v for k, v in rec.items() if k != "wall"}
        assert [strip(r) for r in ra.records[3:]] == [strip(r) for r in rb.records]
        sa, sb = a.state(), b.state()
        for k, v in sa.items():
            assert np.array_equal(v, sb[k]), k

    def test_restore_from_file(self, tmp_path):
        a = tiny_trainer(iterations=4)
        a.run(2)
        path = a.save_checkpoint(tmp_path)
        b = Trainer.restore(path, clips=tiny_clips())
        assert b.iteration == 2
        ra, rb = a.run(2), b.run(2)
        assert [r["total"] for r in ra.records[2:]] == [r["total"] for r in rb.records]
        report = TrainReport.read_jsonl(tmp_path / "report.jsonl")
        assert report.header["preset"] == "desk"

    def test_paper_scale_header_echo(self):
        cfg = paper_scale_train()
        assert cfg.codec_lr == 1e-5
        clips = tiny_clips()
        tr = Trainer(cfg.scaled(iterations=1, frames_per_iteration=24), clips=clips)
        assert tr.report.header["preset"] == "paper-scale"
        assert tr.report.header["train"]["codec_lr"] == 1e-5
        assert tr.report.header["codec"]["n_codebooks"] == 8
        assert tr.report.header["codec"]["codebook_size"] == 512

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(action_beta=0.0)
        with pytest.raises(ValueError):
            TrainConfig(gamma=1.0)
        with pytest.raises(ValueError):
            TrainConfig(beta1=-0.1)
        with pytest.raises(ValueError):
            TrainConfig(window=22)

    def test_report_jsonl_round_trip(self, tmp_path):
        rep = TrainReport(header={"preset": "desk", "x": 1})
        rep.append({"iteration": 0, "total": 1.5, "utilization": [0.5]})
        rep.append({"iteration": 1, "total": None, "utilization": [1.0]})
        path = tmp_path / "r.jsonl"
        rep.write_jsonl(path)
        back = TrainReport.read_jsonl(path)
        assert back.header == rep.header
        assert back.records == rep.records
        with pytest.raises(ValueError, match="header"):
            bad = tmp_path / "bad.jsonl"
            bad.write_text('{"iteration": 0}\n')
            TrainReport.read_jsonl(bad)
