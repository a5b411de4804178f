import json
import logging
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqmotion.apps import (
    PACK_PRESET_N,
    PromptPack,
    SteeringServer,
    TrackReport,
    body_positions,
    code_matching_stream,
    describe_gait,
    emit_prompt_pack,
    error_line,
    example_line,
    frame_line,
    latent_motion_matching,
    load_codec_checkpoint,
    load_gpt_checkpoint,
    load_steering_checkpoint,
    matching_positions,
    metrics,
    parse_client_line,
    parse_index_response,
    qualified_positions,
    save_codec_checkpoint,
    save_gpt_checkpoint,
    save_steering_checkpoint,
    serialize_indices,
    similarity_align,
    states_to_clip,
    track,
    write_prompt_pack,
)
from vqmotion.codec import Codec, desk_codec, fit_codebooks, window_features
from vqmotion.data import GaitParams, MotionClip, clip_states, desk_corpus, generate_gait
from vqmotion.data.gaits import SPEED_BOUNDS
from vqmotion.gpt import GptNet, desk_gpt, generate
from vqmotion.nn import Tensor, no_grad
from vqmotion.nn.serialize import write_arrays
from vqmotion.sim import Engine, planar_biped
from vqmotion.steering import SteeringPolicyNet, SteeringRuntime, desk_steer
from vqmotion.training import Trainer, desk_train

FPS = 20.0


@pytest.fixture(scope="module")
def engine():
    return Engine(planar_biped())


@pytest.fixture(scope="module")
def walk_clip():
    return generate_gait(GaitParams("walk", 1.0, 1.5, duration=10.0, seed=3))


@pytest.fixture(scope="module")
def sway_clip():
    return generate_gait(GaitParams("sway", 0.0, 0.6, duration=4.0, seed=5))


@pytest.fixture(scope="module")
def fitted_codec(engine, walk_clip):
    codec = Codec(desk_codec(), seed=0)
    feats = window_features(engine, walk_clip)
    t4 = feats.shape[0] - feats.shape[0] % 4
    with no_grad():
        v = codec.encode(feats[:t4].T[None]).data
    fit_codebooks(codec.quant, v.reshape(-1, codec.cfg.code_width), passes=5, seed=1)
    return codec


def encode_clip(codec, engine, clip, layers=None):
    usable = clip.n_frames - clip.n_frames % 4
    feats = window_features(engine, clip.window(0, usable))
    with no_grad():
        v = codec.encode(feats.T[None]).data
    z, s = codec.quant.quantize(v, active_layers=layers)
    return z[0], s[0]


def rotate_clip(clip, alpha):
    """Rigid world rotation about the origin; joints untouched."""
    c, s = np.cos(alpha), np.sin(alpha)
    rot = np.array([[c, -s], [s, c]])
    frames = clip.frames.copy()
    frames[:, 0:2] = frames[:, 0:2] @ rot.T
    frames[:, 2] += alpha
    return MotionClip(clip.fps, frames)


class TestTrackReport:
    def test_as_dict_keys(self):
        r = TrackReport(0.1, 0.05, 1.0, 2.0, 0.5)
        assert set(r.as_dict()) == {
            "mpbpe", "aligned", "accel", "smooth_mean", "smooth_std", "diverged"}
        assert r.as_dict()["diverged"] is False

    def test_with_divergence(self):
        r = TrackReport(0.1, 0.05, 1.0, 2.0, 0.5)
        flagged = r.with_divergence(True)
        assert flagged.diverged and not r.diverged
        assert flagged.mpbpe == r.mpbpe

    @pytest.mark.parametrize("field", ["mpbpe", "aligned", "accel",
                                       "smooth_mean", "smooth_std"])
    def test_rejects_bad_values(self, field):
        kw = dict(mpbpe=0.0, aligned=0.0, accel=0.0, smooth_mean=0.0, smooth_std=0.0)
        kw[field] = -0.1
        with pytest.raises(ValueError):
            TrackReport(**kw)
        kw[field] = float("nan")
        with pytest.raises(ValueError):
            TrackReport(**kw)


class TestSimilarityAlign:
    def test_recovers_known_transform(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1, (40, 2))
        c, s = np.cos(0.4), np.sin(0.4)
        rot = np.array([[c, -s], [s, c]])
        y = 0.7 * x @ rot.T + np.array([1.0, 2.0])
        out = similarity_align(x, y)
        assert np.abs(out - y).max() < 1e-9

    def test_no_reflection(self):
        # a mirrored set cannot be matched by a proper rotation
        rng = np.random.default_rng(1)
        x = rng.normal(0, 1, (40, 2))
        y = x * np.array([-1.0, 1.0])
        out = similarity_align(x, y)
        assert np.abs(out - y).max() > 1e-3

    def test_degenerate_source_translates(self):
        x = np.full((10, 2), 3.0)
        y = np.arange(20, dtype=np.float64).reshape(10, 2)
        out = similarity_align(x, y)
        assert np.array_equal(out, x - x.mean(axis=0) + y.mean(axis=0))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            similarity_align(np.zeros((3, 2)), np.zeros((4, 2)))


class TestMetrics:
    @pytest.mark.parametrize("family,speed", [("walk", 1.0), ("squat", 0.0),
                                              ("turn", 0.7)])
    def test_identical_clips_score_zero(self, engine, family, speed):
        clip = generate_gait(GaitParams(family, speed, 1.2, duration=2.0, seed=7))
        r = metrics(engine, clip, clip)
        assert r.mpbpe == 0.0
        assert r.accel == 0.0
        assert r.smooth_mean == 0.0
        assert r.smooth_std == 0.0
        assert r.aligned < 1e-9  # SVD noise only
        assert not r.diverged

    def test_translation_offset(self, engine, sway_clip):
        frames = sway_clip.frames.copy()
        frames[:, 0] += 0.1
        shifted = MotionClip(sway_clip.fps, frames)
        r = metrics(engine, shifted, sway_clip)
        assert abs(r.mpbpe - 0.1) < 1e-12
        assert r.aligned < 1e-9      # alignment removes the shift
        assert r.accel < 1e-12       # constant offsets cancel in differences
        assert r.smooth_mean < 1e-12

    def test_rigid_rotation_aligns_out(self, engine, sway_clip):
        r = metrics(engine, rotate_clip(sway_clip, 0.3), sway_clip)
        assert r.mpbpe > 1e-3
        assert r.aligned < 1e-9

    def test_mpbpe_brute_force(self, engine, walk_clip, sway_clip):
        n = min(walk_clip.n_frames, sway_clip.n_frames)
        a, b = walk_clip.window(0, n), sway_clip.window(0, n)
        r = metrics(engine, a, b)
        pa, pb = body_positions(engine, a), body_positions(engine, b)
        total = 0.0
        for t in range(pa.shape[0]):
            for j in range(pa.shape[1]):
                total += float(np.sqrt(((pa[t, j] - pb[t, j]) ** 2).sum()))
        assert abs(r.mpbpe - total / (pa.shape[0] * pa.shape[1])) < 1e-12

    def test_two_frame_clip_skips_smoothness(self, engine, sway_clip):
        a = sway_clip.window(0, 2)
        b = sway_clip.window(1, 2)
        r = metrics(engine, a, b)
        assert r.accel == 0.0 and r.smooth_mean == 0.0 and r.smooth_std == 0.0
        assert r.mpbpe > 0.0

    def test_length_mismatch(self, engine, sway_clip):
        with pytest.raises(ValueError, match="length"):
            metrics(engine, sway_clip.window(0, 10), sway_clip.window(0, 12))

    def test_fps_mismatch(self, engine, sway_clip):
        other = MotionClip(25.0, sway_clip.frames)
        with pytest.raises(ValueError, match="fps"):
            metrics(engine, other, sway_clip)


class TestStatesToClip:
    def test_round_trip(self, sway_clip):
        states = clip_states(sway_clip)
        rows = [states.select([i]) for i in range(sway_clip.n_frames)]
        back = states_to_clip(rows, sway_clip.fps)
        assert np.array_equal(back.frames, sway_clip.frames)

    def test_rejects_batches(self, sway_clip):
        with pytest.raises(ValueError, match="batch"):
            states_to_clip([clip_states(sway_clip)], sway_clip.fps)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            states_to_clip([], FPS)


class TestTrack:
    def test_matches_manual_windowed_loop(self, fitted_codec, engine, walk_clip):
        from vqmotion.codec import decode_sim

        clip = walk_clip.window(0, 80)
        sim_clip, report = track(fitted_codec, engine, clip, window=8)

        # independent replay: same windows, state carried across boundaries
        states = [clip_states(clip).select([0])]
        for start in range(0, 80, 8):
            feats = window_features(engine, clip.window(start, 8))
            with no_grad():
                v = fitted_codec.encode(feats.T[None])
            z, _ = fitted_codec.quant.quantize(v.data)
            out, _ = decode_sim(fitted_codec.upsampler, fitted_codec.policy,
                                engine, z, states[-1])
            states.extend(out[1:])
        manual = states_to_clip(states[:80], clip.fps)
        assert np.array_equal(sim_clip.frames, manual.frames)
        r2 = metrics(engine, manual, clip.window(0, 80))
        assert report.mpbpe == r2.mpbpe

    def test_report_fields(self, fitted_codec, engine, walk_clip):
        _, report = track(fitted_codec, engine, walk_clip.window(0, 40))
        for v in (report.mpbpe, report.aligned, report.accel):
            assert np.isfinite(v) and v >= 0.0

    def test_too_short(self, fitted_codec, engine, sway_clip):
        with pytest.raises(ValueError, match="too short"):
            track(fitted_codec, engine, sway_clip.window(0, 3))

    def test_window_validation(self, fitted_codec, engine, sway_clip):
        with pytest.raises(ValueError, match="multiple of 4"):
            track(fitted_codec, engine, sway_clip, window=6)


class TestMatching:
    def test_qualified_positions_hand_case(self):
        z = np.array([[0.0], [1.0], [1.05], [9.0]])
        out = qualified_positions(z, 0.5)
        assert [list(o) for o in out] == [[], [2], [1], []]

    def test_needs_two_codes(self):
        with pytest.raises(ValueError, match="at least 2"):
            qualified_positions(np.zeros((1, 4)), 1.0)

    def test_theta_zero_pure_loop(self):
        z = np.zeros((5, 3))  # identical codes, yet theta=0 admits no jump
        gen = matching_positions(z, 0.0, seed=0)
        seq = [next(gen) for _ in range(12)]
        assert [k for k, _ in seq] == [i % 5 for i in range(12)]
        assert all(j is None for _, j in seq)

    def test_successor_rule(self):
        rng = np.random.default_rng(2)
        z = rng.normal(0, 1, (7, 4))
        gen = matching_positions(z, 1e9, seed=3)
        expect = 0
        for _ in range(500):
            k, j = next(gen)
            assert k == expect
            assert j is not None and j != k
            expect = (j + 1) % 7

    def test_jump_targets_uniform(self):
        # identical codes qualify every other position; per-source target
        # counts over 1e4 jumps must sit within 3 sigma of uniform
        n = 5
        z = np.zeros((n, 3))
        gen = matching_positions(z, 1.0, seed=11)
        counts = np.zeros((n, n))
        for _ in range(10_000):
            k, j = next(gen)
            counts[k, j] += 1
        for k in range(n):
            row = counts[k]
            assert row[k] == 0
            total = row.sum()
            expect = total / (n - 1)
            sigma = np.sqrt(total * (1 / (n - 1)) * (1 - 1 / (n - 1)))
            others = np.delete(row, k)
            assert np.abs(others - expect).max() < 3 * sigma

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(4)
        z = rng.normal(0, 1, (8, 4))
        a = matching_positions(z, 1e9, seed=9)
        b = matching_positions(z, 1e9, seed=9)
        c = matching_positions(z, 1e9, seed=10)
        sa = [next(a) for _ in range(300)]
        sb = [next(b) for _ in range(300)]
        sc = [next(c) for _ in range(300)]
        assert sa == sb
        assert sa != sc

    def test_no_qualified_pair_warns_and_loops(self, caplog):
        z = np.arange(12.0).reshape(4, 3)
        with caplog.at_level(logging.WARNING, logger="vqmotion.apps.matching"):
            gen = matching_positions(z, 1e-9, seed=0)
            seq = [next(gen) for _ in range(8)]
        assert "simply loop" in caplog.text
        assert [k for k, _ in seq] == [i % 4 for i in range(8)]

    def test_stream_length_mismatch(self):
        gen = code_matching_stream(np.zeros((5, 3)), np.zeros((4, 2), dtype=int),
                                   1.0, seed=0)
        with pytest.raises(ValueError, match="disagree"):
            next(gen)

    def test_latent_motion_matching_plays_in_order(self, fitted_codec, engine,
                                                   walk_clip):
        _, s = encode_clip(fitted_codec, engine, walk_clip)
        stream = latent_motion_matching(fitted_codec, engine, walk_clip,
                                        theta=0.0, seed=0)
        got = np.stack([next(stream) for _ in range(s.shape[0])])
        assert np.array_equal(got, s)

    def test_latent_motion_matching_too_short(self, fitted_codec, engine, sway_clip):
        with pytest.raises(ValueError, match="at least 2 codes"):
            latent_motion_matching(fitted_codec, engine, sway_clip.window(0, 7),
                                   theta=1.0)


class TestTextio:
    def test_single_layer_form(self):
        assert serialize_indices(np.array([3, 0, 511])) == "3, 0, 511"

    def test_multi_layer_form(self):
        s = np.array([[1, 2], [3, 4]])
        assert serialize_indices(s) == "1:2, 3:4"

    @pytest.mark.parametrize("bad", [np.zeros((0,), dtype=int),
                                     np.array([1.5, 2.0]),
                                     np.array([-1, 3])])
    def test_serialize_rejects(self, bad):
        with pytest.raises(ValueError):
            serialize_indices(bad)

    def test_parse_freeform_response(self):
        text = ("297, 471, 246, 463, 463 - Person walks forward\n"
                "511, 456 - Person bends knees to sit down\n"
                "206, 274, 370 - Person sits on the ground\n"
                "41, 41, 370, 370 - Person stands back up from sitting\n")
        got = parse_index_response(text)
        assert got.tolist() == [297, 471, 246, 463, 463, 511, 456,
                                206, 274, 370, 41, 41, 370, 370]

    def test_parse_tuples(self):
        got = parse_index_response("answer: [5:1:0, 63:2:7]", size=64)
        assert got.tolist() == [[5, 1, 0], [63, 2, 7]]

    def test_no_digits(self):
        with pytest.raises(ValueError, match="no index sequence"):
            parse_index_response("nothing to see here")

    def test_out_of_range_names_position(self):
        with pytest.raises(ValueError, match=r"512 at position 2"):
            parse_index_response("3, 9, 512, 1")

    def test_out_of_range_names_layer(self):
        with pytest.raises(ValueError, match=r"position 1 layer 1"):
            parse_index_response("1:2, 3:900", size=512)

    def test_mixed_arity(self):
        with pytest.raises(ValueError, match="mixed tuple arity"):
            parse_index_response("1:2, 3")

    def test_minus_signs_are_not_tokens(self):
        # the scanner keeps digit runs only; a leading minus is prose
        assert parse_index_response("-3, 4").tolist() == [3, 4]

    @given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 4))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, seed, k, q):
        rng = np.random.default_rng(seed)
        s = rng.integers(0, 512, size=(k, q))
        flat = s[:, 0] if q == 1 else s
        got = parse_index_response(serialize_indices(flat))
        assert np.array_equal(got, flat)
        assert got.dtype == np.int64


class TestPrompts:
    def test_example_line_form(self):
        line = example_line("a figure walks forward", np.array([5, 7]))
        assert line == "a figure walks forward [5, 7]"

    def test_pack_round_trip(self, fitted_codec, engine):
        params = [GaitParams("walk", 1.0, 1.5, duration=2.0, seed=20),
                  GaitParams("sway", 0.0, 0.6, duration=2.0, seed=21),
                  GaitParams("squat", 0.0, 0.5, duration=2.0, seed=22)]
        dataset = [(describe_gait(p), generate_gait(p)) for p in params]
        pack = emit_prompt_pack(dataset, fitted_codec, engine, n=3)
        assert pack.count == 3
        for line in pack.lines:
            got = parse_index_response(line, fitted_codec.cfg.codebook_size)
            assert got.ndim == 1 and got.min() >= 0
        _, s = encode_clip(fitted_codec, engine, dataset[0][1], layers=1)
        first = parse_index_response(pack.lines[0], fitted_codec.cfg.codebook_size)
        assert np.array_equal(first, s[:, 0])

    def test_budget_truncates_whole_lines(self, fitted_codec, engine):
        params = [GaitParams("walk", 1.0, 1.5, duration=2.0, seed=30),
                  GaitParams("run", 2.0, 2.5, duration=2.0, seed=31)]
        dataset = [(describe_gait(p), generate_gait(p)) for p in params]
        full = emit_prompt_pack(dataset, fitted_codec, engine, n=2)
        assert full.count == 2
        budget = len(full.preamble) + 1 + len(full.lines[0]) + 1 + 3
        cut = emit_prompt_pack(dataset, fitted_codec, engine, n=2,
                               char_budget=budget)
        assert cut.lines == full.lines[:1]
        assert len(cut.text()) <= budget

    def test_budget_too_small(self, fitted_codec, engine, sway_clip):
        with pytest.raises(ValueError, match="too small"):
            emit_prompt_pack([("a figure sways in place", sway_clip)],
                             fitted_codec, engine, char_budget=10)

    def test_digits_in_description_rejected(self, fitted_codec, engine, sway_clip):
        with pytest.raises(ValueError, match="round trip"):
            emit_prompt_pack([("sways 3 times", sway_clip)], fitted_codec, engine)

    def test_positive_count_required(self, fitted_codec, engine):
        with pytest.raises(ValueError, match="positive"):
            emit_prompt_pack([], fitted_codec, engine, n=0)

    def test_preset_count(self):
        assert PACK_PRESET_N == 1600

    def test_mean_line_chars(self):
        pack = PromptPack(lines=("ab [1]", "abcd [2]"), char_budget=100)
        assert pack.mean_line_chars == (6 + 8) / 2
        assert PromptPack(lines=(), char_budget=1).mean_line_chars == 0.0

    def test_write_pack(self, tmp_path, fitted_codec, engine, sway_clip):
        pack = emit_prompt_pack([("a figure sways in place", sway_clip)],
                                fitted_codec, engine)
        out = tmp_path / "pack.txt"
        write_prompt_pack(out, pack)
        assert out.read_text(encoding="utf-8") == pack.text()
        assert pack.text().startswith(pack.preamble)

    def test_descriptions_digit_free_across_corpus(self):
        for params in desk_corpus():
            desc = describe_gait(params)
            assert not any(ch.isdigit() for ch in desc), desc

    @given(st.sampled_from(sorted(SPEED_BOUNDS)), st.integers(0, 10_000),
           st.floats(0.2, 4.0), st.floats(0.2, 2.0), st.floats(0.1, 3.0))
    @settings(max_examples=80, deadline=None)
    def test_descriptions_digit_free_everywhere(self, family, sp, stride, amp, rate):
        lo, hi = SPEED_BOUNDS[family]
        speed = lo + (hi - lo) * (sp / 10_000)
        params = GaitParams(family, speed, stride, amplitude=amp,
                            turn_rate=rate, duration=1.2, seed=0)
        assert not any(ch.isdigit() for ch in describe_gait(params))


class TestCheckpoints:
    def test_codec_round_trip(self, tmp_path, fitted_codec, engine, walk_clip):
        path = tmp_path / "codec.seg"
        save_codec_checkpoint(path, fitted_codec)
        loaded = load_codec_checkpoint(path)
        assert loaded.cfg == fitted_codec.cfg
        z0, s0 = encode_clip(fitted_codec, engine, walk_clip.window(0, 24))
        z1, s1 = encode_clip(loaded, engine, walk_clip.window(0, 24))
        assert np.array_equal(z0, z1)
        assert np.array_equal(s0, s1)

    def test_codec_from_trainer_checkpoint(self, tmp_path, engine, walk_clip,
                                           sway_clip):
        cfg = desk_train().scaled(iterations=1, frames_per_iteration=64)
        trainer = Trainer(cfg, clips=[walk_clip.window(0, 60), sway_clip])
        path = trainer.save_checkpoint(tmp_path)
        loaded = load_codec_checkpoint(path)
        z0, s0 = encode_clip(trainer.codec, engine, walk_clip.window(0, 24))
        z1, s1 = encode_clip(loaded, engine, walk_clip.window(0, 24))
        assert np.array_equal(z0, z1)
        assert np.array_equal(s0, s1)

    def test_rejects_plain_arrays(self, tmp_path):
        path = tmp_path / "junk.seg"
        write_arrays(path, {"w": np.zeros(3)})
        with pytest.raises(ValueError, match="config"):
            load_codec_checkpoint(path)

    def test_steering_round_trip(self, tmp_path):
        cfg = desk_steer().scaled(code_width=8, expert_width=16, expert_depth=2,
                                  gating_width=8, projector_width=8)
        net = SteeringPolicyNet(cfg, seed=4)
        rng = np.random.default_rng(0)
        net.set_code_stats(rng.normal(0, 1, 8), rng.uniform(0.5, 2.0, 8))
        path = tmp_path / "steer.seg"
        save_steering_checkpoint(path, net)
        loaded = load_steering_checkpoint(path)
        assert loaded.cfg == cfg
        z = Tensor(rng.normal(0, 1, (3, 8)))
        g = Tensor(rng.normal(0, 1, (3, cfg.task_dim)))
        with no_grad():
            a = net.forward(z, g)
            b = loaded.forward(z, g)
        assert np.array_equal(a.data, b.data)

    def test_gpt_round_trip(self, tmp_path):
        net = GptNet(desk_gpt().scaled(width=32, n_temporal=1, n_depth=1,
                                       n_heads=2), seed=6)
        path = tmp_path / "gpt.seg"
        save_gpt_checkpoint(path, net)
        loaded = load_gpt_checkpoint(path)
        assert loaded.cfg == net.cfg
        a = generate(net, 6, rng=np.random.default_rng(3))
        b = generate(loaded, 6, rng=np.random.default_rng(3))
        assert np.array_equal(a, b)


class TestServeParsing:
    def test_input_normalizes_heading(self):
        kind, heading, speed = parse_client_line(
            '{"type": "input", "heading": [3, 4], "speed": 1.25}')
        assert kind == "input"
        assert np.allclose(heading, [0.6, 0.8], atol=1e-15)
        assert speed == 1.25

    def test_unit_heading_preserved(self):
        _, heading, _ = parse_client_line(
            '{"type": "input", "heading": [0, 1], "speed": 0}')
        assert np.array_equal(heading, [0.0, 1.0])

    def test_zero_heading_passes_through(self):
        _, heading, _ = parse_client_line(
            '{"type": "input", "heading": [0, 0], "speed": 0.5}')
        assert np.array_equal(heading, [0.0, 0.0])

    def test_reset_and_pause(self):
        assert parse_client_line('{"type": "reset"}') == ("reset",)
        assert parse_client_line('{"type": "pause"}') == ("pause",)

    @pytest.mark.parametrize("line,msg", [
        ("not json", "bad json"),
        ("[1, 2]", "object with a type"),
        ('{"speed": 1}', "object with a type"),
        ('{"type": "dance"}', "unknown message type"),
        ('{"type": "input", "speed": 1}', "heading"),
        ('{"type": "input", "heading": [1], "speed": 1}', "two finite"),
        ('{"type": "input", "heading": [1, null], "speed": 1}', "heading"),
        ('{"type": "input", "heading": [0, 1], "speed": -2}', "nonnegative"),
        ('{"type": "input", "heading": [0, 1], "speed": "fast"}', "heading"),
    ])
    def test_malformed_lines(self, line, msg):
        with pytest.raises(ValueError, match=msg):
            parse_client_line(line)

    def test_frame_line_schema(self, engine, walk_clip):
        state = clip_states(walk_clip).select([0])
        line = frame_line(0.05, state, engine, np.array([1, 2, 3, 4]),
                          {"heading": [1.0, 0.0], "speed": 0.5})
        assert line.endswith("\n")
        msg = json.loads(line)
        assert msg["type"] == "frame"
        assert msg["t"] == 0.05
        assert len(msg["bodies"]) == len(engine.char.bodies)
        assert all(len(b) == 3 for b in msg["bodies"])
        assert msg["indices"] == [1, 2, 3, 4]
        assert msg["target"]["speed"] == 0.5

    def test_error_line(self):
        msg = json.loads(error_line("boom"))
        assert msg == {"type": "error", "msg": "boom"}


class TestServeLive:
    @pytest.fixture(scope="class")
    def server(self, fitted_codec, engine, walk_clip):
        net = SteeringPolicyNet(desk_steer(), seed=0)
        state0 = clip_states(walk_clip).select([0])

        def make_runtime():
            return SteeringRuntime(fitted_codec, net, engine, state0)

        srv = SteeringServer(make_runtime, port=0)
        host, port = srv.start()
        yield f"ws://{host}:{port}"
        srv.stop()

    def test_frame_rate_and_echo(self, server):
        from websockets.sync.client import connect

        with connect(server) as ws:
            ws.send(json.dumps({"type": "input", "heading": [3, 4],
                                "speed": 1.0}) + "\n")
            frames = []
            t0 = time.monotonic()
            while time.monotonic() - t0 < 2.5:
                frames.append(json.loads(ws.recv(timeout=2)))
            elapsed = time.monotonic() - t0
        rate = len(frames) / elapsed
        assert 19.0 <= rate <= 21.0
        kinds = {f["type"] for f in frames}
        assert kinds == {"frame"}
        echo = frames[-1]["target"]
        assert abs(echo["heading"][0] - 0.6) < 1e-12
        assert abs(echo["heading"][1] - 0.8) < 1e-12
        assert echo["speed"] == 1.0
        ts = [f["t"] for f in frames]
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_malformed_input_keeps_connection(self, server):
        from websockets.sync.client import connect

        with connect(server) as ws:
            ws.send("this is not json\n")
            msg = json.loads(ws.recv(timeout=2))
            while msg["type"] == "frame":  # frames may already be queued
                msg = json.loads(ws.recv(timeout=2))
            assert msg["type"] == "error"
            assert "bad json" in msg["msg"]
            follow = json.loads(ws.recv(timeout=2))
            assert follow["type"] == "frame"

    def test_pause_and_reset(self, server):
        from websockets.sync.client import connect

        with connect(server) as ws:
            json.loads(ws.recv(timeout=2))
            ws.send(json.dumps({"type": "pause"}) + "\n")
            time.sleep(0.3)  # drain frames emitted before the pause landed
            try:
                while True:
                    ws.recv(timeout=0.05)
            except TimeoutError:
                pass
            with pytest.raises(TimeoutError):
                ws.recv(timeout=0.4)
            ws.send(json.dumps({"type": "reset"}) + "\n")
            msg = json.loads(ws.recv(timeout=2))
            assert msg["type"] == "frame"
            assert msg["t"] <= 0.2  # fresh runtime restarts the clock
