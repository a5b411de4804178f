"""Clip format, resampling, corruption, and gait generator checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqmotion.data import (
    ClipParseError,
    GaitParams,
    MotionClip,
    add_noise,
    check_clip,
    clip_states,
    corpus_manifest,
    desk_corpus,
    generate_gait,
    load_clip,
    resample,
    save_clip,
)
from vqmotion.sim import Engine, biped_rest_heights, planar_biped


def toy_clip(n=16, j=6, fps=20.0, seed=0) -> MotionClip:
    rng = np.random.default_rng(seed)
    return MotionClip(fps, rng.normal(size=(n, 3 + j)))


class TestClipFile:
    def test_round_trip_bitwise(self, tmp_path):
        clip = toy_clip()
        path = tmp_path / "c.mcq"
        save_clip(clip, path)
        back = load_clip(path)
        assert back.fps == clip.fps
        assert np.array_equal(back.frames, clip.frames)

    def test_truncated_frames_reports_offset(self, tmp_path):
        clip = toy_clip()
        path = tmp_path / "c.mcq"
        save_clip(clip, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-9])
        with pytest.raises(ClipParseError, match="frame data") as exc:
            load_clip(path)
        assert exc.value.offset == len(blob) - 9

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "c.mcq"
        path.write_bytes(b"MCQ1\x01\x00")
        with pytest.raises(ClipParseError, match="header"):
            load_clip(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.mcq"
        save_clip(toy_clip(), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(ClipParseError, match="magic") as exc:
            load_clip(path)
        assert exc.value.offset == 0

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "c.mcq"
        save_clip(toy_clip(), path)
        blob = bytearray(path.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(ClipParseError, match="version 9"):
            load_clip(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "c.mcq"
        save_clip(toy_clip(), path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(ClipParseError, match="trailing"):
            load_clip(path)

    @given(st.integers(1, 40), st.integers(1, 9), st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_round_trip_any_shape(self, tmp_path_factory, n, j, seed):
        clip = toy_clip(n, j, seed=seed)
        path = tmp_path_factory.mktemp("clips") / "c.mcq"
        save_clip(clip, path)
        assert np.array_equal(load_clip(path).frames, clip.frames)

    def test_frames_immutable(self):
        clip = toy_clip()
        with pytest.raises(ValueError):
            clip.frames[0, 0] = 1.0


class TestResample:
    def test_halving_frame_count(self):
        clip = toy_clip(n=80, fps=40.0)
        out = resample(clip, 20.0)
        assert out.n_frames == 40
        assert out.fps == 20.0

    def test_identity(self):
        clip = toy_clip()
        out = resample(clip, clip.fps)
        assert np.array_equal(out.frames, clip.frames)

    def test_band_limited_down_up_error(self):
        # 1, 2 and 5 Hz sinusoids; linear interpolation at 20 fps keeps the
        # round trip inside 0.02 rad for these amplitudes
        fps = 40.0
        t = np.arange(400) / fps
        joints = np.stack([
            0.30 * np.sin(2 * np.pi * 1.0 * t),
            0.10 * np.sin(2 * np.pi * 2.0 * t + 0.3),
            0.02 * np.sin(2 * np.pi * 5.0 * t + 1.1),
        ], axis=1)
        frames = np.concatenate([np.zeros((400, 3)), joints], axis=1)
        clip = MotionClip(fps, frames)
        back = resample(resample(clip, 20.0), 40.0)
        # the final frame sits past the last intermediate sample and is an
        # endpoint hold; compare inside the covered range
        err = np.abs(back.joint_angles[:-1] - clip.joint_angles[:-1]).max()
        assert err < 0.02

    def test_angle_wrap_shortest_arc(self):
        # consecutive angles straddling the pi boundary interpolate through
        # it, not across the full circle
        frames = np.zeros((2, 4))
        frames[0, 2], frames[1, 2] = 3.1, -3.1
        clip = MotionClip(10.0, frames)
        out = resample(clip, 20.0)
        mid = out.frames[1, 2]
        assert 3.1 < mid < 3.3

    def test_duration_preserved(self):
        clip = toy_clip(n=50, fps=20.0)
        out = resample(clip, 31.0)
        assert abs(out.duration - clip.duration) <= 1.0 / 20.0

    def test_empty_rejected(self):
        empty = MotionClip(20.0, np.zeros((0, 9)))
        with pytest.raises(ValueError, match="empty"):
            resample(empty, 40.0)


class TestNoise:
    def test_zero_sigma_identity(self):
        clip = toy_clip()
        assert np.array_equal(add_noise(clip, 0.0, 3).frames, clip.frames)

    def test_sample_std_matches_sigma(self):
        clip = MotionClip(20.0, np.zeros((4000, 9)))
        noisy = add_noise(clip, 0.1, 7)
        stds = noisy.joint_angles.std(axis=0)
        assert (stds > 0.095).all() and (stds < 0.105).all()

    def test_root_untouched(self):
        clip = toy_clip()
        noisy = add_noise(clip, 0.3, 11)
        assert np.array_equal(noisy.frames[:, :3], clip.frames[:, :3])
        assert not np.array_equal(noisy.frames[:, 3:], clip.frames[:, 3:])

    def test_seeds_differ_shapes_equal(self):
        clip = toy_clip()
        a, b = add_noise(clip, 0.1, 1), add_noise(clip, 0.1, 2)
        assert a.frames.shape == b.frames.shape
        assert not np.array_equal(a.frames, b.frames)


class TestGaits:
    def test_walk_displacement_matches_speed(self):
        clip = generate_gait(GaitParams("walk", speed=1.0, duration=10.0, seed=4))
        dx = clip.root_pos[-1, 0] - clip.root_pos[0, 0]
        assert abs(dx - 10.0) < 0.5

    def test_same_seed_bitwise(self):
        p = GaitParams("run", speed=2.0, stride_hz=2.5, seed=9)
        assert np.array_equal(generate_gait(p).frames, generate_gait(p).frames)

    def test_different_seeds_differ(self):
        a = generate_gait(GaitParams("walk", seed=1))
        b = generate_gait(GaitParams("walk", seed=2))
        assert not np.array_equal(a.frames, b.frames)

    def test_families_produce_distinct_motion(self):
        clips = {fam: generate_gait(GaitParams(fam, speed=0.2, duration=4.0, seed=5))
                 for fam in ("walk", "hop", "squat", "sway", "turn")}
        sigs = [tuple(np.round(c.joint_angles.std(axis=0), 6)) for c in clips.values()]
        assert len(set(sigs)) == len(sigs)

    def test_corpus_totals(self):
        entries = desk_corpus()
        assert sum(e.duration for e in entries) == pytest.approx(600.0)
        assert len({e.family for e in entries}) >= 6
        for fam in {e.family for e in entries}:
            speeds = {e.speed for e in entries if e.family == fam}
            assert len(speeds) >= 2

    def test_corpus_clips_pass_sanity(self):
        char = planar_biped()
        for e in desk_corpus():
            probe = GaitParams(e.family, e.speed, e.stride_hz, e.turn_rate,
                               e.amplitude, 4.0, e.seed)
            check_clip(generate_gait(probe), char)

    def test_manifest_lists_every_entry(self):
        entries = desk_corpus()
        text = corpus_manifest(entries)
        assert f"# clips: {len(entries)}" in text
        for e in entries[:3]:
            assert f"family={e.family}" in text
        assert len([ln for ln in text.splitlines() if ln and not ln.startswith("#")]) == len(entries)

    def test_stance_foot_pinned(self):
        # during ground contact the stance ankle must not slide in x
        clip = generate_gait(GaitParams("walk", speed=1.0, stride_hz=1.5,
                                        duration=6.0, seed=3))
        eng = Engine(planar_biped())
        pos, phi, _, _ = eng.body_world(clip_states(clip))
        rest = biped_rest_heights()
        for foot_body in (3, 6):
            ankle = pos[:, foot_body] + np.stack([
                -np.sin(phi[:, foot_body]), np.cos(phi[:, foot_body])
            ], axis=-1) * (rest["ankle"] - 0.01)
            stance = ankle[:, 1] < rest["ankle"] + 1e-6
            x = ankle[:, 0]
            blocks = np.split(np.arange(len(x)), np.where(np.diff(stance))[0] + 1)
            for idx in blocks:
                if stance[idx[0]] and len(idx) > 1:
                    assert x[idx].max() - x[idx].min() < 0.01

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError, match="family"):
            GaitParams("moonwalk")
        with pytest.raises(ValueError, match="duration"):
            GaitParams("walk", duration=1.0)
        with pytest.raises(ValueError, match="speed"):
            GaitParams("run", speed=0.2)

    def test_turn_reverses_direction(self):
        clip = generate_gait(GaitParams("turn", speed=1.0, turn_rate=1.5,
                                        duration=10.0, seed=6))
        vx = np.diff(clip.root_pos[:, 0])
        assert (vx > 1e-4).any() and (vx < -1e-4).any()


class TestClipStates:
    def test_velocities_match_central_differences(self):
        clip = toy_clip(n=12)
        s = clip_states(clip)
        f = clip.frames
        expect = (f[2:] - f[:-2]) * clip.fps / 2.0
        assert np.allclose(s.root_vel[1:-1], expect[:, 0:2])
        assert np.allclose(s.joint_vels[1:-1], expect[:, 3:])

    def test_constant_velocity_exact(self):
        t = np.arange(10)[:, None]
        frames = np.tile(np.arange(9.0), (10, 1)) * 0.0
        frames = frames + t * 0.1
        clip = MotionClip(20.0, frames)
        s = clip_states(clip)
        assert np.allclose(s.root_vel, 0.1 * 20.0)
        assert np.allclose(s.joint_vels, 2.0)

    def test_batch_matches_frames(self):
        clip = toy_clip(n=7)
        assert clip_states(clip).batch == 7
