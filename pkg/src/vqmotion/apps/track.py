"""Streaming tracking: encode, quantize, and re-simulate a reference clip.

The clip is processed in consecutive windows. Each window is encoded on
its own (the code sequence is a per-window artifact) but the simulator
state carries across window boundaries, so tracking a long clip IS the
windowed computation; there is no separate full-clip path to drift from.
"""

import numpy as np

from ..codec import Codec, DecodeDivergence, decode_sim
from ..codec.model import window_features
from ..data import MotionClip, clip_states
from ..nn import no_grad
from ..sim import Engine, SimState
from .metrics import TrackReport, metrics


def states_to_clip(states: list[SimState], fps: float) -> MotionClip:
    """Assemble single-character states into clip frames [x, y, angle, joints]."""
    if not states:
        raise ValueError("no states to assemble")
    rows = []
    for s in states:
        if s.batch != 1:
            raise ValueError(f"expected batch-1 states, got batch {s.batch}")
        rows.append(np.concatenate([s.root_pos[0], s.root_angle, s.joint_angles[0]]))
    return MotionClip(fps, np.stack(rows))


def track(codec: Codec, engine: Engine, clip: MotionClip,
          window: int | None = None, action_beta: float = 1.0,
          ) -> tuple[MotionClip, TrackReport]:
    """Re-simulate a reference clip through the quantized representation.

    On simulator divergence the partial trajectory is returned with the
    report's diverged flag set and metrics computed over the surviving
    prefix. Trailing frames that do not fill a whole code step are dropped.
    """
    window = codec.cfg.window if window is None else window
    if window % 4 or window <= 0:
        raise ValueError(f"window must be a positive multiple of 4, got {window}")
    usable = clip.n_frames - clip.n_frames % 4
    if usable < 4:
        raise ValueError(f"clip too short to track: {clip.n_frames} frames")
    ref = clip.window(0, usable)

    all_states = [clip_states(ref).select([0])]
    diverged = False
    for start in range(0, usable, window):
        length = min(window, usable - start)
        feats = window_features(engine, ref.window(start, length))
        with no_grad():
            v = codec.encode(feats.T[None])
        z, _ = codec.quant.quantize(v.data)
        try:
            states, _ = decode_sim(codec.upsampler, codec.policy, engine, z,
                                   all_states[-1], action_beta=action_beta)
        except DecodeDivergence as exc:
            all_states.extend(exc.states[1:])
            diverged = True
            break
        all_states.extend(states[1:])

    n_sim = len(all_states) - 1 if not diverged else len(all_states)
    n_sim = max(min(n_sim, usable), 1)
    sim_clip = states_to_clip(all_states[:n_sim], clip.fps)
    report = metrics(engine, sim_clip, ref.window(0, n_sim)).with_divergence(diverged)
    return sim_clip, report
