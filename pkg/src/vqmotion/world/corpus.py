"""Scripted-action rollout corpora for fitting the dynamics model.

Two regimes: a zero-gravity free-float corpus (smooth articulated dynamics,
no ground contact) and a contact corpus started from procedural gait poses.
Actions are sums of low-frequency sinusoids centered on each joint's start
angle, so every episode stays inside the joint limits by construction.
"""

import numpy as np

from ..data import GaitParams, clip_states, generate_gait
from ..sim import Engine, SimDivergence, SimState, planar_biped

Array = np.ndarray


def scripted_targets(rng: np.random.Generator, batch: int, n_steps: int,
                     n_joints: int, dt: float, components: int = 3) -> Array:
    """Smooth random PD target scripts, (batch, n_steps, n_joints), zero-mean."""
    t = np.arange(n_steps) * dt
    freq = rng.uniform(0.2, 1.5, (batch, n_joints, components))
    amp = rng.uniform(0.1, 0.5, (batch, n_joints, components))
    phase = rng.uniform(0, 2 * np.pi, (batch, n_joints, components))
    waves = amp[..., None] * np.sin(2 * np.pi * freq[..., None] * t + phase[..., None])
    return waves.sum(axis=2).transpose(0, 2, 1)


def _limits(char) -> tuple[Array, Array]:
    lo = np.array([j.limit_lo for j in char.joints])
    hi = np.array([j.limit_hi for j in char.joints])
    return lo, hi


def _rollout_episodes(engine: Engine, start: SimState, acts: Array) -> Array | None:
    """Featurized states (B, T+1, F) for one batch, or None if any env diverges."""
    feats = [engine.featurize(start)]
    st = start
    for t in range(acts.shape[1]):
        try:
            st = engine.control_step(st, acts[:, t])
        except SimDivergence:
            return None
        feats.append(engine.featurize(st))
    return np.stack(feats, axis=1)


def float_corpus(episodes: int = 128, ep_len: int = 200, seed: int = 7,
                 char=None) -> tuple[Engine, Array, Array]:
    """Zero-g free-float scripted rollouts; returns (engine, feats, actions).

    Roots start near y = 3 with small drift velocities, so nothing reaches
    the ground inside an episode and the dynamics stay contact-free.
    """
    char = char or planar_biped()
    engine = Engine(char, gravity=0.0)
    rng = np.random.default_rng(seed)
    nj = len(char.joints)
    lo, hi = _limits(char)
    mid = (lo + hi) / 2
    st = SimState(
        root_pos=np.stack([rng.uniform(-1, 1, episodes), np.full(episodes, 3.0)], axis=1),
        root_angle=rng.uniform(-0.5, 0.5, episodes),
        joint_angles=mid + rng.uniform(-0.3, 0.3, (episodes, nj)),
        root_vel=rng.uniform(-0.15, 0.15, (episodes, 2)),
        root_ang_vel=rng.uniform(-0.5, 0.5, episodes),
        joint_vels=rng.uniform(-0.5, 0.5, (episodes, nj)),
    )
    acts = scripted_targets(rng, episodes, ep_len, nj, engine.control_dt)
    acts = np.clip(acts + st.joint_angles[:, None, :], lo, hi)
    feats = _rollout_episodes(engine, st, acts)
    if feats is None:
        raise RuntimeError("free-float corpus diverged; seed or limits are off")
    return engine, feats, acts


_START_FAMILIES = (("walk", 1.0), ("run", 2.0), ("hop", 0.6), ("squat", 0.1), ("sway", 0.1))


def contact_corpus(episodes: int = 48, ep_len: int = 200, seed: int = 7,
                   char=None, chunk: int = 16) -> tuple[Engine, Array, Array]:
    """Scripted rollouts under gravity, started from procedural gait poses.

    Chunks that diverge are dropped, so the returned episode count can be
    below the request; contact makes these rollouts much harder to fit.
    """
    char = char or planar_biped()
    engine = Engine(char)
    rng = np.random.default_rng(seed)
    nj = len(char.joints)
    lo, hi = _limits(char)
    feats_all, acts_all = [], []
    for start in range(0, episodes, chunk):
        b = min(chunk, episodes - start)
        picks = []
        for k in range(b):
            fam, v = _START_FAMILIES[(start + k) % len(_START_FAMILIES)]
            clip = generate_gait(
                GaitParams(fam, speed=v, duration=2.0, seed=int(rng.integers(1 << 30)))
            )
            cs = clip_states(clip)
            picks.append(cs.select([int(rng.integers(cs.root_pos.shape[0]))]))
        st = SimState.concat(picks)
        acts = scripted_targets(rng, b, ep_len, nj, engine.control_dt)
        acts = np.clip(acts + st.joint_angles[:, None, :], lo, hi)
        feats = _rollout_episodes(engine, st, acts)
        if feats is None:
            continue
        feats_all.append(feats)
        acts_all.append(acts)
    if not feats_all:
        raise RuntimeError("every contact-corpus chunk diverged")
    return engine, np.concatenate(feats_all), np.concatenate(acts_all)
