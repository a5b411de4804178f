"""Task parameters: where the character should be over the next second.

A task is a short forecast, sampled at the configured lookahead offsets:
a position offset and a facing direction per sample, expressed in the
character frame at the current code step. Facing vectors stay unit length
through every op here; the blend renormalizes only rows it actually moved,
so agreeing inputs pass through bitwise.
"""

from dataclasses import dataclass

import numpy as np

from ..data import MotionClip
from ..sim import SimState
from .config import SteerConfig

FRAMES_PER_CODE = 4  # codec temporal downsampling

UNIT_TOL = 1e-9
_DEGENERATE = 1e-8  # blends shorter than this keep the policy facing


def _rot(phi: float, v: np.ndarray) -> np.ndarray:
    """Rotate rows of v (.., 2) by phi radians."""
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([c * v[..., 0] - s * v[..., 1],
                     s * v[..., 0] + c * v[..., 1]], axis=-1)


def _wrap(angle: float) -> float:
    """Shortest-arc representative in (-pi, pi]."""
    return float(-((-angle + np.pi) % (2.0 * np.pi) - np.pi))


@dataclass(frozen=True)
class TaskParams:
    """pos: (S, 2) metre offsets; facing: (S, 2) unit directions."""

    pos: np.ndarray
    facing: np.ndarray

    def __post_init__(self) -> None:
        pos = np.array(self.pos, dtype=np.float64)
        facing = np.array(self.facing, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError(f"pos must be (samples, 2), got {pos.shape}")
        if facing.shape != pos.shape:
            raise ValueError(f"facing shape {facing.shape} must match pos shape {pos.shape}")
        if not (np.isfinite(pos).all() and np.isfinite(facing).all()):
            raise ValueError("task parameters must be finite")
        norms = np.linalg.norm(facing, axis=1)
        if np.abs(norms - 1.0).max() > UNIT_TOL:
            bad = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(f"facing sample {bad} has norm {norms[bad]!r}, expected unit")
        pos.flags.writeable = False
        facing.flags.writeable = False
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "facing", facing)

    @property
    def n_samples(self) -> int:
        return self.pos.shape[0]

    def vector(self) -> np.ndarray:
        """Flat (4S,) layout: [px, py, fx, fy] per sample, nearest first."""
        return np.concatenate([self.pos, self.facing], axis=1).reshape(-1)

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "TaskParams":
        v = np.asarray(vec, dtype=np.float64).reshape(-1, 4)
        return cls(v[:, 0:2], v[:, 2:4])


def stationary_task(n_samples: int = 3) -> TaskParams:
    """Stand in place, facing straight ahead."""
    pos = np.zeros((n_samples, 2))
    facing = np.zeros((n_samples, 2))
    facing[:, 0] = 1.0
    return TaskParams(pos, facing)


def task_from_raw(vec: np.ndarray) -> TaskParams:
    """Read a raw network output as a task.

    Facing channels are normalized; degenerate rows (including the all-zero
    output of a freshly initialized policy) fall back to straight ahead.
    """
    v = np.asarray(vec, dtype=np.float64).reshape(-1, 4)
    facing = v[:, 2:4].copy()
    norms = np.linalg.norm(facing, axis=1)
    ok = norms >= _DEGENERATE
    facing[ok] /= norms[ok, None]
    facing[~ok] = (1.0, 0.0)
    return TaskParams(v[:, 0:2], facing)


def build_task_params(clip: MotionClip, k: int,
                      cfg: SteerConfig = SteerConfig()) -> TaskParams:
    """Reference task at code step k of a clip.

    Code step k sits at frame 4k; each sample takes the root position and
    facing at the configured offset past that frame and expresses them in
    the frame-k basis. Raises when the clip is too short, which training
    treats as "skip this window".
    """
    base = k * FRAMES_PER_CODE
    if k < 0 or base >= clip.n_frames:
        raise ValueError(f"code step {k} outside clip of {clip.n_frames} frames")
    steps = [int(round(dt * clip.fps)) for dt in cfg.sample_offsets]
    if base + steps[-1] >= clip.n_frames:
        raise ValueError(
            f"code step {k} needs {steps[-1]} future frames, clip has "
            f"{clip.n_frames - 1 - base}")
    p0 = clip.root_pos[base]
    th0 = float(clip.root_angle[base])
    pos = np.empty((len(steps), 2))
    facing = np.empty((len(steps), 2))
    for i, s in enumerate(steps):
        pos[i] = _rot(-th0, clip.root_pos[base + s] - p0)
        d = float(clip.root_angle[base + s]) - th0
        facing[i] = (np.cos(d), np.sin(d))
    return TaskParams(pos, facing)


def blend(g_pi: TaskParams, g_user: TaskParams,
          cfg: SteerConfig = SteerConfig()) -> TaskParams:
    """Mix the policy forecast with the user target, sample by sample.

    The user side gets weight tau**gamma, so near samples trust the policy
    and the far sample follows the user. Written as a + w*(b - a): equal
    inputs pass through bitwise, and a weight of exactly 1 short-circuits
    to the user row. Facings are renormalized only where the mix moved
    them; near-cancelling mixes keep the policy facing.
    """
    if g_pi.n_samples != g_user.n_samples or g_pi.n_samples != cfg.n_samples:
        raise ValueError(
            f"sample counts differ: policy {g_pi.n_samples}, user {g_user.n_samples}, "
            f"config {cfg.n_samples}")
    w_pos = np.array(cfg.taus) ** cfg.gamma_pos
    w_rot = np.array(cfg.taus) ** cfg.gamma_rot
    pos = np.where(w_pos[:, None] == 1.0, g_user.pos,
                   g_pi.pos + w_pos[:, None] * (g_user.pos - g_pi.pos))
    delta = g_user.facing - g_pi.facing
    mixed = g_pi.facing + w_rot[:, None] * delta
    facing = np.empty_like(mixed)
    for i in range(mixed.shape[0]):
        if w_rot[i] == 1.0:
            facing[i] = g_user.facing[i]
        elif not delta[i].any():
            facing[i] = g_pi.facing[i]
        else:
            n = np.linalg.norm(mixed[i])
            facing[i] = g_pi.facing[i] if n < _DEGENERATE else mixed[i] / n
    return TaskParams(pos, facing)


def user_input_to_target(heading: np.ndarray, speed: float, state: SimState,
                         cfg: SteerConfig = SteerConfig()) -> TaskParams:
    """Desired task from a heading/speed command and the current state.

    The current root velocity and facing ease toward the commanded ones
    with a first-order filter (time constant cfg.filter_tau); position
    offsets integrate the filtered velocity. A zero-length heading keeps
    the current facing. The first batch row of the state drives the
    target.
    """
    if speed < 0:
        raise ValueError(f"speed must be non-negative, got {speed}")
    h = np.asarray(heading, dtype=np.float64).reshape(2)
    th0 = float(state.root_angle[0])
    v0 = np.asarray(state.root_vel[0], dtype=np.float64)
    hn = np.linalg.norm(h)
    if hn < _DEGENERATE:
        direction = np.array([np.cos(th0), np.sin(th0)])
        d_angle = 0.0
    else:
        direction = h / hn
        d_angle = _wrap(float(np.arctan2(direction[1], direction[0])) - th0)
    v_star = speed * direction
    tau = cfg.filter_tau
    pos = np.empty((cfg.n_samples, 2))
    facing = np.empty((cfg.n_samples, 2))
    for i, t in enumerate(cfg.sample_offsets):
        settle = 1.0 - np.exp(-t / tau)
        p_world = v_star * t + (v0 - v_star) * tau * settle
        pos[i] = _rot(-th0, p_world)
        a = settle * d_angle  # relative to the current facing already
        facing[i] = (np.cos(a), np.sin(a))
    return TaskParams(pos, facing)
