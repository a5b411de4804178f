"""Closed-loop steering: one code per tick, four simulator frames each.

The stepper owns the simulator state and the policy feedback; user targets
arrive through a latest-wins mailbox and are read once per tick. Decoding
is causal: the upsampler runs over a sliding window of recent codes and
only the newest code's frames are consumed, so they see no future context
(an offline decode of the same codes differs near the window edge).
"""

import threading

import numpy as np

from ..codec import Codec
from ..nn import Tensor, no_grad
from ..sim import Engine, SimDivergence, SimState
from .config import SteerConfig
from .policy import SteeringPolicyNet, policy_step
from .task import FRAMES_PER_CODE, TaskParams, blend, stationary_task, user_input_to_target


class Mailbox:
    """Single-slot handoff: writers overwrite, the reader keeps the newest."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None

    def put(self, value) -> None:
        with self._lock:
            self._value = value

    def peek(self):
        with self._lock:
            return self._value


class SteeringRuntime:
    def __init__(self, codec: Codec, net: SteeringPolicyNet, engine: Engine,
                 state: SimState, cfg: SteerConfig | None = None,
                 code_window: int = 16, action_beta: float = 1.0):
        if state.batch != 1:
            raise ValueError(f"runtime drives one character, got batch {state.batch}")
        self.codec = codec
        self.net = net
        self.engine = engine
        self.state = state
        self.cfg = cfg if cfg is not None else net.cfg
        self.code_window = int(code_window)
        self.action_beta = float(action_beta)
        self.t = 0.0
        self.steps = 0
        # feedback starts neutral: the lattice point nearest the origin and
        # a stand-in-place forecast
        z0, _ = codec.quant.quantize(np.zeros((1, self.cfg.code_width)))
        self._z_prev = z0[0]
        self._g_pi = stationary_task(self.cfg.n_samples)
        self._codes: list[np.ndarray] = []
        self._smoothed = None

    @property
    def frame_dt(self) -> float:
        return self.engine.control_dt

    def tick(self, g_user: TaskParams | None = None) -> dict:
        """Advance one code step (FRAMES_PER_CODE simulator frames).

        With a user task the policy forecast is blended toward it; without
        one the forecast alone steers. Returns the emitted index tuple, the
        blended task, and the per-frame states (newest last, which is also
        self.state). Simulator divergence propagates to the caller.
        """
        g = self._g_pi if g_user is None else blend(self._g_pi, g_user, self.cfg)
        v, g_next, z, idx = policy_step(self.net, self.codec.quant, self._z_prev, g)
        self._codes.append(z)
        if len(self._codes) > self.code_window:
            del self._codes[0]
        with no_grad():
            u = self.codec.upsample(np.stack(self._codes)[None]).data[0]
        frames = []
        for k in range(FRAMES_PER_CODE):
            feat = self.engine.featurize(self.state)
            cond = u[u.shape[0] - FRAMES_PER_CODE + k]
            with no_grad():
                a = self.codec.policy(Tensor(feat), Tensor(cond[None])).data
            self._smoothed = a if self._smoothed is None else (
                (1.0 - self.action_beta) * self._smoothed + self.action_beta * a)
            self.state = self.engine.control_step(self.state, self._smoothed)
            frames.append(self.state)
            self.t += self.frame_dt
        self._z_prev = z
        self._g_pi = g_next
        self.steps += 1
        return {"indices": idx, "task": g, "states": frames}


# -- scripted control traces ---------------------------------------------------

def write_trace(path, rows: np.ndarray) -> None:
    """Rows of (time s, heading x, heading y, speed m/s), one per line."""
    r = np.asarray(rows, dtype=np.float64)
    if r.ndim != 2 or r.shape[1] != 4:
        raise ValueError(f"expected (rows, 4), got {r.shape}")
    with open(path, "w") as fh:
        for t, hx, hy, sp in r:
            fh.write(f"{float(t)!r} {float(hx)!r} {float(hy)!r} {float(sp)!r}\n")


def read_trace(path) -> np.ndarray:
    """Parse a trace file; '#' lines and blanks are ignored."""
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 4:
                raise ValueError(f"line {ln}: expected 4 fields, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"line {ln}: {exc}") from None
    if not rows:
        raise ValueError("trace file holds no records")
    out = np.array(rows)
    if (np.diff(out[:, 0]) < 0).any():
        raise ValueError("trace times must be non-decreasing")
    return out


def figure_eight_trace(duration: float = 30.0, period: float = 12.0,
                       speed: float = 1.0, dt: float = 0.05) -> np.ndarray:
    """Back-and-forth crossing schedule along the travel axis.

    The commanded velocity is speed * cos(2 pi t / period): the character
    sweeps forward, slows through zero, and comes back, passing the start
    twice per period. Headings stay unit length; the sign flip lands
    exactly where the commanded speed vanishes.
    """
    t = np.arange(0.0, duration, dt)
    v = speed * np.cos(2.0 * np.pi * t / period)
    heading_x = np.where(v >= 0.0, 1.0, -1.0)
    return np.stack([t, heading_x, np.zeros_like(t), np.abs(v)], axis=1)


MIN_DIRECTED_SPEED = 0.1  # m/s; slower commands have no meaningful direction


def evaluate_trace(runtime: SteeringRuntime, trace: np.ndarray,
                   settle_steps: int = 5) -> dict:
    """Drive the runtime through a trace and score command following.

    Per code step the newest trace row not in the future is the command
    (mailbox semantics). Facing error is the angle between the achieved
    travel direction and the commanded heading, skipping near-stationary
    commands; speed error compares achieved to commanded magnitude. The
    first settle_steps steps are warm-up and unscored. Divergence ends the
    run early and is flagged rather than raised.
    """
    trace = np.asarray(trace, dtype=np.float64)
    facing_errs, speed_errs = [], []
    diverged = False
    n_steps = int(np.floor(trace[-1, 0] / (runtime.frame_dt * FRAMES_PER_CODE))) + 1
    for step in range(n_steps):
        row = trace[np.searchsorted(trace[:, 0], runtime.t, side="right") - 1]
        heading, speed = row[1:3], float(row[3])
        g_user = user_input_to_target(heading, speed, runtime.state, runtime.cfg)
        before = runtime.state.root_pos[0].copy()
        try:
            runtime.tick(g_user)
        except SimDivergence:
            diverged = True
            break
        if step < settle_steps:
            continue
        v_ach = (runtime.state.root_pos[0] - before) / (runtime.frame_dt * FRAMES_PER_CODE)
        speed_ach = float(np.linalg.norm(v_ach))
        speed_errs.append(abs(speed_ach - speed))
        if speed >= MIN_DIRECTED_SPEED:
            if speed_ach < 1e-9:
                facing_errs.append(180.0)
            else:
                cosang = float(v_ach @ heading) / (speed_ach * float(np.linalg.norm(heading)))
                facing_errs.append(float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))))
    return {
        "facing_err_deg": float(np.median(facing_errs)) if facing_errs else float("nan"),
        "speed_err": float(np.median(speed_errs)) if speed_errs else float("nan"),
        "diverged": diverged,
        "steps": runtime.steps,
    }
