"""Procedural gait synthesis for the planar biped.

Feet are planned in world coordinates (pinned during stance, cycloidal during
swing) and turned into joint angles with two-link leg IK, so generated clips
never skate while a foot is planted.
"""

from dataclasses import dataclass

import numpy as np

from ..sim import biped_rest_heights
from .clips import MotionClip

FAMILIES = ("walk", "run", "hop", "squat", "sway", "turn")

# speed bounds per family, m/s
SPEED_BOUNDS = {
    "walk": (0.2, 1.5),
    "run": (1.0, 3.0),
    "hop": (0.1, 1.2),
    "squat": (0.0, 0.2),
    "sway": (0.0, 0.2),
    "turn": (0.2, 1.2),
}

_REST = biped_rest_heights()
_THIGH = _REST["thigh_len"]
_SHIN = _REST["shin_len"]
_ANKLE_REST = _REST["ankle"]

HIP_LIMITS = (-1.2, 2.2)
KNEE_LIMITS = (-2.4, 0.05)
ANKLE_LIMITS = (-1.0, 1.0)


@dataclass(frozen=True)
class GaitParams:
    family: str
    speed: float = 1.0
    stride_hz: float = 1.5
    turn_rate: float = 0.8
    amplitude: float = 1.0
    duration: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown gait family {self.family!r}, expected one of {FAMILIES}")
        if self.duration < 1.2:
            raise ValueError(f"duration {self.duration} s is below the 1.2 s minimum window")
        lo, hi = SPEED_BOUNDS[self.family]
        if not lo <= self.speed <= hi:
            raise ValueError(f"{self.family} speed {self.speed} outside [{lo}, {hi}] m/s")
        if not 0.2 <= self.stride_hz <= 4.0:
            raise ValueError(f"stride frequency {self.stride_hz} outside [0.2, 4] Hz")
        if not 0.2 <= self.amplitude <= 2.0:
            raise ValueError(f"amplitude {self.amplitude} outside [0.2, 2]")
        if not 0.1 <= self.turn_rate <= 3.0:
            raise ValueError(f"turn rate {self.turn_rate} outside [0.1, 3] rad/s")


def _leg_ik(dx, dy, theta):
    """Hip, knee, ankle angles reaching from the hip to an ankle target.

    dx, dy is the hip-to-ankle vector; takes the knee-backward branch.  The
    ankle angle keeps the foot level.  Targets outside the reachable annulus
    get pulled onto it.
    """
    a, b = _THIGH, _SHIN
    r = np.hypot(dx, dy)
    r = np.clip(r, abs(a - b) + 0.02, a + b - 0.004)
    alpha = np.arctan2(dx, -dy)
    beta = np.arccos(np.clip((a * a + r * r - b * b) / (2 * a * r), -1.0, 1.0))
    gamma = np.arccos(np.clip((b * b + r * r - a * a) / (2 * b * r), -1.0, 1.0))
    q_hip = alpha + beta - theta
    q_knee = -(beta + gamma)
    q_ankle = -(theta + q_hip + q_knee)
    return (
        np.clip(q_hip, *HIP_LIMITS),
        np.clip(q_knee, *KNEE_LIMITS),
        np.clip(q_ankle, *ANKLE_LIMITS),
    )


def _foot_plan(path_x, t, freq, leg_phase, duty, swing_h, split):
    """World ankle targets for one leg: pinned while in stance, cycloidal
    between successive footholds while swinging."""
    psi = freq * t + leg_phase
    n = np.floor(psi)
    u = psi - n

    def foothold(cycle):
        t_mid = (cycle + duty / 2.0 - leg_phase) / freq
        return path_x(t_mid) + split

    x_now = foothold(n)
    x_next = foothold(n + 1)
    tau = np.clip((u - duty) / max(1.0 - duty, 1e-9), 0.0, 1.0)
    s_prof = tau - np.sin(2 * np.pi * tau) / (2 * np.pi)
    swing = u > duty
    fx = np.where(swing, x_now + (x_next - x_now) * s_prof, x_now)
    fy = np.where(swing, _ANKLE_REST + swing_h * (1 - np.cos(2 * np.pi * tau)) / 2, _ANKLE_REST)
    return fx, fy


def generate_gait(params: GaitParams, fps: float = 20.0) -> MotionClip:
    p = params
    rng = np.random.default_rng(p.seed)
    n = int(round(p.duration * fps))
    t = np.arange(n) / fps
    amp = p.amplitude * rng.uniform(0.92, 1.08)
    phase0 = rng.uniform(0.0, 1.0)
    f = p.stride_hz
    w = 2 * np.pi * f
    phi = w * t + 2 * np.pi * phase0

    if p.family == "turn":
        # heading reverses periodically at the turn rate
        wr = p.turn_rate

        def path_x(tt):
            return (p.speed / wr) * np.sin(wr * tt)

    else:

        def path_x(tt):
            return p.speed * tt

    px = path_x(t)
    vx = np.gradient(px, 1.0 / fps) if n > 1 else np.zeros(n)

    stepping = p.family in ("walk", "run", "turn", "hop")
    if p.family == "walk" or p.family == "turn":
        duty, swing_h, h0, bob = 0.62, 0.05 * amp, 0.84, 0.012 * amp
        theta = -0.05 * np.clip(vx / 1.5, -1, 1) + 0.02 * amp * np.sin(2 * phi)
        hy = h0 + bob * np.cos(2 * phi)
        offsets = (0.0, 0.5)
    elif p.family == "run":
        duty, swing_h, h0, bob = 0.38, 0.10 * amp, 0.84, 0.025 * amp
        theta = -0.10 * np.clip(vx / 3.0, -1, 1) + 0.02 * amp * np.sin(2 * phi)
        hy = h0 + bob * np.cos(2 * phi)
        offsets = (0.0, 0.5)
    elif p.family == "hop":
        duty, swing_h, h0 = 0.55, 0.08 * amp, 0.84
        theta = 0.04 * amp * np.sin(phi)
        hy = h0 + 0.04 * amp * np.cos(phi)
        offsets = (0.0, 0.0)
    elif p.family == "squat":
        h0, depth = 0.72, 0.14 * amp
        hy = h0 + depth * np.cos(phi)
        theta = -0.5 * (h0 + depth - hy)
    else:  # sway
        hy = np.full(n, 0.86) - 0.01 * amp * (1 - np.cos(2 * phi)) / 2
        px = px + 0.10 * amp * np.sin(phi)
        theta = 0.05 * amp * np.sin(phi)

    if stepping:
        feet = [
            _foot_plan(path_x, t, f, phase0 + off, duty, swing_h, split)
            for off, split in zip(offsets, (0.0, 0.0))
        ]
    else:
        # both feet planted for the whole clip, slightly split
        split = 0.06 * amp
        base = float(px[0])
        feet = [
            (np.full(n, base - split), np.full(n, _ANKLE_REST)),
            (np.full(n, base + split), np.full(n, _ANKLE_REST)),
        ]

    cols = [px, hy, theta]
    for fx, fy in feet:
        q_hip, q_knee, q_ankle = _leg_ik(fx - px, fy - hy, theta)
        cols.extend([q_hip, q_knee, q_ankle])
    frames = np.stack(cols, axis=1)
    return MotionClip(fps, frames)


def desk_corpus() -> tuple[GaitParams, ...]:
    """Ten minutes of varied clips across all six gait families."""
    entries = []
    seed = 100
    for speed in (0.4, 0.7, 1.0, 1.25, 1.45):
        entries.append(GaitParams("walk", speed, 1.2 + 0.3 * speed, duration=20.0, seed=seed))
        seed += 1
    for speed in (1.2, 1.6, 2.0, 2.4, 2.8):
        entries.append(GaitParams("run", speed, 2.0 + 0.25 * speed, duration=20.0, seed=seed))
        seed += 1
    for speed, f in ((0.15, 1.4), (0.4, 1.6), (0.65, 1.6), (0.9, 1.8), (1.15, 1.8)):
        entries.append(GaitParams("hop", speed, f, duration=20.0, seed=seed))
        seed += 1
    for speed, f, amp in ((0.0, 0.4, 1.0), (0.0, 0.5, 0.8), (0.05, 0.45, 1.2),
                          (0.1, 0.35, 0.9), (0.15, 0.55, 0.7)):
        entries.append(GaitParams("squat", speed, f, amplitude=amp, duration=20.0, seed=seed))
        seed += 1
    for speed, f, amp in ((0.0, 0.5, 1.0), (0.0, 0.7, 1.3), (0.05, 0.6, 0.8),
                          (0.1, 0.8, 1.1), (0.15, 0.9, 0.6)):
        entries.append(GaitParams("sway", speed, f, amplitude=amp, duration=20.0, seed=seed))
        seed += 1
    for speed, rate in ((0.3, 0.4), (0.5, 0.6), (0.7, 0.8), (0.9, 1.0), (1.1, 1.2)):
        entries.append(GaitParams("turn", speed, 1.2 + 0.3 * speed, turn_rate=rate,
                                  duration=20.0, seed=seed))
        seed += 1
    return tuple(entries)


def corpus_manifest(entries) -> str:
    lines = ["# gait corpus manifest", f"# clips: {len(entries)}",
             f"# total seconds: {sum(e.duration for e in entries):g}", ""]
    for i, e in enumerate(entries):
        lines.append(
            f"{i:03d} family={e.family} speed={e.speed:g} stride_hz={e.stride_hz:g} "
            f"turn_rate={e.turn_rate:g} amplitude={e.amplitude:g} "
            f"duration={e.duration:g} seed={e.seed}")
    return "\n".join(lines) + "\n"
