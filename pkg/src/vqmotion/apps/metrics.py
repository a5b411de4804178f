"""Clip-versus-clip tracking quality metrics.

All metrics compare body center-of-mass trajectories computed by forward
kinematics, so two clips agree exactly iff their frames agree. Error
metrics are zero for identical clips; the smoothness statistics describe
the second differences of the position RESIDUAL (pred minus ref), not the
absolute jerk of either clip, so a perfect track scores zero there too.
"""

from dataclasses import dataclass, replace

import numpy as np

from ..data import MotionClip, clip_states
from ..sim import Engine


@dataclass(frozen=True)
class TrackReport:
    """Tracking quality summary. Distances in metres, accelerations m/s^2."""

    mpbpe: float
    aligned: float
    accel: float
    smooth_mean: float
    smooth_std: float
    diverged: bool = False

    def __post_init__(self) -> None:
        for name in ("mpbpe", "aligned", "accel", "smooth_mean", "smooth_std"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")

    def as_dict(self) -> dict:
        return {
            "mpbpe": self.mpbpe,
            "aligned": self.aligned,
            "accel": self.accel,
            "smooth_mean": self.smooth_mean,
            "smooth_std": self.smooth_std,
            "diverged": self.diverged,
        }

    def with_divergence(self, flag: bool) -> "TrackReport":
        return replace(self, diverged=flag)


def body_positions(engine: Engine, clip: MotionClip) -> np.ndarray:
    """World body-center positions per frame, (T, nb, 2)."""
    pos, _, _, _ = engine.body_world(clip_states(clip))
    return pos


def similarity_align(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Map point set x onto y by the best proper rotation + scale + shift.

    Least-squares over all similarity transforms without reflection. A
    degenerate source set (zero variance) falls back to pure translation.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"point sets must match, got {x.shape} vs {y.shape}")
    n = x.shape[0]
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    var_x = float((xc**2).sum()) / n
    if var_x == 0.0:
        return x - mu_x + mu_y
    cov = yc.T @ xc / n
    u, d, vt = np.linalg.svd(cov)
    sign = np.ones(x.shape[1])
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[-1] = -1.0
    rot = u @ np.diag(sign) @ vt
    scale = float(d @ sign) / var_x
    return scale * (x @ rot.T) + (mu_y - scale * (rot @ mu_x))


def _second_diff(p: np.ndarray, fps: float) -> np.ndarray:
    """Central second differences scaled to m/s^2, (T-2, nb, 2)."""
    return (p[2:] - 2.0 * p[1:-1] + p[:-2]) * fps * fps


def metrics(engine: Engine, pred: MotionClip, ref: MotionClip) -> TrackReport:
    """Position error metrics between a tracked clip and its reference."""
    if pred.n_frames != ref.n_frames:
        raise ValueError(
            f"length mismatch: {pred.n_frames} vs {ref.n_frames} frames")
    if pred.fps != ref.fps:
        raise ValueError(f"fps mismatch: {pred.fps} vs {ref.fps}")
    p = body_positions(engine, pred)
    r = body_positions(engine, ref)
    t, nb, _ = p.shape

    mpbpe = float(np.linalg.norm(p - r, axis=-1).mean())
    aligned_pts = similarity_align(p.reshape(t * nb, 2), r.reshape(t * nb, 2))
    aligned = float(np.linalg.norm(aligned_pts - r.reshape(t * nb, 2), axis=-1).mean())

    if t >= 3:
        da = _second_diff(p, pred.fps) - _second_diff(r, ref.fps)
        accel = float(np.abs(da).mean())
        per_frame = np.linalg.norm(da, axis=-1).mean(axis=1)
        smooth_mean = float(per_frame.mean())
        smooth_std = float(per_frame.std())
    else:
        accel = smooth_mean = smooth_std = 0.0
    return TrackReport(mpbpe=mpbpe, aligned=aligned, accel=accel,
                       smooth_mean=smooth_mean, smooth_std=smooth_std)
