"""Motion clip container, binary clip files, resampling and corruption."""

import struct
from dataclasses import dataclass, field

import numpy as np

from ..sim import CharacterSpec, SimState

MAGIC = b"MCQ1"
FORMAT_VERSION = 1


class ClipParseError(ValueError):
    """Malformed clip file; carries the byte offset where parsing stopped."""

    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class MotionClip:
    """Pose sequence at a fixed frame rate.

    Each frame is [root x, root y, root angle, joint angles...]; the root
    columns locate the character's reference point in the world. Clips are
    immutable values; the frame array is copied in and marked read-only.
    """

    fps: float
    frames: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        f = np.array(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] < 4:
            raise ValueError(f"frames must be (F, 3 + joints), got {f.shape}")
        f.flags.writeable = False
        object.__setattr__(self, "frames", f)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1] - 3

    @property
    def duration(self) -> float:
        """Covered time span, counting each frame as one period."""
        return self.n_frames / self.fps

    @property
    def root_pos(self) -> np.ndarray:
        return self.frames[:, 0:2]

    @property
    def root_angle(self) -> np.ndarray:
        return self.frames[:, 2]

    @property
    def joint_angles(self) -> np.ndarray:
        return self.frames[:, 3:]

    def window(self, start: int, length: int) -> "MotionClip":
        if start < 0 or start + length > self.n_frames:
            raise ValueError(f"window [{start}, {start + length}) outside clip of {self.n_frames} frames")
        return MotionClip(self.fps, self.frames[start : start + length])


def save_clip(clip: MotionClip, path) -> None:
    payload = np.ascontiguousarray(clip.frames, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IdII", FORMAT_VERSION, clip.fps, clip.n_joints, clip.n_frames))
        fh.write(payload)


def load_clip(path) -> MotionClip:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise ClipParseError("truncated file: magic bytes missing", len(blob))
    if blob[:4] != MAGIC:
        raise ClipParseError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}", 0)
    header = struct.calcsize("<IdII")
    if len(blob) < 4 + header:
        raise ClipParseError("truncated file: header incomplete", len(blob))
    version, fps, n_joints, n_frames = struct.unpack_from("<IdII", blob, 4)
    if version != FORMAT_VERSION:
        raise ClipParseError(f"unsupported clip format version {version}", 4)
    row = 3 + n_joints
    need = n_frames * row * 8
    body = blob[4 + header :]
    if len(body) < need:
        raise ClipParseError(
            f"truncated file: frame data needs {need} bytes, found {len(body)}", len(blob))
    if len(body) > need:
        raise ClipParseError(f"{len(body) - need} trailing bytes after frame data", 4 + header + need)
    frames = np.frombuffer(body, dtype="<f8").reshape(n_frames, row)
    return MotionClip(fps, frames)


def resample(clip: MotionClip, fps: float) -> MotionClip:
    """Change the frame rate.

    Positions interpolate linearly; angle channels interpolate along the
    shortest arc (consecutive-frame steps under pi radians are assumed).
    The covered duration is preserved to within one frame period.
    """
    if fps <= 0:
        raise ValueError(f"target fps must be positive, got {fps}")
    if clip.n_frames == 0:
        raise ValueError("cannot resample an empty clip")
    if fps == clip.fps:
        return MotionClip(clip.fps, clip.frames)
    n_new = max(1, int(round(clip.n_frames * fps / clip.fps)))
    t_src = np.arange(clip.n_frames) / clip.fps
    t_new = np.arange(n_new) / fps
    out = np.empty((n_new, clip.frames.shape[1]))
    for c in range(2):
        out[:, c] = np.interp(t_new, t_src, clip.frames[:, c])
    unwrapped = np.unwrap(clip.frames[:, 2:], axis=0)
    for c in range(unwrapped.shape[1]):
        out[:, 2 + c] = np.interp(t_new, t_src, unwrapped[:, c])
    return MotionClip(fps, out)


def add_noise(clip: MotionClip, sigma: float, seed: int) -> MotionClip:
    """Corrupt joint angles with Gaussian noise; the root stays untouched."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    frames = clip.frames.copy()
    frames[:, 3:] += rng.normal(0.0, sigma, size=frames[:, 3:].shape) if sigma > 0 else 0.0
    return MotionClip(clip.fps, frames)


MAX_ROOT_SPEED = 10.0  # m/s, kinematic sanity bound


def check_clip(clip: MotionClip, char: CharacterSpec) -> None:
    """Raise if the clip violates joint limits or plausible root speed."""
    if clip.n_joints != char.n_joints:
        raise ValueError(f"clip has {clip.n_joints} joints, character has {char.n_joints}")
    lo = np.array([j.limit_lo for j in char.joints])
    hi = np.array([j.limit_hi for j in char.joints])
    j = clip.joint_angles
    if (j < lo - 1e-9).any() or (j > hi + 1e-9).any():
        bad = int(np.argwhere((j < lo - 1e-9) | (j > hi + 1e-9))[0][0])
        raise ValueError(f"joint angles outside limits at frame {bad}")
    if clip.n_frames > 1:
        speed = np.linalg.norm(np.diff(clip.root_pos, axis=0), axis=1) * clip.fps
        if (speed >= MAX_ROOT_SPEED).any():
            bad = int(np.argmax(speed >= MAX_ROOT_SPEED))
            raise ValueError(f"root speed {speed[bad]:.2f} m/s at frame {bad} exceeds {MAX_ROOT_SPEED}")


def clip_states(clip: MotionClip) -> SimState:
    """Frames as a batched state, velocities by finite differences.

    Interior frames use central differences; the ends use one-sided ones.
    A single-frame clip gets zero velocities.
    """
    f = clip.frames
    if clip.n_frames == 1:
        vel = np.zeros_like(f)
    else:
        vel = np.gradient(f, 1.0 / clip.fps, axis=0)
    return SimState(
        root_pos=f[:, 0:2].copy(),
        root_angle=f[:, 2].copy(),
        joint_angles=f[:, 3:].copy(),
        root_vel=vel[:, 0:2],
        root_ang_vel=vel[:, 2],
        joint_vels=vel[:, 3:],
    )
