"""Configuration for the learned dynamics model and its replay buffer."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class WorldConfig:
    """Sizes and schedules for the dynamics net, its data, and its training.

    ``horizon`` is the open-loop rollout length used by the training loss;
    8 was picked by a small held-out 20-step divergence sweep over
    {1, 4, 8, 16} (see scripts/sweep_world_horizon.py).
    """

    feature_dim: int = 58
    action_dim: int = 6
    width: int = 128
    depth: int = 4
    horizon: int = 8
    lr: float = 1e-3
    warmup_updates: int = 10
    replay_capacity: int = 50_000
    frames_per_iteration: int = 1024

    def __post_init__(self) -> None:
        if self.feature_dim < 1 or self.action_dim < 1:
            raise ValueError("feature and action dims must be positive")
        if self.depth < 2:
            raise ValueError("dynamics net needs at least two layers")
        if self.horizon < 1:
            raise ValueError("rollout horizon must be at least 1")
        if self.warmup_updates < 1:
            raise ValueError("normalizer warm-up needs at least one update")
        if self.replay_capacity < 1:
            raise ValueError("replay capacity must be positive")
        if not 0 < self.frames_per_iteration <= self.replay_capacity:
            raise ValueError("per-iteration frame count must fit the buffer")

    def scaled(self, **kw) -> "WorldConfig":
        return replace(self, **kw)


def desk_world() -> WorldConfig:
    """Small preset sized for the planar character on one workstation."""
    return WorldConfig()


def paper_scale_world() -> WorldConfig:
    """Full-size preset: 4 layers of 512 units, same replay cadence."""
    return WorldConfig(width=512)
