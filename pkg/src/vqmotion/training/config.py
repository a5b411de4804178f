"""Training-loop configuration and scale presets."""

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class TrainConfig:
    """Weights, cadences, and seeds for the alternating training loop.

    The loss is  recon + beta1*commit + beta2*vq + beta3*reg  where reg is
    w1 * |a - a_ema|^2 + w2 * |a|^2 summed over the window. beta2 carries
    no gradient while the codebooks are EMA-maintained; it is still
    reported. action_beta is the actuation smoothing factor; gamma the
    codebook retention decay.
    """

    preset: str = "desk"
    beta1: float = 0.25
    beta2: float = 1.0
    beta3: float = 1.0
    w1: float = 0.5
    w2: float = 0.01
    action_beta: float = 0.8
    gamma: float = 0.99
    window: int = 24
    iterations: int = 200
    warmup_iterations: int = 10
    frames_per_iteration: int = 1024
    world_steps: int = 8
    world_batch: int = 256
    world_horizon: int = 8
    codec_steps: int = 8
    codec_batch: int = 16
    codec_lr: float = 1e-3
    world_lr: float = 1e-3
    reset_every: int = 50
    min_usage_frac: float = 0.01
    checkpoint_every: int = 100
    quantizer_dropout: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("beta1", "beta2", "beta3", "w1", "w2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.action_beta <= 1:
            raise ValueError("action_beta must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.window < 4 or self.window % 4:
            raise ValueError("window must be a positive multiple of 4 frames")
        if self.iterations < 1 or self.warmup_iterations < 1:
            raise ValueError("iteration counts must be positive")
        if self.frames_per_iteration < self.window:
            raise ValueError("each iteration must collect at least one window")

    def scaled(self, **kw) -> "TrainConfig":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


def desk_train() -> TrainConfig:
    """Workstation preset; small nets, minutes-scale smoke runs."""
    return TrainConfig()


def paper_scale_train() -> TrainConfig:
    """Full-size preset: learning rate 1e-5, same replay cadence and window."""
    return TrainConfig(
        preset="paper-scale",
        codec_lr=1e-5,
        world_lr=1e-5,
        iterations=20_000,
        checkpoint_every=1_000,
    )
