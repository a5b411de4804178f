"""Size and schedule presets for the latent steering controller."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class SteerConfig:
    """Network widths plus the task geometry shared by every steering op.

    code_width must match the frozen codec the policy is distilled
    against. sample_offsets are the lookahead instants (seconds) a task
    describes; taus are the per-sample blend parameters, raised to
    gamma_pos for position channels and gamma_rot for facing channels.
    """

    code_width: int = 32
    experts: int = 4
    expert_width: int = 64
    expert_depth: int = 4
    gating_width: int = 64
    projector_width: int = 64
    sample_offsets: tuple[float, ...] = (0.3, 0.6, 0.9)
    taus: tuple[float, ...] = (1.0 / 3.0, 2.0 / 3.0, 1.0)
    gamma_pos: float = 0.5
    gamma_rot: float = 2.0
    filter_tau: float = 0.3  # s, easing constant for user targets

    def __post_init__(self) -> None:
        for name in ("code_width", "experts", "expert_width", "expert_depth",
                     "gating_width", "projector_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if len(self.sample_offsets) < 1:
            raise ValueError("need at least one lookahead sample")
        if len(self.taus) != len(self.sample_offsets):
            raise ValueError(
                f"{len(self.taus)} blend parameters for {len(self.sample_offsets)} samples")
        prev = 0.0
        for dt in self.sample_offsets:
            if dt <= prev:
                raise ValueError(f"sample offsets must increase from 0, got {self.sample_offsets}")
            prev = dt
        for tau in self.taus:
            if not 0.0 < tau <= 1.0:
                raise ValueError(f"blend parameter {tau} outside (0, 1]")
        if self.gamma_pos <= 0 or self.gamma_rot <= 0:
            raise ValueError("blend exponents must be positive")
        if self.filter_tau <= 0:
            raise ValueError(f"filter time constant must be positive, got {self.filter_tau}")

    @property
    def n_samples(self) -> int:
        return len(self.sample_offsets)

    @property
    def task_dim(self) -> int:
        """Flat width of a task: position (2) + facing (2) per sample."""
        return 4 * self.n_samples

    def scaled(self, **kw) -> "SteerConfig":
        return replace(self, **kw)


def desk_steer() -> SteerConfig:
    return SteerConfig()


def paper_scale_steer() -> SteerConfig:
    """Full-size widths, a named preset for report headers; not trained here."""
    return SteerConfig(code_width=768, expert_width=256)
