"""Width and size presets for the codec stack."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class CodecConfig:
    feature_dim: int = 58
    action_dim: int = 6
    code_width: int = 32
    codebook_size: int = 64
    n_codebooks: int = 4
    window: int = 24  # frames per training window; 4x temporal downsampling
    experts: int = 4
    expert_width: int = 64
    expert_depth: int = 3
    gating_width: int = 32
    decay: float = 0.99  # EMA retention for codebook updates

    def __post_init__(self) -> None:
        if self.window % 4 != 0:
            raise ValueError(f"window {self.window} must be divisible by 4")
        if self.n_codebooks < 1:
            raise ValueError("need at least one codebook")
        if not 0.0 <= self.decay < 1.0:
            raise ValueError(f"decay {self.decay} outside [0, 1)")

    @property
    def n_codes(self) -> int:
        return self.window // 4

    def scaled(self, **kw) -> "CodecConfig":
        return replace(self, **kw)


def desk_codec() -> CodecConfig:
    return CodecConfig()


def paper_scale_codec() -> CodecConfig:
    """Full-size widths, kept as a named preset for report headers.

    Not trained in this repository; the desk corpus is minutes long, not
    tens of hours.
    """
    return CodecConfig(
        code_width=768,
        codebook_size=512,
        n_codebooks=8,
        experts=6,
        expert_width=256,
        expert_depth=4,
        gating_width=64,
    )
