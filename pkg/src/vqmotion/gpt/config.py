"""Size presets for the autoregressive index-sequence model."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class GptConfig:
    n_codebooks: int = 4        # tuple arity Q, matches the codec stack
    codebook_size: int = 64     # vocabulary per layer
    width: int = 64
    n_heads: int = 4
    n_temporal: int = 4         # causal blocks along the code timeline
    n_depth: int = 2            # blocks along the within-step layer stack
    k_max: int = 50             # longest context, in code steps
    k_overlap: int = 5          # codes carried over a context restart
    cond_width: int | None = None  # cross-attention feature width; None = unconditional
    start_noise: float = 1.0    # stddev of the Gaussian mixed into the start token

    def __post_init__(self) -> None:
        if self.n_codebooks < 1 or self.codebook_size < 2:
            raise ValueError("need at least one codebook with two entries")
        if self.width % self.n_heads != 0:
            raise ValueError(f"width {self.width} not divisible by {self.n_heads} heads")
        if self.n_temporal < 1 or self.n_depth < 1:
            raise ValueError("both transformers need at least one block")
        if not 1 <= self.k_overlap < self.k_max:
            raise ValueError(f"overlap {self.k_overlap} outside [1, {self.k_max})")
        if self.cond_width is not None and self.cond_width < 1:
            raise ValueError("condition width must be positive when set")
        if self.start_noise < 0.0:
            raise ValueError("start noise stddev must be nonnegative")

    def scaled(self, **kw) -> "GptConfig":
        return replace(self, **kw)


def desk_gpt() -> GptConfig:
    return GptConfig()


def paper_scale_gpt() -> GptConfig:
    """Full-size block counts, kept as a named preset for report headers.

    Width and head count are not pinned anywhere authoritative; the values
    here are conventional for the block counts and are never trained in
    this repository.
    """
    return GptConfig(
        n_codebooks=8,
        codebook_size=512,
        width=512,
        n_heads=8,
        n_temporal=12,
        n_depth=5,
    )
