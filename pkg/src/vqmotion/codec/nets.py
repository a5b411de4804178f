"""Temporal convolution stacks mapping feature windows to codes and back.

The encoder downsamples time by exactly 4 (two stride-2 stages); the
upsampler mirrors it. Shapes follow the (batch, channels, time) convention
of the conv primitives.
"""

import numpy as np

from .. import nn
from ..nn import Tensor
from ..nn.layers import Conv1d, ConvTranspose1d, Linear, Module


class ResConv1DBlock(Module):
    """Pre-activation residual unit: x + conv1x1(relu(conv3(relu(x))))."""

    def __init__(self, width: int, rng: np.random.Generator):
        self.c3 = Conv1d(width, width, 3, rng, padding=1)
        self.c1 = Conv1d(width, width, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.c1(self.c3(x.relu()).relu())


class Encoder(Module):
    def __init__(self, feature_dim: int, width: int, rng: np.random.Generator,
                 blocks_per_stage: int = 3):
        self.proj_in = Conv1d(feature_dim, width, 3, rng, padding=1)
        self.down1 = Conv1d(width, width, 4, rng, stride=2, padding=1)
        self.res1 = [ResConv1DBlock(width, rng) for _ in range(blocks_per_stage)]
        self.down2 = Conv1d(width, width, 4, rng, stride=2, padding=1)
        self.res2 = [ResConv1DBlock(width, rng) for _ in range(blocks_per_stage)]
        self.proj_out = Conv1d(width, width, 3, rng, padding=1)

    def forward(self, x: Tensor) -> Tensor:
        """x: (B, feature_dim, T) with T divisible by 4 -> (B, width, T/4)."""
        if x.shape[-1] % 4 != 0:
            raise ValueError(f"window length {x.shape[-1]} not divisible by 4")
        h = self.proj_in(x)
        h = self.down1(h.relu())
        for blk in self.res1:
            h = blk(h)
        h = self.down2(h.relu())
        for blk in self.res2:
            h = blk(h)
        return self.proj_out(h.relu())


class Upsampler(Module):
    """Mirror of the encoder: codes (B, width, K) -> per-frame (B, width, 4K)."""

    def __init__(self, width: int, rng: np.random.Generator, blocks_per_stage: int = 3):
        self.proj_in = Conv1d(width, width, 3, rng, padding=1)
        self.res1 = [ResConv1DBlock(width, rng) for _ in range(blocks_per_stage)]
        self.up1 = ConvTranspose1d(width, width, 4, rng, stride=2, padding=1)
        self.res2 = [ResConv1DBlock(width, rng) for _ in range(blocks_per_stage)]
        self.up2 = ConvTranspose1d(width, width, 4, rng, stride=2, padding=1)
        self.proj_out = Conv1d(width, width, 3, rng, padding=1)

    def forward(self, z: Tensor) -> Tensor:
        h = self.proj_in(z)
        for blk in self.res1:
            h = blk(h)
        h = self.up1(h.relu())
        for blk in self.res2:
            h = blk(h)
        h = self.up2(h.relu())
        return self.proj_out(h.relu())


class VariationalBottleneck(Module):
    """Gaussian bottleneck drop-in for the quantizer (ablation variant)."""

    def __init__(self, width: int, rng: np.random.Generator):
        self.mu_head = Linear(width, width, rng)
        self.logvar_head = Linear(width, width, rng, scale=0.1)

    def forward(self, v: Tensor) -> tuple[Tensor, Tensor]:
        return self.mu_head(v), self.logvar_head(v)


def reparameterize(mu: Tensor, logvar: Tensor, rng: np.random.Generator):
    """Sample v = mu + sigma * eps and the elementwise KL to N(0, 1).

    KL per element is (mu^2 + sigma^2 - 1 - log sigma^2) / 2, zero exactly
    at the standard normal.
    """
    if mu.shape != logvar.shape:
        raise nn.ShapeError("reparameterize", mu.shape, logvar.shape)
    eps = Tensor(rng.standard_normal(mu.shape))
    v = mu + (logvar * 0.5).exp() * eps
    kl = (mu * mu + logvar.exp() - 1.0 - logvar) * 0.5
    return v, kl
