"""The assembled codec: encoder, codebooks, upsampler, and policy."""

import numpy as np

from ..data import MotionClip, clip_states
from ..nn import Tensor, straight_through
from ..nn.layers import Module
from ..sim import Engine
from .config import CodecConfig
from .nets import Encoder, Upsampler
from .policy import MoEPolicy
from .quantize import CodebookStack


def window_features(engine: Engine, clip: MotionClip) -> np.ndarray:
    """Reference-pose features for every frame of a clip, (T, feature_dim)."""
    return engine.featurize(clip_states(clip))


def batch_window_features(engine: Engine, windows) -> np.ndarray:
    """Stack clip windows into encoder input (B, feature_dim, T)."""
    return np.stack([window_features(engine, w).T for w in windows])


class Codec(Module):
    def __init__(self, cfg: CodecConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.encoder = Encoder(cfg.feature_dim, cfg.code_width, rng)
        self.upsampler = Upsampler(cfg.code_width, rng)
        self.policy = MoEPolicy(
            cfg.feature_dim, cfg.code_width, cfg.action_dim, rng,
            experts=cfg.experts, width=cfg.expert_width,
            depth=cfg.expert_depth, gating_width=cfg.gating_width)
        self.quant = CodebookStack(
            cfg.n_codebooks, cfg.codebook_size, cfg.code_width,
            decay=cfg.decay, seed=seed + 1)

    def encode(self, feats) -> Tensor:
        """Feature windows (B, feature_dim, T) -> continuous codes (B, K, C)."""
        x = feats if isinstance(feats, Tensor) else Tensor(feats)
        return self.encoder(x).swapaxes(1, 2)

    def quantize_st(self, v: Tensor, active_layers: int | None = None):
        """Quantize with the straight-through gradient path.

        Returns (z, s): z forwards the quantized values bitwise while
        passing gradients to v; s holds the index tuples.
        """
        z_np, s = self.quant.quantize(v.data, active_layers)
        return straight_through(v, Tensor(z_np)), s

    def upsample(self, z) -> Tensor:
        """(B, K, C) codes -> (B, T, C) per-frame policy conditioning."""
        t = z if isinstance(z, Tensor) else Tensor(z)
        return self.upsampler(t.swapaxes(1, 2)).swapaxes(1, 2)

    def state(self) -> dict:
        out = Module.state(self)
        for name, arr in self.quant.state().items():
            out[f"quant.{name}"] = arr
        return out

    def load_state(self, state: dict) -> None:
        quant = {k[len("quant."):]: v for k, v in state.items() if k.startswith("quant.")}
        Module.load_state(self, {k: v for k, v in state.items() if not k.startswith("quant.")})
        self.quant.load_state(quant)
