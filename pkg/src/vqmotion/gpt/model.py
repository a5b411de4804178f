"""Two-axis autoregressive model over quantized index sequences.

A temporal transformer turns the indices before step k into a context
feature (strictly causal, so later steps cannot leak backward), and a
depth transformer expands that feature into one categorical distribution
per codebook layer, each conditioned on the shallower indices already
fixed at the same step. Output heads start zeroed, so a fresh model is
exactly uniform over every layer.

Sequences are (K, Q) int64 arrays: K steps, Q indices per step, ordered
base layer first. Batched entry points take (B, K, Q).
"""

from __future__ import annotations

import numpy as np

from ..nn import functional as F
from ..nn.layers import MLP, Embedding, LayerNorm, Linear, Module, MultiHeadAttention
from ..nn.tensor import Tensor, concat, no_grad, stack
from .config import GptConfig


class _Block(Module):
    """Pre-norm residual block: attention, optional cross-attention, MLP."""

    def __init__(self, width: int, n_heads: int, rng: np.random.Generator,
                 cross: bool = False):
        self.ln1 = LayerNorm(width)
        self.attn = MultiHeadAttention(width, n_heads, rng)
        if cross:
            self.ln_x = LayerNorm(width)
            self.xattn = MultiHeadAttention(width, n_heads, rng)
        self.ln2 = LayerNorm(width)
        self.ff = MLP([width, 4 * width, width], rng)
        self._cross = cross

    def forward(self, x: Tensor, cond: Tensor | None = None) -> Tensor:
        x = x + self.attn(self.ln1(x), causal=True)
        if self._cross:
            x = x + self.xattn(self.ln_x(x), kv=cond)
        x = x + self.ff(self.ln2(x))
        return x


class GptNet(Module):
    def __init__(self, cfg: GptConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        q, s, w = cfg.n_codebooks, cfg.codebook_size, cfg.width
        self.cfg = cfg
        self.code_embed = [Embedding(s, w, rng) for _ in range(q)]
        self.start = Tensor(rng.normal(0.0, 1.0 / np.sqrt(w), size=(w,)),
                            requires_grad=True)
        self.pos_temporal = Embedding(cfg.k_max, w, rng)
        if cfg.cond_width is not None:
            self.cond_proj = Linear(cfg.cond_width, w, rng)
        self.temporal = [
            _Block(w, cfg.n_heads, rng, cross=cfg.cond_width is not None)
            for _ in range(cfg.n_temporal)
        ]
        self.ln_f = LayerNorm(w)
        self.depth_embed = [Embedding(s, w, rng) for _ in range(q - 1)]
        self.pos_depth = Embedding(q, w, rng)
        self.depth_blocks = [_Block(w, cfg.n_heads, rng) for _ in range(cfg.n_depth)]
        self.ln_d = LayerNorm(w)
        self.heads = [Linear(w, s, rng).zero_() for _ in range(q)]

    # -- validation ----------------------------------------------------------

    def _check_codes(self, codes, min_len: int, max_len: int) -> np.ndarray:
        arr = np.asarray(codes)
        if arr.ndim != 3 or arr.shape[2] != self.cfg.n_codebooks:
            raise ValueError(
                f"expected (batch, steps, {self.cfg.n_codebooks}) indices, "
                f"got shape {arr.shape}")
        if arr.size and not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("indices must be integers")
        if arr.size and (arr.min() < 0 or arr.max() >= self.cfg.codebook_size):
            raise ValueError(
                f"index out of range for codebook size {self.cfg.codebook_size}")
        if not min_len <= arr.shape[1] <= max_len:
            raise ValueError(
                f"sequence length {arr.shape[1]} outside [{min_len}, {max_len}]")
        return arr.astype(np.int64, copy=False)

    def _check_cond(self, cond, batch: int) -> Tensor | None:
        if self.cfg.cond_width is None:
            if cond is not None:
                raise ValueError("this model takes no condition features")
            return None
        if cond is None:
            raise ValueError("condition features required by this model")
        arr = np.asarray(cond, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[2] != self.cfg.cond_width:
            raise ValueError(
                f"condition features must be (rows, {self.cfg.cond_width})")
        if arr.shape[0] not in (1, batch) or arr.shape[1] < 1:
            raise ValueError(f"condition batch shape {arr.shape} unusable")
        if not np.all(np.isfinite(arr)):
            raise ValueError("condition features must be finite")
        return self.cond_proj(Tensor(arr))

    def _start_tokens(self, batch: int, start_noise) -> Tensor:
        w = self.cfg.width
        if start_noise is None:
            base = np.zeros((batch, 1, w))
        else:
            base = np.asarray(start_noise, dtype=np.float64)
            if base.shape != (batch, w):
                raise ValueError(f"start noise must be ({batch}, {w})")
            base = base[:, None, :]
        return self.start.reshape(1, 1, w) + Tensor(base)

    # -- temporal axis ---------------------------------------------------------

    def _embed_codes(self, arr: np.ndarray) -> Tensor:
        out = self.code_embed[0](arr[..., 0])
        for d in range(1, self.cfg.n_codebooks):
            out = out + self.code_embed[d](arr[..., d])
        return out

    def _temporal(self, x: Tensor, cond: Tensor | None) -> Tensor:
        x = x + self.pos_temporal(np.arange(x.shape[1]))
        for block in self.temporal:
            x = block(x, cond=cond)
        return self.ln_f(x)

    def context_features(self, codes, cond=None, start_noise=None) -> Tensor:
        """Teacher-forced context per step: feature k sees only steps < k."""
        arr = self._check_codes(codes, min_len=1, max_len=self.cfg.k_max)
        b, k, _ = arr.shape
        tok = self._start_tokens(b, start_noise)
        x = tok if k == 1 else concat([tok, self._embed_codes(arr[:, :-1])], axis=1)
        return self._temporal(x, self._check_cond(cond, b))

    def prefix_feature(self, prefix, cond=None, start_noise=None) -> Tensor:
        """Context feature for the step after `prefix` (which may be empty)."""
        arr = self._check_codes(prefix, min_len=0, max_len=self.cfg.k_max - 1)
        b = arr.shape[0]
        tok = self._start_tokens(b, start_noise)
        x = tok if arr.shape[1] == 0 else concat([tok, self._embed_codes(arr)], axis=1)
        return self._temporal(x, self._check_cond(cond, b))[:, -1]

    # -- depth axis ---------------------------------------------------------------

    def _depth_stack(self, f: Tensor, emb_rows: list[Tensor]) -> Tensor:
        n, w = f.shape
        parts = [f.reshape(n, 1, w)] + [e.reshape(n, 1, w) for e in emb_rows]
        x = parts[0] if len(parts) == 1 else concat(parts, axis=1)
        x = x + self.pos_depth(np.arange(len(parts)))
        for block in self.depth_blocks:
            x = block(x)
        return self.ln_d(x)

    def depth_logits(self, f: Tensor, codes: np.ndarray) -> Tensor:
        """All per-layer logits for one step, teacher-forced: (N, Q, S)."""
        q = self.cfg.n_codebooks
        rows = [self.depth_embed[d - 1](codes[:, d - 1]) for d in range(1, q)]
        x = self._depth_stack(f, rows)
        return stack([self.heads[d](x[:, d]) for d in range(q)], axis=1)

    def layer_logits(self, f: Tensor, shallower: np.ndarray) -> Tensor:
        """Logits for layer d given the d already-chosen shallower indices."""
        d = shallower.shape[1]
        rows = [self.depth_embed[j](shallower[:, j]) for j in range(d)]
        x = self._depth_stack(f, rows)
        return self.heads[d](x[:, d])

    # -- likelihood -------------------------------------------------------------------

    def sequence_logits(self, codes, cond=None, start_noise=None) -> Tensor:
        """(B, K, Q, S) teacher-forced logits for every step and layer."""
        arr = self._check_codes(codes, min_len=1, max_len=self.cfg.k_max)
        b, k, q = arr.shape
        f = self.context_features(arr, cond, start_noise)
        flat = self.depth_logits(
            f.reshape(b * k, self.cfg.width), arr.reshape(b * k, q))
        return flat.reshape(b, k, q, self.cfg.codebook_size)

    def nll(self, codes, cond=None, start_noise=None) -> Tensor:
        """Total negative log-likelihood, summed over batch, steps, layers."""
        arr = self._check_codes(codes, min_len=1, max_len=self.cfg.k_max)
        b, k, q = arr.shape
        logp = F.log_softmax(self.sequence_logits(arr, cond, start_noise), axis=-1)
        picked = logp[
            np.arange(b)[:, None, None], np.arange(k)[None, :, None],
            np.arange(q)[None, None, :], arr]
        return -picked.sum()


def nll_loss(net: GptNet, seq, cond=None, rng: np.random.Generator | None = None) -> float:
    """Sequence-total NLL in nats for one (K, Q) index sequence.

    With `rng` the start token carries a fresh Gaussian draw, matching the
    training-time input distribution; without it the noise is zero.
    """
    arr = np.asarray(seq)
    if arr.ndim != 2:
        raise ValueError(f"expected a (steps, layers) sequence, got {arr.shape}")
    noise = None
    if rng is not None:
        noise = rng.normal(size=(1, net.cfg.width)) * net.cfg.start_noise
    with no_grad():
        return float(net.nll(arr[None], cond, noise).data)
