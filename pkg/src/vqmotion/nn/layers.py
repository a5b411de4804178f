"""Parameterized building blocks: modules with named, ordered parameters.

Parameter order follows attribute insertion order and is part of each
module's contract; serialization and optimizers both rely on it.
"""

from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import Array, Tensor


class Module:
    """Base class providing recursive, deterministically ordered parameters."""

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                out.append((key, value))
            elif isinstance(value, Module):
                out.extend((f"{key}.{n}", p) for n, p in value.named_parameters())
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(
                            (f"{key}.{i}.{n}", p) for n, p in item.named_parameters()
                        )
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out.append((f"{key}.{i}", item))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state(self) -> dict[str, Array]:
        return {n: p.data.copy() for n, p in self.named_parameters()}

    def load_state(self, state: dict[str, Array]) -> None:
        params = dict(self.named_parameters())
        if set(params) != set(state):
            missing = sorted(set(params) ^ set(state))
            raise KeyError(f"parameter name mismatch: {missing}")
        for name, arr in state.items():
            p = params[name]
            if p.data.shape != arr.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.data.shape}")
            p.data = np.asarray(arr, dtype=np.float64).copy()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _param(data: Array) -> Tensor:
    return Tensor(data, requires_grad=True)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, scale: float = 1.0):
        std = scale * np.sqrt(2.0 / d_in)
        self.w = _param(rng.normal(0.0, std, size=(d_out, d_in)))
        self.b = _param(np.zeros(d_out))

    def zero_(self) -> "Linear":
        """Zero the weights in place (output heads that must start inert)."""
        self.w.data[:] = 0.0
        return self

    def forward(self, x: Tensor) -> Tensor:
        return x @ self.w.transpose() + self.b


class MLP(Module):
    """ReLU multilayer perceptron; `dims` lists every layer width in order."""

    def __init__(self, dims: list[int], rng: np.random.Generator, out_scale: float = 1.0):
        if len(dims) < 2:
            raise ValueError("MLP needs at least input and output widths")
        self.layers = [
            Linear(dims[i], dims[i + 1], rng, scale=out_scale if i == len(dims) - 2 else 1.0)
            for i in range(len(dims) - 1)
        ]

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = layer(x).relu()
        return self.layers[-1](x)


class Conv1d(Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        kernel: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
    ):
        std = np.sqrt(2.0 / (c_in * kernel))
        self.w = _param(rng.normal(0.0, std, size=(c_out, c_in, kernel)))
        self.b = _param(np.zeros(c_out))
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.w, self.b, self.stride, self.padding)


class ConvTranspose1d(Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        kernel: int,
        rng: np.random.Generator,
        stride: int = 2,
        padding: int = 1,
    ):
        std = np.sqrt(2.0 / (c_in * kernel))
        self.w = _param(rng.normal(0.0, std, size=(c_in, c_out, kernel)))
        self.b = _param(np.zeros(c_out))
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose1d(x, self.w, self.b, self.stride, self.padding)


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = 1e-5):
        self.gain = _param(np.ones(width))
        self.bias = _param(np.zeros(width))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.bias, self.eps)


class Embedding(Module):
    """Index lookup table; gradients scatter-add across repeated indices."""

    def __init__(self, n: int, width: int, rng: np.random.Generator):
        self.w = _param(rng.normal(0.0, 1.0 / np.sqrt(width), size=(n, width)))

    def forward(self, idx) -> Tensor:
        return self.w.take(np.asarray(idx, dtype=np.int64))


class MultiHeadAttention(Module):
    """Projected multi-head attention over (N, T, width) sequences.

    Self-attention by default; pass `kv` to attend over a second sequence
    instead (cross-attention). `causal` masks keys later than each query.
    """

    def __init__(self, width: int, n_heads: int, rng: np.random.Generator):
        if width % n_heads != 0:
            raise ValueError(f"width {width} not divisible by {n_heads} heads")
        self.wq = Linear(width, width, rng)
        self.wk = Linear(width, width, rng)
        self.wv = Linear(width, width, rng)
        self.wo = Linear(width, width, rng)
        self.n_heads = n_heads

    def _split(self, x: Tensor) -> Tensor:
        n, t, w = x.shape
        return x.reshape(n, t, self.n_heads, w // self.n_heads).transpose(0, 2, 1, 3)

    def forward(self, x: Tensor, kv: Tensor | None = None, causal: bool = False) -> Tensor:
        src = x if kv is None else kv
        q, k, v = self._split(self.wq(x)), self._split(self.wk(src)), self._split(self.wv(src))
        out = F.attention(q, k, v, causal=causal)
        n, _, t, _ = out.shape
        return self.wo(out.transpose(0, 2, 1, 3).reshape(n, t, -1))
