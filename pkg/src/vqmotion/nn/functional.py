"""Network-level operations built on the Tensor autodiff core.

Convolutions run as im2col matmuls so the heavy lifting stays in BLAS.
Softmax and log-softmax carry fused backward rules; layer normalization
and attention are composites of primitive ops.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import Array, ShapeError, Tensor

_NEG_INF = -1e30


def _im2col(xp: Array, kernel: int, stride: int, l_out: int) -> Array:
    """View a padded (B, C, Lp) array as (B, C, K, l_out) sliding windows."""
    b, c, _ = xp.shape
    sb, sc, sl = xp.strides
    return as_strided(xp, (b, c, kernel, l_out), (sb, sc, sl, sl * stride))


def conv1d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """x (B, Cin, L) * w (Cout, Cin, K) -> (B, Cout, Lout)."""
    if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
        raise ShapeError("conv1d", x.shape, w.shape)
    bsz, cin, length = x.shape
    cout, _, kernel = w.shape
    l_out = (length + 2 * padding - kernel) // stride + 1
    if l_out <= 0:
        raise ShapeError("conv1d", x.shape, w.shape)
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    cols = _im2col(xp, kernel, stride, l_out).reshape(bsz, cin * kernel, l_out)
    w2 = w.data.reshape(cout, cin * kernel)
    out = w2 @ cols
    if b is not None:
        out = out + b.data[:, None]

    def bw_x(g: Array) -> Array:
        g_cols = (w2.T @ g).reshape(bsz, cin, kernel, l_out)
        gxp = np.zeros_like(xp)
        for i in range(kernel):
            gxp[:, :, i : i + stride * l_out : stride] += g_cols[:, :, i, :]
        return gxp[:, :, padding : padding + length]

    def bw_w(g: Array) -> Array:
        cols_full = _im2col(xp, kernel, stride, l_out).reshape(bsz, cin * kernel, l_out)
        return (g @ cols_full.transpose(0, 2, 1)).sum(axis=0).reshape(cout, cin, kernel)

    parents = [x, w]
    fns = [bw_x, bw_w]
    if b is not None:
        parents.append(b)
        fns.append(lambda g: g.sum(axis=(0, 2)))
    return Tensor._make(out, parents, fns)


def conv_transpose1d(
    x: Tensor, w: Tensor, b: Tensor | None, stride: int = 2, padding: int = 1
) -> Tensor:
    """x (B, Cin, L) * w (Cin, Cout, K) -> (B, Cout, (L-1)*stride + K - 2*padding)."""
    if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[0]:
        raise ShapeError("conv_transpose1d", x.shape, w.shape)
    bsz, cin, length = x.shape
    _, cout, kernel = w.shape
    l_full = (length - 1) * stride + kernel
    l_out = l_full - 2 * padding
    if l_out <= 0:
        raise ShapeError("conv_transpose1d", x.shape, w.shape)
    w2 = w.data.reshape(cin, cout * kernel)
    cols = (w2.T @ x.data).reshape(bsz, cout, kernel, length)
    full = np.zeros((bsz, cout, l_full), dtype=np.float64)
    for i in range(kernel):
        full[:, :, i : i + stride * length : stride] += cols[:, :, i, :]
    out = full[:, :, padding : padding + l_out]
    if b is not None:
        out = out + b.data[:, None]

    def _grad_cols(g: Array) -> Array:
        gp = np.zeros((bsz, cout, l_full), dtype=np.float64)
        gp[:, :, padding : padding + l_out] = g
        return _im2col(gp, kernel, stride, length)  # (B, Cout, K, L)

    def bw_x(g: Array) -> Array:
        g_cols = _grad_cols(g).reshape(bsz, cout * kernel, length)
        return w2 @ g_cols

    def bw_w(g: Array) -> Array:
        g_cols = _grad_cols(g).reshape(bsz, cout * kernel, length)
        return (x.data @ g_cols.transpose(0, 2, 1)).sum(axis=0).reshape(cin, cout, kernel)

    parents = [x, w]
    fns = [bw_x, bw_w]
    if b is not None:
        parents.append(b)
        fns.append(lambda g: g.sum(axis=(0, 2)))
    return Tensor._make(out, parents, fns)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g: Array) -> Array:
        return y * (g - (g * y).sum(axis=axis, keepdims=True))

    return Tensor._make(y, (x,), (bw,))


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def bw(g: Array) -> Array:
        return g - np.exp(out) * g.sum(axis=axis, keepdims=True)

    return Tensor._make(out, (x,), (bw,))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean, unit variance, then rescale."""
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered * ((var + eps) ** -0.5) * gain + bias


def attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    causal: bool = False,
    mask: Array | None = None,
) -> Tensor:
    """Scaled dot-product attention over (..., T, D) stacks.

    `causal` hides keys later than each query (aligned to the sequence
    ends when query and key lengths differ). `mask` is an optional boolean
    array, True where attention is allowed, broadcast against the score
    shape (..., Tq, Tk).
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError("attention", q.shape, k.shape)
    tq, tk = q.shape[-2], k.shape[-2]
    scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(q.shape[-1]))
    bias = np.zeros((tq, tk), dtype=np.float64)
    if causal:
        allowed = np.tril(np.ones((tq, tk), dtype=bool), k=tk - tq)
        bias = np.where(allowed, bias, _NEG_INF)
    if mask is not None:
        bias = np.where(np.asarray(mask, dtype=bool), bias, _NEG_INF)
    if causal or mask is not None:
        scores = scores + Tensor(bias)
    return softmax(scores, axis=-1) @ v


def mse(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("mse", a.shape, b.shape)
    d = a - b
    return (d * d).mean()


def l1(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("l1", a.shape, b.shape)
    return (a - b).abs().mean()
