"""Residual vector quantization with EMA codebook maintenance.

A stack of Q codebooks quantizes each code vector greedily: layer d snaps
the residual left by layers 0..d-1 to its nearest entry. Every residual
layer (d >= 1) keeps entry 0 frozen at zero, which makes per-layer residual
norms non-increasing and gives layer dropout an exact no-op path.
"""

import numpy as np


class CodebookStack:
    def __init__(self, n_codebooks: int, size: int, width: int,
                 decay: float = 0.99, seed: int = 0):
        if n_codebooks < 1 or size < 2:
            raise ValueError("need at least one codebook with two entries")
        self.n_codebooks = n_codebooks
        self.size = size
        self.width = width
        self.decay = decay
        self.entries = np.zeros((n_codebooks, size, width))
        self.cluster_size = np.zeros((n_codebooks, size))
        self.cluster_sum = np.zeros((n_codebooks, size, width))
        self.usage = np.full((n_codebooks, size), 1.0 / size)
        self.initialized = False
        self._rng = np.random.default_rng(seed)

    def _frozen_mask(self) -> np.ndarray:
        """(Q, size) True where the entry participates in updates."""
        mask = np.ones((self.n_codebooks, self.size), dtype=bool)
        mask[1:, 0] = False
        return mask

    def initialize(self, batch: np.ndarray) -> None:
        """Seed every layer from a batch of code vectors (N, width).

        Layer d is seeded from the residuals its predecessors leave, so the
        stack starts roughly matched to the data scale at every depth.
        """
        flat = batch.reshape(-1, self.width)
        if flat.shape[0] < 2:
            raise ValueError("initialization batch too small")
        residual = flat.copy()
        for d in range(self.n_codebooks):
            picks = self._rng.choice(flat.shape[0], size=self.size, replace=True)
            self.entries[d] = residual[picks]
            if d >= 1:
                self.entries[d, 0] = 0.0
            idx = self._nearest(residual, d)
            residual = residual - self.entries[d, idx]
        self.cluster_sum = self.entries * 1.0
        self.cluster_size = np.ones((self.n_codebooks, self.size))
        self.initialized = True

    def _nearest(self, residual: np.ndarray, d: int) -> np.ndarray:
        # full (N, size) distance table; argmin takes the lowest index on ties
        diff = residual[:, None, :] - self.entries[d][None]
        return np.argmin(np.einsum("nbc,nbc->nb", diff, diff), axis=1)

    def quantize(self, v: np.ndarray, active_layers: int | None = None):
        """Greedy residual quantization of code vectors.

        v: (..., width). Returns (z, s) where z sums the selected entries
        per code and s (..., active_layers) holds the chosen indices.
        """
        q = self.n_codebooks if active_layers is None else int(active_layers)
        if not 1 <= q <= self.n_codebooks:
            raise ValueError(f"active layer count {q} outside [1, {self.n_codebooks}]")
        if not self.initialized:
            raise RuntimeError("codebooks are uninitialized")
        lead = v.shape[:-1]
        flat = v.reshape(-1, self.width)
        residual = flat.copy()
        z = np.zeros_like(flat)
        s = np.empty((flat.shape[0], q), dtype=np.int64)
        for d in range(q):
            idx = self._nearest(residual, d)
            picked = self.entries[d, idx]
            z += picked
            residual -= picked
            s[:, d] = idx
        return z.reshape(v.shape), s.reshape(lead + (q,))

    def lookup(self, s: np.ndarray) -> np.ndarray:
        """Sum of codebook entries named by index tuples s (..., q)."""
        q = s.shape[-1]
        if q > self.n_codebooks:
            raise ValueError(f"tuple length {q} exceeds {self.n_codebooks} layers")
        flat = s.reshape(-1, q)
        z = np.zeros((flat.shape[0], self.width))
        for d in range(q):
            z += self.entries[d, flat[:, d]]
        return z.reshape(s.shape[:-1] + (self.width,))

    def ema_update(self, v: np.ndarray, s: np.ndarray) -> None:
        """Pull codebook entries toward their assigned inputs.

        v: (..., width) inputs, s: matching index tuples from quantize().
        Cluster statistics decay with the configured retention; frozen zero
        entries are skipped entirely.
        """
        flat = v.reshape(-1, self.width)
        idx = s.reshape(-1, s.shape[-1])
        q = idx.shape[1]
        g = self.decay
        live = self._frozen_mask()
        # layer statistics target the residuals the quantizer saw, so all
        # per-layer inputs are gathered before any entry moves
        residual = flat.copy()
        layer_inputs = []
        for d in range(q):
            layer_inputs.append(residual)
            residual = residual - self.entries[d, idx[:, d]]
        for d in range(q):
            chosen = idx[:, d]
            counts = np.bincount(chosen, minlength=self.size).astype(np.float64)
            sums = np.zeros((self.size, self.width))
            np.add.at(sums, chosen, layer_inputs[d])
            self.cluster_size[d] = g * self.cluster_size[d] + (1 - g) * counts
            self.cluster_sum[d] = g * self.cluster_sum[d] + (1 - g) * sums
            freq = counts / max(len(chosen), 1)
            self.usage[d] = g * self.usage[d] + (1 - g) * freq
            upd = live[d] & (self.cluster_size[d] > 1e-12)
            self.entries[d, upd] = (
                self.cluster_sum[d, upd] / self.cluster_size[d, upd][:, None])

    def reset_inactive(self, pool: np.ndarray, min_usage_frac: float = 0.01) -> int:
        """Re-seed entries whose EMA usage fell below a fraction of uniform.

        pool: recent code vectors (N, width) to draw replacements from.
        Returns the number of entries re-seeded.
        """
        flat = pool.reshape(-1, self.width)
        live = self._frozen_mask()
        threshold = min_usage_frac / self.size
        stale = (self.usage < threshold) & live
        n = int(stale.sum())
        if n == 0:
            return 0
        picks = self._rng.choice(flat.shape[0], size=n, replace=True)
        self.entries[stale] = flat[picks]
        self.cluster_size[stale] = 1.0
        self.cluster_sum[stale] = self.entries[stale]
        self.usage[stale] = 1.0 / self.size
        return n

    def sample_active_layers(self, rng: np.random.Generator) -> int:
        """Layer-count dropout: uniform over {1..Q}."""
        return int(rng.integers(1, self.n_codebooks + 1))

    def utilization(self) -> np.ndarray:
        """Fraction of entries per layer seeing at least uniform/10 usage."""
        live = self._frozen_mask()
        active = (self.usage >= 0.1 / self.size) & live
        return active.sum(axis=1) / live.sum(axis=1)

    def state(self) -> dict:
        return {
            "entries": self.entries.copy(),
            "cluster_size": self.cluster_size.copy(),
            "cluster_sum": self.cluster_sum.copy(),
            "usage": self.usage.copy(),
            "initialized": np.array(float(self.initialized)),
            "rng_state": _rng_state_array(self._rng),
        }

    def load_state(self, state: dict) -> None:
        for name in ("entries", "cluster_size", "cluster_sum", "usage"):
            arr = np.asarray(state[name])
            if arr.shape != getattr(self, name).shape:
                raise ValueError(f"{name}: shape {arr.shape} mismatch")
            setattr(self, name, arr.copy())
        self.initialized = bool(state["initialized"])
        self._rng = _rng_from_state_array(np.asarray(state["rng_state"]))


def fit_codebooks(quant: CodebookStack, vectors: np.ndarray, passes: int = 30,
                  batch: int = 512, seed: int = 0) -> None:
    """Fit a stack to a fixed vector population with EMA passes.

    Initializes from the population if needed, then alternates quantize and
    EMA updates over shuffled batches, re-seeding starved entries between
    passes. Useful for distillation targets and tests that need structured
    codebooks without running the full codec trainer.
    """
    flat = np.asarray(vectors, dtype=np.float64).reshape(-1, quant.width)
    if flat.shape[0] < 2:
        raise ValueError("population too small to fit codebooks")
    rng = np.random.default_rng(seed)
    if not quant.initialized:
        quant.initialize(flat)
    for _ in range(passes):
        order = rng.permutation(flat.shape[0])
        for lo in range(0, len(order), batch):
            chunk = flat[order[lo : lo + batch]]
            _, s = quant.quantize(chunk)
            quant.ema_update(chunk, s)
        quant.reset_inactive(flat)


def _rng_state_array(rng: np.random.Generator) -> np.ndarray:
    """PCG64 state as f64-exact u32 limbs, for the array checkpoint format."""
    st = rng.bit_generator.state
    out = []
    for w in (int(st["state"]["state"]), int(st["state"]["inc"])):
        for _ in range(4):
            out.append(w & 0xFFFFFFFF)
            w >>= 32
    out.append(int(st["has_uint32"]))
    out.append(int(st["uinteger"]))
    return np.array(out, dtype=np.float64)


def _rng_from_state_array(arr: np.ndarray) -> np.random.Generator:
    vals = [int(round(x)) for x in arr]
    words = []
    for i in range(0, 8, 4):
        w = 0
        for j in reversed(range(4)):
            w = (w << 32) | vals[i + j]
        words.append(w)
    rng = np.random.default_rng(0)
    st = rng.bit_generator.state
    st["state"]["state"] = words[0]
    st["state"]["inc"] = words[1]
    st["has_uint32"] = vals[8]
    st["uinteger"] = vals[9]
    rng.bit_generator.state = st
    return rng
