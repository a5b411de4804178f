"""Rectified Adam.

Follows the published update rule: exponential moments as in Adam, plus a
variance-rectification term that falls back to an unadapted SGD-with-momentum
step while the second-moment estimate is still too short to trust.
"""

from __future__ import annotations

import logging

import numpy as np

from .tensor import Tensor

log = logging.getLogger(__name__)


class RAdam:
    def __init__(
        self,
        params: list[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.skipped_steps = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self._rho_inf = 2.0 / (1.0 - self.beta2) - 1.0

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> bool:
        """Apply one update; returns False (and changes nothing) on non-finite grads."""
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        for g in grads:
            if not np.all(np.isfinite(g)):
                self.skipped_steps += 1
                log.warning("non-finite gradient, step %d skipped", self.step_count + 1)
                return False
        self.step_count += 1
        t = self.step_count
        b1t = self.beta1**t
        b2t = self.beta2**t
        rho = self._rho_inf - 2.0 * t * b2t / (1.0 - b2t)
        if rho > 4.0:
            num = (rho - 4.0) * (rho - 2.0) * self._rho_inf
            den = (self._rho_inf - 4.0) * (self._rho_inf - 2.0) * rho
            rect = np.sqrt(num / den)
        else:
            rect = None
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - b1t)
            if rect is None:
                p.data -= self.lr * m_hat
            else:
                v_hat = np.sqrt(v / (1.0 - b2t))
                p.data -= self.lr * rect * m_hat / (v_hat + self.eps)
        return True

    def state(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {
            "step_count": np.array([float(self.step_count)]),
            "skipped_steps": np.array([float(self.skipped_steps)]),
        }
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m.{i}"] = m.copy()
            out[f"v.{i}"] = v.copy()
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        self.step_count = int(state["step_count"][0])
        self.skipped_steps = int(state["skipped_steps"][0])
        for i in range(len(self.params)):
            self.m[i] = np.asarray(state[f"m.{i}"], dtype=np.float64).copy()
            self.v[i] = np.asarray(state[f"v.{i}"], dtype=np.float64).copy()
