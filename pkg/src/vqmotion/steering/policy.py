"""Latent steering policy: task-conditioned next-code prediction."""

import numpy as np

from ..codec import CodebookStack, MoEPolicy
from ..nn import Tensor, no_grad
from ..nn.layers import MLP, Module
from .config import SteerConfig
from .task import TaskParams, task_from_raw


class SteeringPolicyNet(Module):
    """Maps (previous code, current task) to (next code, next task forecast).

    A layer-wise mixture of experts emits both heads jointly. Codes cross
    the network in standardized form: inputs are whitened per dimension and
    the code head is read back through the same stats, so a fresh policy
    (zero-initialized output layers) proposes the mean code and the
    straight-ahead task. set_code_stats pins the transform to the training
    population; it defaults to the identity.

    The projector summarizes a code window back into the task it realizes
    and is trained jointly as a regularizer.
    """

    def __init__(self, cfg: SteerConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.moe = MoEPolicy(
            cfg.task_dim, cfg.code_width, cfg.code_width + cfg.task_dim, rng,
            experts=cfg.experts, width=cfg.expert_width,
            depth=cfg.expert_depth, gating_width=cfg.gating_width)
        self.projector = MLP(
            [cfg.code_width, cfg.projector_width, cfg.task_dim], rng)
        self.code_mu = np.zeros(cfg.code_width)
        self.code_sigma = np.ones(cfg.code_width)

    def set_code_stats(self, mu: np.ndarray, sigma: np.ndarray) -> None:
        """Pin the code whitening transform; sigma is floored at 1e-6."""
        mu = np.asarray(mu, dtype=np.float64).reshape(self.cfg.code_width)
        sigma = np.asarray(sigma, dtype=np.float64).reshape(self.cfg.code_width)
        self.code_mu = mu.copy()
        self.code_sigma = np.maximum(sigma, 1e-6)

    def normalize_codes(self, z) -> np.ndarray:
        return (np.asarray(z, dtype=np.float64) - self.code_mu) / self.code_sigma

    def forward(self, z_prev: Tensor, g: Tensor) -> Tensor:
        """(B, C) raw codes + (B, task_dim) tasks -> (B, C + task_dim).

        The code slice of the output is already mapped back to code space.
        """
        zn = (z_prev - Tensor(self.code_mu)) * Tensor(1.0 / self.code_sigma)
        return self.moe(g, zn)

    def split(self, out: Tensor) -> tuple[Tensor, Tensor]:
        """Raw output -> (code guess in code space, raw task forecast)."""
        c = self.cfg.code_width
        v = out[:, :c] * Tensor(self.code_sigma) + Tensor(self.code_mu)
        return v, out[:, c:]

    def project(self, codes: Tensor) -> Tensor:
        """Code window (B, K, C) -> realized-task estimate (B, task_dim)."""
        zn = (codes - Tensor(self.code_mu)) * Tensor(1.0 / self.code_sigma)
        return self.projector(zn.mean(axis=1))

    def state(self) -> dict:
        out = Module.state(self)
        out["stats.code_mu"] = self.code_mu.copy()
        out["stats.code_sigma"] = self.code_sigma.copy()
        return out

    def load_state(self, state: dict) -> None:
        params = {k: v for k, v in state.items() if not k.startswith("stats.")}
        Module.load_state(self, params)
        self.set_code_stats(state["stats.code_mu"], state["stats.code_sigma"])


def policy_step(net: SteeringPolicyNet, quant: CodebookStack,
                z_prev: np.ndarray, g: TaskParams):
    """One closed-loop step through the frozen quantizer.

    Returns (v, g_next, z, indices): the continuous code guess, the
    policy's forecast for the next step (facings normalized, degenerate
    rows fall back to straight ahead), the quantized code to feed onward,
    and its index tuple.
    """
    zp = np.asarray(z_prev, dtype=np.float64).reshape(1, -1)
    with no_grad():
        out = net(Tensor(zp), Tensor(g.vector()[None]))
        v, g_raw = net.split(out)
    v = v.data[0]
    g_next = task_from_raw(g_raw.data[0])
    z, s = quant.quantize(v[None])
    return v, g_next, z[0], s[0]
