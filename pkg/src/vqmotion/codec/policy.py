"""Layer-wise mixture-of-experts control policy.

The gating network emits one weight vector per expert layer; each layer's
output is the gate-weighted blend of every expert's output at that depth.
Expert output heads start at zero so a fresh policy commands the zero pose.
"""

import numpy as np

from ..nn import Tensor, stack
from ..nn.functional import softmax
from ..nn.layers import MLP, Module


class MoEPolicy(Module):
    def __init__(self, obs_dim: int, code_dim: int, action_dim: int,
                 rng: np.random.Generator, experts: int = 4, width: int = 64,
                 depth: int = 3, gating_width: int = 32):
        if depth < 2:
            raise ValueError("expert depth must be at least 2")
        d_in = obs_dim + code_dim
        dims = [d_in] + [width] * (depth - 1) + [action_dim]
        self.expert_nets = [MLP(dims, rng) for _ in range(experts)]
        for net in self.expert_nets:
            net.layers[-1].zero_()
        self.gate = MLP([d_in, gating_width, depth * experts], rng)
        self.depth = depth
        self.n_experts = experts

    def gating_weights(self, x: Tensor) -> Tensor:
        """(B, depth, experts), non-negative, summing to 1 per layer."""
        b = x.shape[0]
        logits = self.gate(x).reshape(b, self.depth, self.n_experts)
        return softmax(logits, axis=-1)

    def forward(self, obs: Tensor, code: Tensor) -> Tensor:
        from ..nn import concat

        x = concat([obs, code], axis=1)
        g = self.gating_weights(x)
        h = x
        for layer in range(self.depth):
            outs = stack([net.layers[layer](h) for net in self.expert_nets])
            gl = g[:, layer, :].transpose().reshape(self.n_experts, x.shape[0], 1)
            h = (outs * gl).sum(axis=0)
            if layer < self.depth - 1:
                h = h.relu()
        return h
