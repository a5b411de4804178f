"""Simulation decoding: quantized codes drive the character step by step."""

import numpy as np

from ..nn import Tensor, no_grad
from ..sim import Engine, SimDivergence, SimState


class DecodeDivergence(RuntimeError):
    """Simulation blew up mid-decode; carries where and the last good state.

    states holds the trajectory completed before the failing step (initial
    state included) so callers can salvage the partial decode.
    """

    def __init__(self, step_index: int, last_state: SimState, mask,
                 states=None) -> None:
        super().__init__(f"simulation diverged at control step {step_index}")
        self.step_index = step_index
        self.last_state = last_state
        self.mask = mask
        self.states = states if states is not None else []


def upsample_codes(upsampler, z: np.ndarray) -> np.ndarray:
    """(B, K, C) quantized codes -> (B, 4K, C) per-frame codes, no grads."""
    with no_grad():
        u = upsampler(Tensor(np.swapaxes(z, 1, 2)))
    return np.swapaxes(u.data, 1, 2)


def rollout_sim(engine: Engine, policy, u: np.ndarray, state: SimState,
                action_beta: float = 1.0):
    """Drive the simulator for u.shape[1] control steps.

    Returns (states, actions): states has the initial state plus one per
    control step; actions is (B, T, action_dim) of actuated targets. With
    action_beta < 1 the policy outputs are smoothed by the EMA recurrence
    before actuation, matching how the policy was trained.
    """
    states = [state]
    actions = []
    smoothed = None
    for t in range(u.shape[1]):
        feat = engine.featurize(state)
        with no_grad():
            a = policy(Tensor(feat), Tensor(u[:, t])).data
        smoothed = a if smoothed is None else (1.0 - action_beta) * smoothed + action_beta * a
        try:
            state = engine.control_step(state, smoothed)
        except SimDivergence as exc:
            raise DecodeDivergence(t, exc.last_valid, exc.mask, states) from exc
        states.append(state)
        actions.append(smoothed)
    return states, np.stack(actions, axis=1)


def decode_sim(upsampler, policy, engine: Engine, z: np.ndarray, state: SimState,
               action_beta: float = 1.0):
    """Full decode: upsample codes, run the policy through the simulator."""
    return rollout_sim(engine, policy, upsample_codes(upsampler, z), state,
                       action_beta=action_beta)
