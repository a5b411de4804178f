"""Learned one-step dynamics: features + action -> next features.

The net predicts a delta in normalized feature units, so a freshly built
model (zeroed output layer) is exactly the identity map. All training and
loss arithmetic happens in normalized space; predictions are returned in
raw feature units.
"""

import logging

import numpy as np

from ..nn import MLP, Module, Tensor, concat, stack
from .config import WorldConfig

log = logging.getLogger(__name__)

Array = np.ndarray


class FeatureNormalizer:
    """Running per-feature mean/std, frozen after a fixed warm-up.

    Statistics update once per training iteration; after `warmup_updates`
    calls the values lock so the loss geometry stops drifting under the
    nets being trained against it.
    """

    def __init__(self, dim: int, warmup_updates: int = 10):
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)
        self.count = 0
        self.updates = 0
        self.warmup_updates = warmup_updates
        self.frozen = False

    @property
    def std(self) -> Array:
        if self.count == 0:
            return np.ones_like(self.mean)
        return np.maximum(np.sqrt(self._m2 / self.count), 1e-6)

    def update(self, feats: Array) -> None:
        if self.frozen:
            return
        feats = np.asarray(feats, dtype=float).reshape(-1, self.mean.shape[0])
        n = feats.shape[0]
        if n == 0:
            return
        # Chan's parallel merge of (count, mean, M2) with the batch moments
        b_mean = feats.mean(axis=0)
        b_m2 = ((feats - b_mean) ** 2).sum(axis=0)
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        self._m2 = self._m2 + b_m2 + delta**2 * (self.count * n / total)
        self.count = total
        self.updates += 1
        if self.updates >= self.warmup_updates:
            self.frozen = True

    def state(self) -> dict[str, Array]:
        return {
            "mean": self.mean.copy(),
            "m2": self._m2.copy(),
            "counters": np.array(
                [self.count, self.updates, self.warmup_updates, int(self.frozen)],
                dtype=np.int64,
            ),
        }

    def load_state(self, state: dict[str, Array]) -> None:
        self.mean = state["mean"].copy()
        self._m2 = state["m2"].copy()
        c = state["counters"]
        self.count, self.updates, self.warmup_updates = int(c[0]), int(c[1]), int(c[2])
        self.frozen = bool(c[3])


class WorldModel(Module):
    def __init__(self, cfg: WorldConfig, rng: np.random.Generator):
        self.cfg = cfg
        dims = [cfg.feature_dim + cfg.action_dim] + [cfg.width] * (cfg.depth - 1)
        dims.append(cfg.feature_dim)
        self.net = MLP(dims, rng)
        self.net.layers[-1].zero_()  # zero delta: fresh model predicts s' = s
        self.norm = FeatureNormalizer(cfg.feature_dim, cfg.warmup_updates)

    @property
    def inv_std(self) -> Array:
        return 1.0 / self.norm.std

    def predict(self, s: Tensor, a: Tensor) -> Tensor:
        """One step: s' = s + std * net((s - mean)/std (+) a), raw units out."""
        sn = (s - self.norm.mean) * self.inv_std
        delta = self.net(concat([sn, a], axis=1))
        return s + delta * self.norm.std

    def state(self) -> dict[str, Array]:
        out = Module.state(self)
        for name, arr in self.norm.state().items():
            out[f"norm.{name}"] = arr
        return out

    def load_state(self, state: dict[str, Array]) -> None:
        norm = {k[len("norm."):]: v for k, v in state.items() if k.startswith("norm.")}
        Module.load_state(self, {k: v for k, v in state.items() if not k.startswith("norm.")})
        self.norm.load_state(norm)


def rollout_model(model, first_feats: Array, actions: Array, action_fn=None) -> list[Tensor]:
    """Open-loop rollout: L predicted states from the window's first state.

    `actions` is (B, L, A) of recorded actions. Passing `action_fn(s, t)`
    switches to closed-loop replay: actions are recomputed from the model's
    own predicted states instead of replayed.
    """
    s = Tensor(np.asarray(first_feats, dtype=float))
    preds = []
    for t in range(actions.shape[1]):
        a = Tensor(actions[:, t]) if action_fn is None else action_fn(s, t)
        s = model.predict(s, a)
        preds.append(s)
    return preds


def train_world_step(model, batch: dict[str, Array], opt=None, action_fn=None) -> float:
    """One training step on a batch of L-step windows.

    Loss: mean squared normalized-feature error between the model rollout
    and the recorded states, averaged over every step of every window.
    Skips the optimizer update (and logs) if the loss is non-finite.
    """
    feats, actions = batch["feats"], batch["actions"]
    preds = stack(rollout_model(model, feats[:, 0], actions, action_fn), axis=1)
    err = (preds - Tensor(feats[:, 1:])) * model.inv_std
    loss = (err * err).mean()
    value = float(loss.data)
    if not np.isfinite(value):
        log.warning("non-finite dynamics loss %r, update skipped", value)
        return value
    if opt is not None:
        opt.zero_grad()
        loss.backward()
        opt.step()
    return value
