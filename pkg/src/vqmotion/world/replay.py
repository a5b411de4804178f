"""FIFO transition store feeding dynamics-model training.

Transitions are (state features, action, next state features) rows tagged
with the episode they came from. Window sampling never crosses an episode
boundary: a window is valid only if all its rows share one episode tag.
Writers push whole episodes; readers sample from a consistent snapshot of
the ring, so a concurrent push cannot tear a batch.
"""

import numpy as np

Array = np.ndarray


class ReplayError(RuntimeError):
    """Raised when a sample request cannot be satisfied by stored data."""


class ReplayBuffer:
    def __init__(self, capacity: int, feature_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be at least one frame")
        self.capacity = int(capacity)
        self.feats = np.zeros((capacity, feature_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.next_feats = np.zeros((capacity, feature_dim))
        self.episode = np.full(capacity, -1, dtype=np.int64)
        self.size = 0
        self._next = 0  # physical write cursor; oldest row sits size slots behind
        self._episodes_pushed = 0
        self.total_frames_pushed = 0

    def __len__(self) -> int:
        return self.size

    def push(self, feats: Array, actions: Array) -> int:
        """Store one episode of T transitions; feats carries T+1 state rows.

        Oldest rows (across episodes) are evicted once the ring is full.
        Returns the episode tag assigned to the pushed rows.
        """
        feats = np.asarray(feats, dtype=float)
        actions = np.asarray(actions, dtype=float)
        if feats.ndim != 2 or feats.shape[1] != self.feats.shape[1]:
            raise ValueError(f"expected feature rows of width {self.feats.shape[1]}")
        if actions.ndim != 2 or actions.shape[1] != self.actions.shape[1]:
            raise ValueError(f"expected action rows of width {self.actions.shape[1]}")
        n = actions.shape[0]
        if n < 1 or feats.shape[0] != n + 1:
            raise ValueError("need T >= 1 actions and exactly T+1 feature rows")
        if not (np.all(np.isfinite(feats)) and np.all(np.isfinite(actions))):
            raise ValueError("refusing to store non-finite transitions")

        eid = self._episodes_pushed
        self._episodes_pushed += 1
        self.total_frames_pushed += n

        s, a, s2 = feats[:-1], actions, feats[1:]
        if n > self.capacity:
            # one episode larger than the ring: only its own tail survives
            s, a, s2 = s[-self.capacity:], a[-self.capacity:], s2[-self.capacity:]
            n = self.capacity
        idx = (self._next + np.arange(n)) % self.capacity
        self.feats[idx] = s
        self.actions[idx] = a
        self.next_feats[idx] = s2
        self.episode[idx] = eid
        self._next = (self._next + n) % self.capacity
        self.size = min(self.size + n, self.capacity)
        return eid

    def _logical(self) -> Array:
        start = (self._next - self.size) % self.capacity
        return (start + np.arange(self.size)) % self.capacity

    def snapshot(self) -> dict[str, Array]:
        """Copies of the stored rows in insertion order (oldest first)."""
        idx = self._logical()
        return {
            "feats": self.feats[idx].copy(),
            "actions": self.actions[idx].copy(),
            "next_feats": self.next_feats[idx].copy(),
            "episode": self.episode[idx].copy(),
        }

    def sample(self, n_windows: int, length: int, rng: np.random.Generator) -> dict[str, Array]:
        """Draw windows of `length` transitions uniformly over valid starts.

        Returns feats (B, L+1, F) covering the L+1 states each window spans,
        and actions (B, L, A).
        """
        if n_windows < 1 or length < 1:
            raise ValueError("need at least one window of at least one step")
        if self.size < length:
            raise ReplayError(
                f"buffer holds {self.size} frames, cannot form a {length}-step window"
            )
        idx = self._logical()
        eids = self.episode[idx]
        # same tag at both ends implies one contiguous episode span: tags are
        # assigned per push and rows of a push are stored consecutively
        starts = np.flatnonzero(eids[: self.size - length + 1] == eids[length - 1 : self.size])
        if starts.size == 0:
            raise ReplayError(f"no stored episode contains a full {length}-step window")
        chosen = starts[rng.integers(0, starts.size, size=n_windows)]
        rows = idx[chosen[:, None] + np.arange(length)[None, :]]
        feats = np.concatenate(
            [self.feats[rows], self.next_feats[rows[:, -1]][:, None, :]], axis=1
        )
        return {"feats": feats, "actions": self.actions[rows]}

    # -- checkpointing ---------------------------------------------------

    def state(self) -> dict[str, Array]:
        snap = self.snapshot()
        snap["counters"] = np.array(
            [self._episodes_pushed, self.total_frames_pushed], dtype=np.int64
        )
        return snap

    def load_state(self, state: dict[str, Array]) -> None:
        n = state["episode"].shape[0]
        if n > self.capacity:
            raise ValueError("stored rows exceed this buffer's capacity")
        self.feats[:n] = state["feats"]
        self.actions[:n] = state["actions"]
        self.next_feats[:n] = state["next_feats"]
        self.episode[:n] = state["episode"]
        self.size = n
        self._next = n % self.capacity
        self._episodes_pushed = int(state["counters"][0])
        self.total_frames_pushed = int(state["counters"][1])
