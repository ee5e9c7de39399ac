"""Fixed-capacity FIFO replay buffer backed by preallocated numpy arrays."""

from dataclasses import dataclass

import numpy as np

from src.core.errors import EmptyBufferError, ShapeMismatchError, TrainingDivergedError
from src.core.grid import FloatArray


@dataclass(frozen=True)
class TransitionBatch:
    """Stacked transitions (s, a, r, s', terminal), one row per transition."""

    states: FloatArray
    actions: FloatArray
    rewards: FloatArray
    next_states: FloatArray
    terminals: FloatArray

    def __len__(self) -> int:
        return int(self.rewards.shape[0])


class ReplayBuffer:
    """Ring buffer; once full, the oldest transitions are overwritten first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.state_dim = state_dim
        self.action_dim = action_dim
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros((capacity, action_dim))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._terminals = np.zeros(capacity)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, batch: TransitionBatch) -> None:
        """Appends every transition of the batch in order."""
        n = len(batch)
        expected = {
            "states": (n, self.state_dim),
            "actions": (n, self.action_dim),
            "next_states": (n, self.state_dim),
            "terminals": (n,),
        }
        for name, shape in expected.items():
            if getattr(batch, name).shape != shape:
                raise ShapeMismatchError(f"{name} of shape {getattr(batch, name).shape}, expected {shape}")
        for name in ("states", "actions", "rewards", "next_states"):
            if not np.all(np.isfinite(getattr(batch, name))):
                raise TrainingDivergedError(f"non-finite {name} pushed to the replay buffer")

        rows = (self._cursor + np.arange(n)) % self.capacity
        self._states[rows] = batch.states
        self._actions[rows] = batch.actions
        self._rewards[rows] = batch.rewards
        self._next_states[rows] = batch.next_states
        self._terminals[rows] = batch.terminals
        self._cursor = (self._cursor + n) % self.capacity
        self._size = min(self._size + n, self.capacity)

    def _take(self, rows: np.ndarray) -> TransitionBatch:
        return TransitionBatch(
            states=self._states[rows],
            actions=self._actions[rows],
            rewards=self._rewards[rows],
            next_states=self._next_states[rows],
            terminals=self._terminals[rows],
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform draw with replacement."""
        if self._size == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        return self._take(rng.integers(0, self._size, size=batch_size))

    def contents(self) -> TransitionBatch:
        """All stored transitions, oldest first."""
        start = self._cursor if self._size == self.capacity else 0
        return self._take((start + np.arange(self._size)) % self.capacity)
