"""Uniform ring-buffer experience replay."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    next_obstacle_distance: float = float("inf")


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.next_distance = np.zeros(capacity)
        self.inserted = 0

    def __len__(self) -> int:
        return min(self.inserted, self.capacity)

    def push(self, t: Transition) -> None:
        if not np.isfinite(t.reward):
            raise ValueError(f"non-finite reward {t.reward}")
        i = self.inserted % self.capacity
        self.obs[i] = t.obs
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_obs[i] = t.next_obs
        self.done[i] = t.done
        self.next_distance[i] = t.next_obstacle_distance
        self.inserted += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        n = len(self)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, n, size=batch_size)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "done": self.done[idx],
            "next_distance": self.next_distance[idx],
        }
