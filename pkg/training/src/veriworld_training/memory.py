"""FIFO memory of answered episodes for training the prediction network."""

from __future__ import annotations

import random
from collections import deque


class PredictionMemory:
    """Keeps the last `capacity` (window, hypothesis, label) entries; sampling
    is refused until `burn_in` environment steps have passed."""

    def __init__(self, capacity: int = 200, burn_in: int = 100_000):
        self.capacity = capacity
        self.burn_in = burn_in
        self._entries = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def add(self, window, tokens, label: bool) -> None:
        self._entries.append((window, tokens, bool(label)))

    def ready(self, env_steps: int) -> bool:
        return env_steps >= self.burn_in and len(self._entries) > 0

    def sample(self, batch_size: int, rng: random.Random, env_steps: int):
        if not self.ready(env_steps):
            raise RuntimeError(
                f"memory not ready: {env_steps} steps < burn-in {self.burn_in} "
                f"or empty ({len(self._entries)} entries)")
        return [self._entries[rng.randrange(len(self._entries))]
                for _ in range(batch_size)]
