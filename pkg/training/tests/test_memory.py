import random

import numpy as np
import pytest

from veriworld_training.memory import PredictionMemory


def entry(i):
    return (np.full((2, 3), i, dtype=np.float32), np.array([i]), i % 2 == 0)


def test_capacity_is_fifo():
    mem = PredictionMemory(capacity=5, burn_in=0)
    for i in range(12):
        mem.add(*entry(i))
        assert len(mem) <= 5
    kept = {int(t[0]) for _, t, _ in mem._entries}
    assert kept == {7, 8, 9, 10, 11}


def test_burn_in_blocks_sampling():
    mem = PredictionMemory(capacity=10, burn_in=1000)
    mem.add(*entry(0))
    assert not mem.ready(999)
    with pytest.raises(RuntimeError):
        mem.sample(4, random.Random(0), env_steps=999)
    assert mem.ready(1000)
    batch = mem.sample(4, random.Random(0), env_steps=1000)
    assert len(batch) == 4


def test_empty_memory_not_ready():
    mem = PredictionMemory(capacity=10, burn_in=0)
    assert not mem.ready(10_000)


def test_sampling_uniform_over_entries():
    mem = PredictionMemory(capacity=20, burn_in=0)
    for i in range(20):
        mem.add(*entry(i))
    rng = random.Random(1)
    counts = {}
    for _ in range(200):
        for _, t, _ in mem.sample(10, rng, env_steps=1):
            counts[int(t[0])] = counts.get(int(t[0]), 0) + 1
    assert set(counts) == set(range(20))
    values = list(counts.values())
    assert max(values) < 2.5 * min(values)
