"""Unit tests for the replay buffer and seed streams."""

import numpy as np
import pytest

from src.core.errors import EmptyBufferError, ShapeMismatchError, TrainingDivergedError
from src.core.replay import ReplayBuffer, TransitionBatch
from src.core.seeding import SeedStreams


def _batch(rewards, state_dim=2, action_dim=1):
    rewards = np.asarray(rewards, dtype=float)
    n = rewards.size
    return TransitionBatch(
        states=np.tile(rewards[:, None], (1, state_dim)),
        actions=np.zeros((n, action_dim)),
        rewards=rewards,
        next_states=np.zeros((n, state_dim)),
        terminals=np.zeros(n),
    )


def test_fifo_overwrite_keeps_newest_items():
    """Capacity 4, six singleton pushes: items 3..6 remain."""
    buffer = ReplayBuffer(4, 2, 1)
    for item in range(1, 7):
        buffer.push(_batch([item]))
    assert len(buffer) == 4
    assert buffer.contents().rewards.tolist() == [3.0, 4.0, 5.0, 6.0]


def test_batch_push_grows_by_batch_size():
    """Pushing M = 8 transitions adds eight entries."""
    buffer = ReplayBuffer(100, 2, 1)
    buffer.push(_batch(np.arange(3)))
    buffer.push(_batch(np.arange(8)))
    assert len(buffer) == 11


def test_sampling_is_uniform():
    """Counts over a ten-item buffer stay within four standard deviations of uniform."""
    buffer = ReplayBuffer(10, 2, 1)
    buffer.push(_batch(np.arange(10)))
    draws = buffer.sample(100_000, np.random.default_rng(0)).rewards.astype(int)
    counts = np.bincount(draws, minlength=10)

    sigma = np.sqrt(100_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 10_000) < 4.0 * sigma)


def test_sampling_empty_buffer_fails():
    """There is nothing to draw from an empty buffer."""
    with pytest.raises(EmptyBufferError):
        ReplayBuffer(4, 2, 1).sample(1, np.random.default_rng(0))


def test_push_validates_shapes_and_values():
    """Wrong widths and non-finite entries are refused."""
    buffer = ReplayBuffer(4, 3, 1)
    with pytest.raises(ShapeMismatchError):
        buffer.push(_batch([1.0]))
    bad = _batch([np.inf], state_dim=3)
    with pytest.raises(TrainingDivergedError):
        buffer.push(bad)


def test_seed_streams_are_independent_and_reproducible():
    """Same (seed, name, index) repeats; other names or indices differ."""
    streams = SeedStreams(7)
    first = streams.generator("ic").standard_normal(4)
    again = SeedStreams(7).generator("ic").standard_normal(4)
    other = streams.generator("noise").standard_normal(4)
    indexed = streams.generator("ic", 1).standard_normal(4)

    assert np.array_equal(first, again)
    assert not np.array_equal(first, other)
    assert not np.array_equal(first, indexed)
