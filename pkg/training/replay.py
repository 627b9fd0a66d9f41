"""
Replay - whole-episode FIFO storage and contiguous sequence sampling.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Deque, List

import numpy as np

from utils.errors import ContractError

logger = logging.getLogger(__name__)


@dataclass
class Episode:
    observations: np.ndarray   # [T+1, H, W]
    actions: np.ndarray        # [T, A]
    rewards: np.ndarray        # [T]
    seed: int

    def __len__(self):
        return len(self.actions)

    def validate(self):
        steps = len(self.actions)
        if self.actions.ndim != 2 or self.rewards.shape != (steps,):
            raise ContractError(f"episode actions {list(self.actions.shape)} and rewards "
                                f"{list(self.rewards.shape)} are inconsistent")
        if self.observations.ndim != 3 or len(self.observations) != steps + 1:
            raise ContractError(f"episode needs {steps + 1} observations for {steps} actions, "
                                f"got {len(self.observations)}")
        if not np.all(np.isfinite(self.rewards)):
            raise ContractError("episode rewards must be finite")


@dataclass
class SequenceBatch:
    observations: np.ndarray   # [N, L+1, H, W]
    actions: np.ndarray        # [N, L, A]
    rewards: np.ndarray        # [N, L]
    episode_index: np.ndarray  # [N] position in the buffer at sampling time
    start: np.ndarray          # [N]

    @property
    def batch_size(self) -> int:
        return len(self.observations)

    @property
    def length(self) -> int:
        return self.actions.shape[1]


class ReplayBuffer:
    """Bounded FIFO of episodes; the oldest episode is evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ContractError(f"buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.episodes: Deque[Episode] = deque(maxlen=capacity)

    def __len__(self):
        return len(self.episodes)

    @property
    def total_steps(self) -> int:
        return sum(len(ep) for ep in self.episodes)


def buffer_add(buffer: ReplayBuffer, episode: Episode) -> ReplayBuffer:
    episode.validate()
    if len(buffer) == buffer.capacity:
        logger.debug(f"Replay full ({buffer.capacity}); evicting oldest episode")
    buffer.episodes.append(episode)
    return buffer


def buffer_sample_sequences(buffer: ReplayBuffer, batch_size: int, length: int,
                            rng: np.random.Generator) -> SequenceBatch:
    """
    N independent uniform draws of (episode, start) with start in [0, len - L].

    Each slice stays inside one episode: L actions, L rewards, L + 1 observations.
    """
    if batch_size < 1 or length < 1:
        raise ContractError(f"batch size and sequence length must be >= 1, got {batch_size}, {length}")
    eligible: List[int] = [i for i, ep in enumerate(buffer.episodes) if len(ep) >= length]
    if not eligible:
        raise ContractError(
            f"no stored episode has {length} steps; collect more warmup experience before training"
        )
    obs, acts, rews, episode_index, starts = [], [], [], [], []
    for _ in range(batch_size):
        idx = eligible[int(rng.integers(len(eligible)))]
        episode = buffer.episodes[idx]
        start = int(rng.integers(0, len(episode) - length + 1))
        obs.append(episode.observations[start:start + length + 1])
        acts.append(episode.actions[start:start + length])
        rews.append(episode.rewards[start:start + length])
        episode_index.append(idx)
        starts.append(start)
    return SequenceBatch(
        observations=np.stack(obs),
        actions=np.stack(acts),
        rewards=np.stack(rews),
        episode_index=np.array(episode_index),
        start=np.array(starts),
    )


def episodes_for_steps(steps: int, episode_length: int) -> int:
    return math.ceil(steps / episode_length)
