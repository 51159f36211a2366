"""Replay buffer with the offline/online split and symmetric sampling.

Offline holds demonstration and human-correction transitions; online holds
the policy's own. Batches draw half from each partition while both are
populated — the sampling rule that makes off-policy fine-tuning from mixed
human/robot data sample-efficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..episodes import EpisodeRecord, Observation
from ..errors import InputError
from ..kinematics import JointVector
from ..sync import ActionSource


@dataclass(frozen=True)
class Transition:
    observation: Observation
    action: JointVector
    reward: int
    next_observation: Observation
    done: bool
    source: ActionSource


class ReplayBuffer:
    def __init__(self, capacity: int = 100_000):
        if capacity <= 0:
            raise InputError("capacity must be positive")
        self.capacity = capacity
        self.offline: list[Transition] = []
        self.online: list[Transition] = []

    def add(self, transition: Transition) -> None:
        part = self.online if transition.source is ActionSource.POLICY else self.offline
        part.append(transition)
        if len(part) > self.capacity:
            del part[0]

    def add_episode(self, episode: EpisodeRecord) -> int:
        """Split an episode into transitions between consecutive steps.

        The final step contributes a (terminal) transition only when it
        carries the success reward; a truncated tail has no successor
        observation to bootstrap from and is dropped.
        """
        added = 0
        steps = episode.steps
        for t in range(len(steps) - 1):
            self.add(
                Transition(
                    observation=steps[t].observation,
                    action=steps[t].action,
                    reward=steps[t].reward,
                    next_observation=steps[t + 1].observation,
                    done=steps[t].reward == 1,
                    source=steps[t].source,
                )
            )
            added += 1
        last = steps[-1]
        if last.reward == 1:
            self.add(
                Transition(
                    observation=last.observation,
                    action=last.action,
                    reward=1,
                    next_observation=last.observation,
                    done=True,
                    source=last.source,
                )
            )
            added += 1
        return added

    def __len__(self) -> int:
        return len(self.offline) + len(self.online)


def sample_symmetric(
    buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator
) -> list[Transition]:
    """Draw a batch split evenly between the offline and online partitions.

    Exactly batch_size/2 from each while both are non-empty; everything
    from the populated one otherwise. Uniform (with replacement) within a
    partition.
    """
    if batch_size <= 0 or batch_size % 2 != 0:
        raise InputError(f"batch size must be a positive even number, got {batch_size}")
    offline, online = buffer.offline, buffer.online
    if not offline and not online:
        raise InputError("cannot sample from an empty replay buffer")
    if not online:
        idx = rng.integers(0, len(offline), size=batch_size)
        return [offline[i] for i in idx]
    if not offline:
        idx = rng.integers(0, len(online), size=batch_size)
        return [online[i] for i in idx]
    half = batch_size // 2
    off_idx = rng.integers(0, len(offline), size=half)
    on_idx = rng.integers(0, len(online), size=half)
    return [offline[i] for i in off_idx] + [online[i] for i in on_idx]
