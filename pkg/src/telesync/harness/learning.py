"""Learning from recorded episodes: nearest-neighbor cloning and tabular Q.

These replace heavyweight neural learners at desk scale: the data pathway
(demonstrations, corrections, the offline/online split) is the thing under
test, and these substitutes keep every claim checkable against brute force.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..episodes import Dataset, EpisodeRecord, Observation, Outcome, intervention_stats
from ..errors import InputError
from ..kinematics import JointVector
from ..sync import ActionSource
from .policies import LookupBCPolicy, Policy, Provenance
from .replay import ReplayBuffer, Transition, sample_symmetric
from .runner import ScriptedIntervenor, run_episode
from .tasks import TaskSpec

# Steps that carry supervision: demonstrations and human corrections. The
# policy's own (possibly failing) actions are never cloned.
SUPERVISED_SOURCES = (ActionSource.EXPERT, ActionSource.HUMAN_CORRECTION)


def _episodes_of(data) -> list[EpisodeRecord]:
    if isinstance(data, Dataset):
        return data.episodes
    return list(data)


# A step whose action moves no joint by more than this is a no-op (e.g. the
# handover tick, where the leader still mirrors the follower) and carries no
# supervision signal.
NOOP_THRESHOLD = 4 * math.pi / 4096


def train_lookup_bc(data, weights=None, drop_noops: bool = True) -> LookupBCPolicy:
    """Clone the supervised steps of a dataset into a nearest-neighbor policy.

    Episodes are ordered by id so distance ties resolve to the lowest
    episode id regardless of how the dataset was assembled. Hold-in-place
    steps are skipped by default: cloning them freezes the policy wherever
    a query lands near one.
    """
    episodes = sorted(_episodes_of(data), key=lambda e: e.id)
    if not episodes:
        raise InputError("cannot train on an empty dataset")
    observations, actions = [], []
    for ep in episodes:
        for step in ep.steps:
            if step.source not in SUPERVISED_SOURCES:
                continue
            if drop_noops and np.max(np.abs(step.action.q - step.observation.q)) <= NOOP_THRESHOLD:
                continue
            observations.append(step.observation.vector())
            actions.append(step.action)
    if not observations:
        raise InputError("dataset has no demonstration or correction steps to clone")
    return LookupBCPolicy(np.array(observations), actions, weights)


@dataclass(frozen=True)
class HitlConfig:
    """Tabular learner configuration: uniform grids over state and action."""

    state_bins: int = 17  # bins per joint (and per goal axis)
    action_deltas: int = 5  # discrete per-joint deltas
    alpha: float = 0.2
    gamma: float = 0.97
    epsilon: float = 0.1
    batch_size: int = 64
    online_episodes: int = 50
    updates_per_step: int = 1
    buffer_capacity: int = 100_000

    def validate(self, task: TaskSpec) -> None:
        if self.state_bins < 2 or self.action_deltas < 2:
            raise InputError("state_bins and action_deltas must each be at least 2")
        if not (0 < self.alpha <= 1) or not (0 <= self.gamma < 1):
            raise InputError("alpha must be in (0,1], gamma in [0,1)")
        if self.batch_size % 2 != 0:
            raise InputError("batch_size must be even for symmetric sampling")
        span = task.limits.upper - task.limits.lower
        if not np.all(np.isfinite(span)) or np.any(span <= 0):
            raise InputError("task joint ranges are not discretizable")


class TabularQPolicy:
    """Grid Q-function over (joint bins, goal bins) with a cloning prior.

    Where the table has no learned value yet, the stage-2 behavior-cloning
    policy acts instead, so an un-finetuned learner is exactly the BC policy.
    """

    provenance = Provenance.TABULAR_Q

    def __init__(self, task: TaskSpec, prior: Policy, config: HitlConfig):
        config.validate(task)
        self.task = task
        self.prior = prior
        self.config = config
        step = task.action_step
        per_joint = np.linspace(-step, step, config.action_deltas)
        self.action_deltas = np.array(
            list(itertools.product(per_joint, repeat=task.joint_count))
        )
        self._q: dict[tuple[int, ...], np.ndarray] = {}
        self._state_lo = np.concatenate([task.limits.lower, [-task.reach, -task.reach]])
        self._state_hi = np.concatenate([task.limits.upper, [task.reach, task.reach]])

    def state_key(self, observation: Observation) -> tuple[int, ...]:
        x = np.concatenate([observation.q, self.task.goal_of(observation)])
        frac = (x - self._state_lo) / (self._state_hi - self._state_lo)
        bins = np.clip(
            np.floor(frac * self.config.state_bins).astype(int),
            0,
            self.config.state_bins - 1,
        )
        return tuple(int(b) for b in bins)

    def action_index(self, observation: Observation, action: JointVector) -> int:
        delta = action.q - observation.q
        d2 = ((self.action_deltas - delta) ** 2).sum(axis=1)
        return int(np.argmin(d2))

    def _apply(self, observation: Observation, action_idx: int) -> JointVector:
        q = observation.q + self.action_deltas[action_idx]
        q = np.clip(q, self.task.limits.lower, self.task.limits.upper)
        return JointVector(q, observation.gripper)

    def act(self, observation: Observation) -> JointVector:
        key = self.state_key(observation)
        values = self._q.get(key)
        if values is None or float(values.max()) <= 0.0:
            return self.prior.act(observation)
        return self._apply(observation, int(np.argmax(values)))

    def update(self, batch: list[Transition]) -> None:
        cfg = self.config
        for tr in batch:
            key = self.state_key(tr.observation)
            values = self._q.setdefault(key, np.zeros(len(self.action_deltas)))
            a = self.action_index(tr.observation, tr.action)
            if tr.done:
                target = float(tr.reward)
            else:
                next_values = self._q.get(self.state_key(tr.next_observation))
                bootstrap = float(next_values.max()) if next_values is not None else 0.0
                target = tr.reward + cfg.gamma * bootstrap
            values[a] += cfg.alpha * (target - values[a])

    @property
    def table_size(self) -> int:
        return len(self._q)


class EpsilonGreedy:
    """Training-time exploration wrapper; tagged as the policy's own actions."""

    provenance = Provenance.TABULAR_Q

    def __init__(self, policy: TabularQPolicy, epsilon: float, rng: np.random.Generator):
        self.policy = policy
        self.epsilon = epsilon
        self.rng = rng

    def act(self, observation: Observation) -> JointVector:
        if self.rng.random() < self.epsilon:
            idx = int(self.rng.integers(0, len(self.policy.action_deltas)))
            return self.policy._apply(observation, idx)
        return self.policy.act(observation)


@dataclass
class CurvePoint:
    episode: int
    outcome: str
    length: int
    intervention_steps: int
    intervention_runs: int
    mean_intervention_length: float


@dataclass
class HitlResult:
    policy: TabularQPolicy
    curve: list[CurvePoint] = field(default_factory=list)


def hitl_q_learning(
    task: TaskSpec,
    demos: list[EpisodeRecord],
    config: HitlConfig,
    seed: int,
    intervenor_factory=None,
) -> HitlResult:
    """Three-stage human-in-the-loop fine-tuning.

    Stage 1 (reward): the geometric success head stands in for a trained
    classifier — nothing to fit. Stage 2: behavior-clone the demonstration
    set. Stage 3: run online episodes with scripted intervention, pushing
    policy steps into the online partition and corrections into the offline
    partition, and apply tabular Q updates on symmetric batches.
    """
    config.validate(task)
    if not demos:
        raise InputError("stage 2 needs at least one demonstration episode")
    bc = train_lookup_bc(demos)
    policy = TabularQPolicy(task, bc, config)
    buffer = ReplayBuffer(config.buffer_capacity)
    for ep in demos:
        buffer.add_episode(ep)
    rng = np.random.default_rng(seed)
    result = HitlResult(policy=policy)
    if intervenor_factory is None:
        intervenor_factory = lambda: ScriptedIntervenor(task)
    for i in range(config.online_episodes):
        behavior = EpsilonGreedy(policy, config.epsilon, rng)
        episode = run_episode(
            task,
            behavior,
            rng,
            intervenor=intervenor_factory(),
            episode_id=f"{task.name}-online-{seed}-{i:04d}",
        )
        buffer.add_episode(episode)
        for _ in range(len(episode) * config.updates_per_step):
            policy.update(sample_symmetric(buffer, config.batch_size, rng))
        stats = intervention_stats([episode])
        result.curve.append(
            CurvePoint(
                episode=i,
                outcome=episode.outcome.value,
                length=len(episode),
                intervention_steps=stats.total_intervention_steps,
                intervention_runs=stats.run_count,
                mean_intervention_length=stats.mean_run_length,
            )
        )
    return result
