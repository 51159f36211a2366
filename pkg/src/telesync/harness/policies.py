"""Policies for the harness: scripted oracle, frozen, nearest-neighbor clone."""

from __future__ import annotations

import enum
from typing import Protocol, runtime_checkable

import numpy as np

from ..episodes import Observation
from ..errors import InputError
from ..kinematics import JointVector
from .tasks import TaskSpec


class Provenance(enum.Enum):
    SCRIPTED = "scripted"
    LOOKUP_BC = "lookup_bc"
    TABULAR_Q = "tabular_q"


@runtime_checkable
class Policy(Protocol):
    provenance: Provenance

    def act(self, observation: Observation) -> JointVector: ...


class ScriptedExpert:
    """Oracle controller: walks the joints toward the analytic reach
    solution, one bounded step per tick. `step_scale` < 1 makes a slower,
    more deliberate demonstrator."""

    provenance = Provenance.SCRIPTED

    def __init__(self, task: TaskSpec, step_scale: float = 1.0):
        self.task = task
        self.step = task.action_step * step_scale

    def act(self, observation: Observation) -> JointVector:
        target = self.task.expert_target(observation.q, self.task.goal_of(observation))
        delta = np.clip(target - observation.q, -self.step, self.step)
        return JointVector(observation.q + delta, observation.gripper)


class FrozenPolicy:
    """Holds position forever; the canonical never-succeeds policy."""

    provenance = Provenance.SCRIPTED

    def act(self, observation: Observation) -> JointVector:
        return JointVector(observation.q.copy(), observation.gripper)


class LookupBCPolicy:
    """Behavior cloning by nearest stored observation.

    Returns the action recorded at the closest observation (weighted
    Euclidean distance over the observation vector). Ties resolve to the
    earliest stored step, i.e. the lowest episode id in dataset order.
    """

    provenance = Provenance.LOOKUP_BC

    def __init__(self, observations: np.ndarray, actions, weights=None):
        if len(observations) == 0:
            raise InputError("lookup policy needs at least one stored step")
        self.observations = np.asarray(observations, dtype=float)
        self.actions = list(actions)
        if len(self.actions) != len(self.observations):
            raise InputError("one action per stored observation required")
        dim = self.observations.shape[1]
        self.weights = np.ones(dim) if weights is None else np.asarray(weights, dtype=float)
        if len(self.weights) != dim:
            raise InputError(f"{len(self.weights)} weights for {dim}-dim observations")

    def act(self, observation: Observation) -> JointVector:
        return self.actions[self.nearest(observation)].copy()

    def nearest(self, observation: Observation) -> int:
        x = observation.vector()
        d2 = ((self.observations - x) ** 2 * self.weights).sum(axis=1)
        return int(np.argmin(d2))

    def __len__(self) -> int:
        return len(self.actions)
