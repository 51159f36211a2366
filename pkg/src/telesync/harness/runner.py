"""Episode execution: the environment loop, scripted intervention, evaluation.

run_episode drives the real control loop (leader sim, follower sim, sync
engine) at the environment rate with simulated time, so experiments are a
pure function of (config, seed) — no wall clock anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..devices import DEFAULT_LEADER_V_MAX, SimFollower, SimLeader
from ..episodes import (
    EpisodeRecord,
    EpisodeRecorder,
    Outcome,
    Scenario,
    Step,
)
from ..errors import InputError
from ..kinematics import JointLimits, JointVector
from ..loop import ControlLoop, LeaderCommand
from ..servobus import DEFAULT_RESOLUTION
from ..sync import (
    ActionSource,
    CalibrationProfile,
    ControlMode,
    PedalEvent,
    SyncEngine,
)
from .policies import Policy, Provenance, ScriptedExpert
from .tasks import SUCCESS_LOGIT, TaskSpec, reward_logit


def handover_tolerance_for(task: TaskSpec) -> float:
    """One control step of motion plus tick quantization, for the task's rate."""
    tick_angle = 2 * math.pi / DEFAULT_RESOLUTION
    return float(np.max(task.limits.v_max)) * task.dt + 2 * tick_angle


def build_loop(task: TaskSpec, leader_v_max: float = DEFAULT_LEADER_V_MAX) -> ControlLoop:
    """Assemble leader/follower sims and a sync engine for one task."""
    n = task.joint_count
    profile = CalibrationProfile(
        np.full(n, DEFAULT_RESOLUTION // 2), np.ones(n, dtype=int), DEFAULT_RESOLUTION
    )
    follower = SimFollower(task.limits, task.dt, q0=JointVector(task.start_q.copy()))
    # Keep the leader strictly inside the single-turn seam: an angle clamped
    # to exactly +-pi would quantize onto the opposite-sign tick.
    tick_angle = 2 * math.pi / DEFAULT_RESOLUTION
    leader_limits = JointLimits.symmetric(n, bound=math.pi - 2 * tick_angle, v_max=leader_v_max)
    leader = SimLeader(profile, leader_limits, task.dt, angles0=task.start_q.copy())
    engine = SyncEngine(
        profile,
        task.limits,
        handover_tolerance=handover_tolerance_for(task),
        initial_mode=ControlMode.AUTONOMOUS,
    )
    return ControlLoop(leader, follower, engine, task.dt)


class ScriptedIntervenor:
    """Takes over when progress toward the goal stalls; releases near success.

    Stall detection: the best distance so far has not improved for
    `stall_patience` consecutive steps. While engaged it moves the leader
    along the oracle controller's path, exactly as a human operator would
    through the pedal-and-leader interface. `min_progress` gates takeover
    until the episode has closed that fraction of the initial distance
    (0 = eligible immediately).
    """

    def __init__(
        self,
        task: TaskSpec,
        stall_patience: int = 15,
        min_progress: float = 0.0,
        improvement_eps: float = 1e-4,
        lead_scale: float = 2.5,
    ):
        self.task = task
        # A human leads the follower: the leader is commanded a few control
        # steps ahead along the oracle path, so the (rate-limited) follower
        # is always chasing, never waiting on the leader.
        self.expert = ScriptedExpert(task, step_scale=lead_scale)
        self.stall_patience = stall_patience
        self.min_progress = min_progress
        self.improvement_eps = improvement_eps
        self.engaged = False
        self._best = math.inf
        self._initial = None
        self._stall = 0

    def act(self, loop: ControlLoop, observation, now: float) -> None:
        d = self.task.distance_to_goal(observation)
        if self._initial is None:
            self._initial = max(d, 1e-9)
        if self.engaged and loop.mode is not ControlMode.INTERVENTION:
            # The guard refused the takeover last tick; back off and retry.
            self.engaged = False
        if self.engaged:
            if d <= self.task.success_radius:
                loop.post(PedalEvent(False, timestamp=now))
                self.engaged = False
                self._best = d
                self._stall = 0
                return
            target = self.expert.act(observation)
            loop.post(LeaderCommand(target.q, target.gripper, timestamp=now))
            return
        if d < self._best - self.improvement_eps:
            self._best = d
            self._stall = 0
        else:
            self._stall += 1
        progressed = 1.0 - d / self._initial >= self.min_progress
        if self._stall >= self.stall_patience and progressed:
            loop.post(PedalEvent(True, timestamp=now))
            # First leader move lands this same tick if the guard admits us.
            target = self.expert.act(observation)
            loop.post(LeaderCommand(target.q, target.gripper, timestamp=now))
            self.engaged = True
            self._stall = 0


def _source_for(snapshot_source: ActionSource, policy: Policy) -> ActionSource:
    if snapshot_source is ActionSource.POLICY and policy.provenance is Provenance.SCRIPTED:
        return ActionSource.EXPERT
    return snapshot_source


@dataclass
class EpisodeResult:
    record: EpisodeRecord
    final_observation: object


def run_episode(
    task: TaskSpec,
    policy: Policy,
    rng: np.random.Generator,
    scenario: Scenario = Scenario.ID,
    intervenor: ScriptedIntervenor | None = None,
    episode_id: str = "episode",
    goal: np.ndarray | None = None,
) -> EpisodeRecord:
    """Run one episode of at most task.max_steps environment steps.

    The loop terminates when the reward head crosses the success threshold
    or the step cap is reached (truncation). The success classifier is
    queried on the post-step state every step.
    """
    goal = task.sample_goal(scenario, rng) if goal is None else np.asarray(goal, dtype=float)
    teleport_goal = (
        task.sample_teleport_goal(rng) if scenario is Scenario.OOD_DYNAMIC else None
    )
    loop = build_loop(task)
    recorder = EpisodeRecorder(
        episode_id, task.name, scenario, task.joint_count, task.rate_hz, task.max_steps
    )
    for t in range(task.max_steps):
        current_goal = (
            teleport_goal if teleport_goal is not None and t >= task.teleport_step else goal
        )
        obs = task.observe(loop.follower.read_positions(), current_goal)
        now = t * task.dt
        if intervenor is not None:
            intervenor.act(loop, obs, now)
        snap = loop.step(lambda: policy.act(obs))
        if snap.source is None:
            raise InputError("environment loop ticked without an action source")
        next_obs = task.observe(loop.follower.read_positions(), current_goal)
        reward = 1 if reward_logit(next_obs, task) > SUCCESS_LOGIT else 0
        recorder.append_step(
            Step(
                t=t,
                time=now,
                observation=obs,
                action=snap.follower_target,
                source=_source_for(snap.source, policy),
                mode=snap.mode,
                reward=reward,
            )
        )
        if reward == 1:
            return recorder.finalize(Outcome.SUCCESS)
    return recorder.finalize(Outcome.TRUNCATED)


def evaluate(
    policy: Policy,
    task: TaskSpec,
    n: int,
    seed: int,
    scenario: Scenario = Scenario.ID,
) -> tuple[float, float, list[EpisodeRecord]]:
    """n seeded rollouts without intervention: (success rate, mean length, episodes)."""
    if n < 1:
        raise InputError("need at least one evaluation rollout")
    rng = np.random.default_rng(seed)
    episodes = []
    for i in range(n):
        episodes.append(
            run_episode(
                task,
                policy,
                rng,
                scenario=scenario,
                episode_id=f"{task.name}-{scenario.value}-eval-{seed}-{i:04d}",
            )
        )
    successes = sum(1 for e in episodes if e.outcome is Outcome.SUCCESS)
    mean_len = float(np.mean([len(e) for e in episodes]))
    return successes / n, mean_len, episodes
