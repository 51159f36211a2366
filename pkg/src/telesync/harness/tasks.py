"""Scripted planar reaching tasks with in/out-of-distribution placements.

The task family is a 1- or 2-joint planar arm reaching a goal point:
small enough that every learning claim can be checked against brute force,
rich enough to exercise the whole synchronization and recording pathway.

Placement regions: in-distribution goals live in a right-half-plane annulus
sector, out-of-distribution (static) goals in the mirrored left-half
sector — disjoint by construction. The dynamic scenario starts with an
in-distribution goal and teleports it into the left sector partway through
the episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..episodes import DEFAULT_MAX_STEPS, Observation, Scenario
from ..errors import InputError
from ..kinematics import DHTable, JointLimits, JointVector, forward_kinematics
from ..sync import DEFAULT_ENV_RATE_HZ

SUCCESS_LOGIT = 0.85  # episodes end when the reward head crosses this
_LOGIT_BIAS = math.log(SUCCESS_LOGIT / (1.0 - SUCCESS_LOGIT))


@dataclass(frozen=True)
class AnnulusSector:
    """Goal region: radii [r_min, r_max], angles [ang_min, ang_max] (radians)."""

    r_min: float
    r_max: float
    ang_min: float
    ang_max: float

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        r = float(rng.uniform(self.r_min, self.r_max))
        ang = float(rng.uniform(self.ang_min, self.ang_max))
        return np.array([r * math.cos(ang), r * math.sin(ang)])

    def contains(self, point) -> bool:
        x, y = float(point[0]), float(point[1])
        r, ang = math.hypot(x, y), math.atan2(y, x)
        mid = (self.ang_min + self.ang_max) / 2
        half = (self.ang_max - self.ang_min) / 2
        rel = (ang - mid + math.pi) % (2 * math.pi) - math.pi
        return self.r_min - 1e-12 <= r <= self.r_max + 1e-12 and abs(rel) <= half + 1e-12


@dataclass(frozen=True)
class TaskSpec:
    name: str
    joint_count: int
    dh: DHTable
    limits: JointLimits
    start_q: np.ndarray
    id_region: AnnulusSector
    ood_region: AnnulusSector
    success_radius: float
    logit_width: float
    teleport_step: int = 30
    max_steps: int = DEFAULT_MAX_STEPS
    rate_hz: float = DEFAULT_ENV_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "start_q", np.asarray(self.start_q, dtype=float))
        if len(self.start_q) != self.joint_count:
            raise InputError("start pose does not match joint count")

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def action_step(self) -> float:
        """Largest per-joint move a policy may command in one period."""
        return float(np.min(self.limits.v_max)) * self.dt

    @property
    def reach(self) -> float:
        return float(np.sum(np.abs(self.dh.a)))

    def end_effector(self, q) -> np.ndarray:
        angles = q.q if isinstance(q, JointVector) else np.asarray(q, dtype=float)
        pose = forward_kinematics(self.dh, angles)
        return pose.position[:2]

    def observe(self, q: JointVector, goal) -> Observation:
        return Observation(q.q.copy(), q.gripper, np.asarray(goal, dtype=float))

    def goal_of(self, obs: Observation) -> np.ndarray:
        return obs.extras[:2]

    def distance_to_goal(self, obs: Observation) -> float:
        ee = self.end_effector(obs.q)
        return float(np.linalg.norm(ee - self.goal_of(obs)))

    def sample_goal(self, scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
        region = self.ood_region if scenario is Scenario.OOD_STATIC else self.id_region
        return region.sample(rng)

    def sample_teleport_goal(self, rng: np.random.Generator) -> np.ndarray:
        return self.ood_region.sample(rng)

    def expert_target(self, q: np.ndarray, goal) -> np.ndarray:
        """Joint configuration whose end effector sits on the goal.

        For the two-joint arm both elbow branches are computed; the one
        reaching closest to the goal after wrapping and limit-clamping wins
        (ties go to the branch needing the smaller joint motion from `q`).
        """
        goal = np.asarray(goal, dtype=float)
        if self.joint_count == 1:
            return np.array([math.atan2(goal[1], goal[0])])
        if self.joint_count == 2:
            l1, l2 = abs(self.dh.a[0]), abs(self.dh.a[1])
            d = float(np.linalg.norm(goal))
            d = min(max(d, abs(l1 - l2) + 1e-9), l1 + l2 - 1e-9)
            cos_q2 = (d * d - l1 * l1 - l2 * l2) / (2 * l1 * l2)
            q2 = math.acos(min(max(cos_q2, -1.0), 1.0))
            best, best_key = None, None
            for branch in (q2, -q2):
                q1 = math.atan2(goal[1], goal[0]) - math.atan2(
                    l2 * math.sin(branch), l1 + l2 * math.cos(branch)
                )
                q1 = math.atan2(math.sin(q1), math.cos(q1))  # wrap into (-pi, pi]
                cand = np.clip(np.array([q1, branch]), self.limits.lower, self.limits.upper)
                err = float(np.linalg.norm(self.end_effector(cand) - goal))
                key = (round(err, 9), float(np.max(np.abs(cand - q))))
                if best_key is None or key < best_key:
                    best, best_key = cand, key
            return best
        raise InputError(f"no analytic reach solution for {self.joint_count} joints")


def reward_logit(observation: Observation, task: TaskSpec) -> float:
    """Geometric stand-in for a learned success classifier.

    A logistic in distance-to-goal, calibrated so the success boundary
    (distance == success_radius) sits exactly at the termination threshold:
    inside the success region the logit exceeds 0.85, beyond ~1.5x the
    success radius it drops below 0.5, and it falls smoothly and
    monotonically with distance.
    """
    d = task.distance_to_goal(observation)
    z = (task.success_radius - d) / task.logit_width + _LOGIT_BIAS
    return 1.0 / (1.0 + math.exp(-z))


def planar_reach_task(name: str = "reach2", v_max: float = 1.0) -> TaskSpec:
    """Two-joint planar reacher; goals in the right half-plane are
    in-distribution, mirrored left-half goals are out-of-distribution."""
    dh = DHTable.from_rows([(0.5, 0.0, 0.0, 0.0), (0.5, 0.0, 0.0, 0.0)])
    success_radius = 0.1
    return TaskSpec(
        name=name,
        joint_count=2,
        dh=dh,
        limits=JointLimits.symmetric(2, bound=math.pi, v_max=v_max),
        start_q=np.array([0.0, math.pi / 2]),
        id_region=AnnulusSector(0.45, 0.7, -0.8, 0.8),
        ood_region=AnnulusSector(0.45, 0.7, math.pi - 0.8, math.pi + 0.8),
        success_radius=success_radius,
        logit_width=success_radius / 3.5,
    )


def dial_reach_task(name: str = "dial", v_max: float = 1.0) -> TaskSpec:
    """One-joint 'dial': the arm tip moves on a unit circle toward a goal
    point on that circle. Small enough for an exact tabular learner."""
    dh = DHTable.from_rows([(1.0, 0.0, 0.0, 0.0)])
    success_radius = 0.1
    return TaskSpec(
        name=name,
        joint_count=1,
        dh=dh,
        limits=JointLimits.symmetric(1, bound=math.pi, v_max=v_max),
        start_q=np.array([0.0]),
        id_region=AnnulusSector(1.0, 1.0, 0.5, 2.5),
        ood_region=AnnulusSector(1.0, 1.0, -2.5, -0.5),
        success_radius=success_radius,
        logit_width=success_radius / 3.5,
    )


TASKS = {
    "reach2": planar_reach_task,
    "dial": dial_reach_task,
}


def make_task(name: str) -> TaskSpec:
    try:
        return TASKS[name]()
    except KeyError:
        raise InputError(f"unknown task {name!r}; available: {sorted(TASKS)}") from None
