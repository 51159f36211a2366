"""The single control loop that owns the devices and the sync engine.

Exactly one context advances the loop by calling step(); everything else
(pedal presses, operator leader commands, faults) arrives through post(),
which may be fed from any number of producers. The same loop core serves
two callers: the learning harness steps it as fast as it likes with
simulated time, and the gateway steps it on a wall-clock schedule.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .devices import SimFollower, SimLeader
from .kinematics import JointVector
from .servobus import RawTicks
from .sync import (
    ActionSource,
    ControlMode,
    FaultEvent,
    PauseEvent,
    PedalEvent,
    ResumeEvent,
    SyncEngine,
)


@dataclass(frozen=True)
class LeaderCommand:
    """An operator moving the (simulated) leader arm: target angles."""

    q: np.ndarray
    gripper: float = 0.0
    timestamp: float = 0.0


@dataclass(frozen=True)
class ModeChange:
    from_mode: ControlMode
    to_mode: ControlMode
    reason: str


@dataclass
class LoopSnapshot:
    tick: int
    mode: ControlMode
    leader_ticks: RawTicks
    leader_q: JointVector
    follower_q: JointVector
    follower_target: JointVector
    source: ActionSource | None
    mode_changes: list[ModeChange] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


_EVENT_REASONS = {
    PedalEvent: "pedal",
    FaultEvent: "fault",
    ResumeEvent: "resume",
    PauseEvent: "pause",
}


class ControlLoop:
    def __init__(self, leader: SimLeader, follower: SimFollower, engine: SyncEngine, dt: float):
        self.leader = leader
        self.follower = follower
        self.engine = engine
        self.dt = dt
        self.tick_index = 0
        self._events: deque = deque()
        self._pending_leader_cmd: LeaderCommand | None = None

    def post(self, event) -> None:
        """Queue an event for the next step. Safe to call between steps from
        any producer; the loop drains the queue at the start of each tick."""
        self._events.append(event)

    @property
    def mode(self) -> ControlMode:
        return self.engine.mode

    def step(self, policy_provider=None) -> LoopSnapshot:
        """Advance one control period.

        `policy_provider` is called (with no arguments) only when the mode
        after event processing is autonomous; it returns the policy's joint
        command or None.
        """
        mode_changes: list[ModeChange] = []
        diagnostics: list[str] = []
        while self._events:
            event = self._events.popleft()
            if isinstance(event, LeaderCommand):
                if self.engine.mode is ControlMode.INTERVENTION:
                    self._pending_leader_cmd = event
                else:
                    diagnostics.append("leader command ignored outside intervention")
                continue
            before = self.engine.mode
            n_diag = len(self.engine.diagnostics)
            after = self.engine.handle_event(event)
            diagnostics.extend(self.engine.diagnostics[n_diag:])
            if after is not before:
                reason = _EVENT_REASONS.get(type(event), "event")
                mode_changes.append(ModeChange(before, after, reason))

        policy_cmd = None
        if self.engine.mode is ControlMode.AUTONOMOUS and policy_provider is not None:
            policy_cmd = policy_provider()

        leader_ticks = self.leader.read_ticks()
        follower_q = self.follower.read_positions()
        result = self.engine.tick(leader_ticks, follower_q, policy_cmd)
        diagnostics.extend(result.diagnostics)

        self.follower.write_targets(result.follower_target)
        if self.engine.mode is ControlMode.INTERVENTION:
            # The human owns the leader: apply their latest command and let
            # it persist; the engine leaves the leader's motors free.
            if self._pending_leader_cmd is not None:
                cmd = self._pending_leader_cmd
                angles = np.asarray(cmd.q, dtype=float)
                if self.engine.gripper_span is not None:
                    angles = np.append(angles, cmd.gripper * self.engine.gripper_span)
                self.leader.set_target_angles(angles)
                self._pending_leader_cmd = None
        else:
            self._pending_leader_cmd = None
            self.leader.write_ticks(result.leader_target)
        self.follower.step()
        self.leader.step()

        snapshot = LoopSnapshot(
            tick=self.tick_index,
            mode=result.state.mode,
            leader_ticks=leader_ticks,
            leader_q=self.engine.leader_to_follower(leader_ticks),
            follower_q=follower_q,
            follower_target=result.follower_target,
            source=result.source,
            mode_changes=mode_changes,
            diagnostics=diagnostics,
        )
        self.tick_index += 1
        return snapshot
