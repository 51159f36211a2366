"""Simulated leader and follower arms, and the contract real drivers implement.

Both sim arms are first-order rate-limited position trackers: each step
moves every joint toward its target by at most v_max*dt and clamps to the
joint limits. That is deliberately simple — convergence is closed-form
(ceil(|delta| / (v_max*dt)) steps), which keeps every synchronization
property testable without a physics engine.

Each simulated device is owned by the control loop; other contexts interact
through the gateway's event queue, never by poking device state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol, runtime_checkable

import numpy as np

from .configio import kv_floats, read_kv_file
from .errors import FileFormatError, InputError
from .kinematics import JointLimits, JointVector, clamp_to_limits
from .servobus import DEFAULT_RESOLUTION, RawTicks
from .sync import (
    DEFAULT_GRIPPER_SPAN,
    CalibrationProfile,
    angles_to_ticks,
    ticks_to_angles,
)

DEFAULT_FOLLOWER_V_MAX = 1.0  # rad/s
DEFAULT_LEADER_V_MAX = 4.0  # rad/s; the leader is light and quick
DEFAULT_GRIPPER_RATE = 5.0  # normalized units/s


@dataclass(frozen=True)
class SimArmState:
    q: JointVector
    target: JointVector
    limits: JointLimits
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise InputError("dt must be positive")
        if len(self.q) != self.limits.joint_count or len(self.target) != self.limits.joint_count:
            raise InputError("state dimensions do not match limits")


def sim_step(state: SimArmState, target: JointVector, gripper_rate: float = DEFAULT_GRIPPER_RATE) -> SimArmState:
    """Advance one control period toward `target`. Deterministic."""
    if len(target) != len(state.q):
        raise InputError(f"target has {len(target)} joints, arm has {len(state.q)}")
    max_step = state.limits.v_max * state.dt
    delta = np.clip(target.q - state.q.q, -max_step, max_step)
    q_new = np.clip(state.q.q + delta, state.limits.lower, state.limits.upper)
    g_step = gripper_rate * state.dt
    g_delta = min(max(target.gripper - state.q.gripper, -g_step), g_step)
    g_new = min(max(state.q.gripper + g_delta, 0.0), 1.0)
    return replace(state, q=JointVector(q_new, g_new), target=target.copy())


def steps_to_converge(delta: float, v_max: float, dt: float) -> int:
    """Closed-form step count for the rate-limited tracker to close `delta`."""
    return int(math.ceil(abs(delta) / (v_max * dt)))


@runtime_checkable
class DeviceContract(Protocol):
    """What a real driver plugs in as.

    Every device supports passive position reading; only devices with
    active_control accept target writes (the low-cost leader hardware does
    both, which is what makes reverse synchronization possible).
    """

    active_control: bool
    passive_read: bool

    def read_positions(self): ...

    def write_targets(self, target) -> None: ...


class SimFollower:
    """Rate-limited joint-space arm standing in for the robot."""

    active_control = True
    passive_read = True

    def __init__(self, limits: JointLimits, dt: float, q0: JointVector | None = None):
        q0 = q0 if q0 is not None else JointVector(np.zeros(limits.joint_count))
        q0 = clamp_to_limits(q0, limits)
        self.state = SimArmState(q0, q0.copy(), limits, dt)

    def read_positions(self) -> JointVector:
        return self.state.q.copy()

    def write_targets(self, target: JointVector) -> None:
        self.state = replace(self.state, target=clamp_to_limits(target, self.state.limits))

    def step(self) -> None:
        self.state = sim_step(self.state, self.state.target)


class SimLeader:
    """Rate-limited miniature arm exposing the tick interface real motors do.

    Internally tracks angles (arm joints plus, optionally, a gripper motor
    channel); externally it reads and accepts raw ticks through the
    calibration profile, exactly like a rack of bus servos.
    """

    active_control = True
    passive_read = True

    def __init__(
        self,
        profile: CalibrationProfile,
        limits: JointLimits,
        dt: float,
        angles0: np.ndarray | None = None,
    ):
        if limits.joint_count != profile.joint_count:
            raise InputError("leader limits must cover every profile channel")
        self.profile = profile
        q0 = JointVector(np.zeros(profile.joint_count) if angles0 is None else angles0)
        q0 = clamp_to_limits(q0, limits)
        self.state = SimArmState(q0, q0.copy(), limits, dt)

    @property
    def angles(self) -> np.ndarray:
        return self.state.q.q.copy()

    def read_positions(self) -> RawTicks:
        return leader_as_ticks(self.state, self.profile)

    read_ticks = read_positions

    def write_targets(self, target: RawTicks) -> None:
        angles = ticks_to_angles(target, self.profile)
        self.state = replace(
            self.state,
            target=clamp_to_limits(JointVector(angles), self.state.limits),
        )

    write_ticks = write_targets

    def set_target_angles(self, angles: np.ndarray) -> None:
        """Direct angle target — how a scripted or live operator 'moves' the leader."""
        self.state = replace(
            self.state,
            target=clamp_to_limits(JointVector(np.asarray(angles, dtype=float)), self.state.limits),
        )

    def step(self) -> None:
        self.state = sim_step(self.state, self.state.target)


def leader_as_ticks(state: SimArmState, profile: CalibrationProfile) -> RawTicks:
    """Quantize a sim arm's angles onto the tick interface real motors expose."""
    return angles_to_ticks(state.q.q, profile)


@dataclass(frozen=True)
class DevicePreset:
    """Loadable device configuration: joint counts, limits, rates, motor layout."""

    name: str
    joints: int
    has_gripper: bool
    resolution: int
    motor_ids: tuple[int, ...]
    limits: JointLimits
    gripper_span: float = DEFAULT_GRIPPER_SPAN

    def __post_init__(self):
        channels = self.joints + (1 if self.has_gripper else 0)
        if self.motor_ids and len(self.motor_ids) != channels:
            raise InputError(f"{len(self.motor_ids)} motor ids but {channels} channels")
        if self.limits.joint_count != channels:
            raise InputError("preset limits must cover every channel")


class SimServoBus:
    """Byte-level stand-in for a rack of bus servos.

    Accepts encoded Protocol 2.0 frames and answers grouped reads with
    encoded status frames, so driver code can be exercised against the
    exact wire format it would speak to real motors.
    """

    def __init__(self, leader: SimLeader, motor_ids):
        from .servobus import StreamDecoder

        self.leader = leader
        self.motor_ids = [int(i) for i in motor_ids]
        if len(self.motor_ids) != leader.profile.joint_count:
            raise InputError("one motor id per profile channel required")
        self._decoder = StreamDecoder()

    def feed(self, wire_bytes: bytes) -> bytes:
        """Process inbound frames; returns reply bytes (possibly empty)."""
        from .servobus import (
            INSTR_SYNC_READ,
            INSTR_SYNC_WRITE,
            POSITION_BYTES,
            RawTicks,
            encode_packet,
            status_packet,
        )

        reply = bytearray()
        for pkt in self._decoder.feed(wire_bytes):
            if pkt.instruction == INSTR_SYNC_WRITE:
                ticks = dict(self._iter_sync_write(pkt.params))
                ordered = [ticks[i] for i in self.motor_ids if i in ticks]
                if len(ordered) == len(self.motor_ids):
                    self.leader.write_ticks(
                        RawTicks(np.array(ordered), self.leader.profile.resolution)
                    )
            elif pkt.instruction == INSTR_SYNC_READ:
                ids = list(pkt.params[4:])
                current = self.leader.read_ticks()
                pos = dict(zip(self.motor_ids, current.ticks))
                for motor_id in ids:
                    if motor_id in pos:
                        reply += encode_packet(status_packet(motor_id, int(pos[motor_id])))
        return bytes(reply)

    @staticmethod
    def _iter_sync_write(params: bytes):
        from .servobus import POSITION_BYTES

        stride = 1 + POSITION_BYTES
        body = params[4:]
        for i in range(0, len(body) - stride + 1, stride):
            yield body[i], int.from_bytes(body[i + 1 : i + stride], "little")


def load_preset(path) -> DevicePreset:
    kv = read_kv_file(path)
    try:
        name = kv["name"][0]
        joints = int(kv["joints"][0])
        has_gripper = bool(int(kv.get("gripper", ["0"])[0]))
        resolution = int(kv.get("resolution", [str(DEFAULT_RESOLUTION)])[0])
        motor_ids = tuple(int(t) for t in kv.get("motor_ids", []))
    except (KeyError, ValueError) as exc:
        raise FileFormatError(path, 0, f"bad preset field: {exc}") from None
    lower = kv_floats(kv, "lower", path)
    upper = kv_floats(kv, "upper", path)
    v_max = kv_floats(kv, "v_max", path)
    span = float(kv.get("gripper_span", [str(DEFAULT_GRIPPER_SPAN)])[0])
    try:
        limits = JointLimits(np.array(lower), np.array(upper), np.array(v_max))
        return DevicePreset(name, joints, has_gripper, resolution, motor_ids, limits, span)
    except InputError as exc:
        raise FileFormatError(path, 0, str(exc)) from None
