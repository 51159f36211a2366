"""Bilateral joint synchronization: calibration, position maps, mode machine.

The leader device reports raw motor ticks; the follower speaks joint
radians. A per-joint calibration (offset ticks + direction sign) relates
the two:

    forward  (leader -> follower):  q[i] = sign[i] * (2*pi/res) * wrap(raw[i] - offset[i])
    reverse  (follower -> leader):  raw[i] = offset[i] + round(sign[i] * q[i] * res / (2*pi))

`wrap` maps a tick difference into (-res/2, res/2], so every joint is a
single-turn axis. The reverse map is the right-inverse of the forward map
up to tick quantization (half a tick of angle, at most).

The mode machine guards the autonomous -> intervention handover: the pedal
only engages when the leader is mirroring the follower within a tolerance,
so taking over never yanks the arm.

Exactly one context may advance an engine (tick / handle_event); events can
be produced from anywhere and queued by the owner. Published snapshots are
immutable copies.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FileFormatError, InputError
from .kinematics import JointLimits, JointVector, clamp_to_limits
from .servobus import DEFAULT_RESOLUTION, RawTicks

TWO_PI = 2.0 * math.pi

# One tick of quantization plus one 50 Hz control step at 1 rad/s.
DEFAULT_HANDOVER_TOLERANCE = 0.02

# Control loop default; the learning environment decimates this to 10 Hz.
DEFAULT_SYNC_RATE_HZ = 50.0
DEFAULT_ENV_RATE_HZ = 10.0

# Leader gripper motor travel (radians) mapped onto the normalized [0, 1] command.
DEFAULT_GRIPPER_SPAN = math.pi / 2


@dataclass(frozen=True)
class CalibrationProfile:
    """Per-channel offset ticks and direction signs for one leader device."""

    offset: np.ndarray
    sign: np.ndarray
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        offset = np.asarray(self.offset, dtype=np.int64)
        sign = np.asarray(self.sign, dtype=np.int64)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "sign", sign)
        if offset.ndim != 1 or sign.ndim != 1 or len(offset) != len(sign):
            raise InputError("offset and sign must be 1-D arrays of equal length")
        if self.resolution <= 0:
            raise InputError("resolution must be positive")
        if np.any(offset < 0) or np.any(offset >= self.resolution):
            raise InputError(f"offsets must lie in [0, {self.resolution - 1}]")
        if not np.all(np.isin(sign, (-1, 1))):
            raise InputError("signs must be +1 or -1")

    @property
    def joint_count(self) -> int:
        return len(self.offset)


def wrap_signed(delta_ticks, resolution: int):
    """Map tick differences into the signed single-turn range (-res/2, res/2]."""
    wrapped = np.mod(delta_ticks, resolution)
    return np.where(wrapped > resolution / 2, wrapped - resolution, wrapped)


def ticks_to_angles(raw: RawTicks, profile: CalibrationProfile) -> np.ndarray:
    """Forward map on all channels, in radians."""
    if len(raw) != profile.joint_count:
        raise InputError(f"{len(raw)} tick channels but profile has {profile.joint_count}")
    if raw.resolution != profile.resolution:
        raise InputError("tick resolution differs from calibration resolution")
    delta = wrap_signed(raw.ticks - profile.offset, profile.resolution)
    return profile.sign * (TWO_PI / profile.resolution) * delta


def angles_to_ticks(angles, profile: CalibrationProfile) -> RawTicks:
    """Reverse map on all channels; quantizes to the nearest tick."""
    angles = np.asarray(angles, dtype=float)
    if len(angles) != profile.joint_count:
        raise InputError(f"{len(angles)} angles but profile has {profile.joint_count}")
    if np.any(np.abs(angles) > math.pi):
        raise InputError("angle outside the representable single-turn range (-pi, pi]")
    ticks = np.rint(profile.sign * angles * profile.resolution / TWO_PI).astype(np.int64)
    return RawTicks(np.mod(profile.offset + ticks, profile.resolution), profile.resolution)


def calibrate(
    raw: RawTicks,
    reference: JointVector,
    sign,
    resolution: int = DEFAULT_RESOLUTION,
    gripper_span: float = DEFAULT_GRIPPER_SPAN,
) -> CalibrationProfile:
    """Derive a profile from one matched pose.

    The leader is posed (physically or in sim) to mirror the follower's
    reference pose; the raw readings at that pose pin down each channel's
    offset. If `raw` has one channel more than the reference has joints,
    the extra channel is the gripper motor and `reference.gripper` (scaled
    by `gripper_span`) is its reference angle.
    """
    sign = np.asarray(sign, dtype=np.int64)
    if len(raw) == len(reference.q) + 1:
        ref_angles = np.append(reference.q, reference.gripper * gripper_span)
    elif len(raw) == len(reference.q):
        ref_angles = reference.q
    else:
        raise InputError(
            f"{len(raw)} tick channels cannot calibrate a {len(reference.q)}-joint reference"
        )
    if len(sign) != len(raw):
        raise InputError(f"{len(sign)} signs but {len(raw)} channels")
    if not np.all(np.isin(sign, (-1, 1))):
        raise InputError("signs must be +1 or -1")
    offset = np.rint(raw.ticks - sign * ref_angles * resolution / TWO_PI).astype(np.int64)
    return CalibrationProfile(np.mod(offset, resolution), sign, resolution)


def leader_to_follower(
    raw: RawTicks,
    profile: CalibrationProfile,
    gripper_span: float | None = None,
) -> JointVector:
    """Forward synchronization: raw leader ticks -> follower joint command.

    With `gripper_span` set, the profile's last channel is the gripper motor
    and its angle is normalized into [0, 1]; otherwise every channel is an
    arm joint and the gripper command is 0.
    """
    angles = ticks_to_angles(raw, profile)
    if gripper_span is None:
        return JointVector(angles, 0.0)
    grip = min(max(angles[-1] / gripper_span, 0.0), 1.0)
    return JointVector(angles[:-1], grip)


def follower_to_leader(
    q: JointVector,
    profile: CalibrationProfile,
    gripper_span: float | None = None,
) -> RawTicks:
    """Reverse synchronization: follower joint state -> leader tick targets.

    Restores raw positional values so the leader can mirror the robot;
    right-inverse of `leader_to_follower` up to half a tick of angle.
    """
    if gripper_span is None:
        angles = q.q
    else:
        angles = np.append(q.q, q.gripper * gripper_span)
    return angles_to_ticks(angles, profile)


def save_profile(path, profile: CalibrationProfile) -> None:
    """Persist as plain text: header `resolution N joints M`, then `offset sign` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"resolution {profile.resolution} joints {profile.joint_count}\n")
        for off, sgn in zip(profile.offset, profile.sign):
            fh.write(f"{int(off)} {int(sgn):+d}\n")


def load_profile(path) -> CalibrationProfile:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    header = lines[0].split() if lines else []
    if len(header) != 4 or header[0] != "resolution" or header[2] != "joints":
        raise FileFormatError(path, 1, "expected header `resolution N joints M`")
    try:
        resolution, joints = int(header[1]), int(header[3])
    except ValueError:
        raise FileFormatError(path, 1, "non-integer header fields") from None
    offsets, signs = [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FileFormatError(path, lineno, f"expected `offset sign`, got {line!r}")
        try:
            offsets.append(int(parts[0]))
            signs.append(int(parts[1]))
        except ValueError:
            raise FileFormatError(path, lineno, f"non-integer fields in {line!r}") from None
    if len(offsets) != joints:
        raise FileFormatError(path, len(lines), f"header says {joints} joints, found {len(offsets)}")
    try:
        return CalibrationProfile(np.array(offsets), np.array(signs), resolution)
    except InputError as exc:
        raise FileFormatError(path, 0, str(exc)) from None


# --- mode machine ---------------------------------------------------------


class ControlMode(enum.Enum):
    AUTONOMOUS = "autonomous"
    INTERVENTION = "intervention"
    PAUSED = "paused"
    FAULT = "fault"


class ActionSource(enum.Enum):
    EXPERT = "expert"
    POLICY = "policy"
    HUMAN_CORRECTION = "human_correction"


@dataclass(frozen=True)
class PedalEvent:
    """The manual override switch: pressed engages intervention."""

    pressed: bool
    timestamp: float = 0.0


@dataclass(frozen=True)
class FaultEvent:
    reason: str = ""


@dataclass(frozen=True)
class ResumeEvent:
    pass


@dataclass(frozen=True)
class PauseEvent:
    pass


@dataclass(frozen=True)
class SyncState:
    mode: ControlMode
    last_leader_q: JointVector
    last_follower_q: JointVector
    handover_tolerance: float = DEFAULT_HANDOVER_TOLERANCE
    tick_count: int = 0

    def __post_init__(self):
        if self.handover_tolerance <= 0:
            raise InputError("handover_tolerance must be positive")


def handover_guard_ok(state: SyncState) -> bool:
    """True when the leader mirrors the follower closely enough to take over."""
    gap = np.max(np.abs(state.last_leader_q.q - state.last_follower_q.q))
    return bool(gap <= state.handover_tolerance)


def step_mode(state: SyncState, event) -> tuple[SyncState, list[str]]:
    """Advance the mode machine by one event. Invalid events are ignored
    with a diagnostic; they never raise and never corrupt the mode."""
    mode = state.mode
    diags: list[str] = []
    if isinstance(event, FaultEvent):
        if mode is not ControlMode.FAULT:
            return replace(state, mode=ControlMode.FAULT), diags
        return state, diags
    if isinstance(event, PedalEvent):
        if event.pressed:
            if mode is ControlMode.AUTONOMOUS:
                if handover_guard_ok(state):
                    return replace(state, mode=ControlMode.INTERVENTION), diags
                gap = float(np.max(np.abs(state.last_leader_q.q - state.last_follower_q.q)))
                diags.append(
                    f"handover refused: leader/follower gap {gap:.4f} rad exceeds "
                    f"tolerance {state.handover_tolerance:.4f}"
                )
                return state, diags
            diags.append(f"pedal press ignored in mode {mode.value}")
            return state, diags
        if mode is ControlMode.INTERVENTION:
            return replace(state, mode=ControlMode.AUTONOMOUS), diags
        diags.append(f"pedal release ignored in mode {mode.value}")
        return state, diags
    if isinstance(event, ResumeEvent):
        if mode is ControlMode.PAUSED:
            return replace(state, mode=ControlMode.AUTONOMOUS), diags
        diags.append(f"resume ignored in mode {mode.value}")
        return state, diags
    if isinstance(event, PauseEvent):
        if mode in (ControlMode.AUTONOMOUS, ControlMode.INTERVENTION):
            return replace(state, mode=ControlMode.PAUSED), diags
        diags.append(f"pause ignored in mode {mode.value}")
        return state, diags
    diags.append(f"unknown event {event!r} ignored")
    return state, diags


@dataclass
class TickResult:
    follower_target: JointVector
    leader_target: RawTicks
    source: ActionSource | None
    state: SyncState
    diagnostics: list[str] = field(default_factory=list)


def tick_once(
    state: SyncState,
    leader_raw: RawTicks,
    follower_q: JointVector,
    policy_cmd: JointVector | None,
    profile: CalibrationProfile,
    limits: JointLimits,
    gripper_span: float | None = None,
) -> TickResult:
    """One synchronization step at the fixed loop rate.

    Autonomous: the policy drives the follower while the leader is servoed
    to mirror the follower (reverse synchronization), so it stays poised
    for takeover. Intervention: the human-held leader drives the follower
    and the leader's own motors are left free. Paused/Fault: both sides
    hold position.
    """
    diags: list[str] = []
    leader_q = leader_to_follower(leader_raw, profile, gripper_span)
    mode = state.mode
    if mode is ControlMode.AUTONOMOUS:
        if policy_cmd is None:
            follower_target = follower_q.copy()
            source = None
            diags.append("no policy command in autonomous mode; holding position")
        else:
            follower_target = clamp_to_limits(policy_cmd, limits)
            source = ActionSource.POLICY
        leader_target = follower_to_leader(follower_q, profile, gripper_span)
    elif mode is ControlMode.INTERVENTION:
        follower_target = clamp_to_limits(leader_q, limits)
        leader_target = leader_raw
        source = ActionSource.HUMAN_CORRECTION
    else:  # PAUSED or FAULT: hold
        follower_target = follower_q.copy()
        leader_target = leader_raw
        source = None
    new_state = replace(
        state,
        last_leader_q=leader_q,
        last_follower_q=follower_q,
        tick_count=state.tick_count + 1,
    )
    return TickResult(follower_target, leader_target, source, new_state, diags)


class SyncEngine:
    """Owns the mode machine and calibration for one leader/follower pair.

    Single-writer: exactly one control loop advances the engine. Readers
    get immutable state snapshots.
    """

    def __init__(
        self,
        profile: CalibrationProfile,
        limits: JointLimits,
        handover_tolerance: float = DEFAULT_HANDOVER_TOLERANCE,
        gripper_span: float = DEFAULT_GRIPPER_SPAN,
        initial_mode: ControlMode = ControlMode.AUTONOMOUS,
    ):
        arm_joints = limits.joint_count
        if profile.joint_count not in (arm_joints, arm_joints + 1):
            raise InputError(
                f"profile has {profile.joint_count} channels; limits cover {arm_joints} joints"
            )
        self.profile = profile
        self.limits = limits
        self.gripper_span = gripper_span if profile.joint_count == arm_joints + 1 else None
        zero = JointVector(np.zeros(arm_joints))
        self.state = SyncState(
            mode=initial_mode,
            last_leader_q=zero,
            last_follower_q=zero.copy(),
            handover_tolerance=handover_tolerance,
        )
        self.diagnostics: list[str] = []
        self._last_pedal_ts = -math.inf

    @property
    def mode(self) -> ControlMode:
        return self.state.mode

    def handle_event(self, event) -> ControlMode:
        if isinstance(event, PedalEvent):
            if event.timestamp < self._last_pedal_ts:
                self.diagnostics.append(
                    f"out-of-order pedal event ({event.timestamp} < {self._last_pedal_ts}) ignored"
                )
                return self.state.mode
            self._last_pedal_ts = event.timestamp
        self.state, diags = step_mode(self.state, event)
        self.diagnostics.extend(diags)
        return self.state.mode

    def tick(
        self,
        leader_raw: RawTicks,
        follower_q: JointVector,
        policy_cmd: JointVector | None = None,
    ) -> TickResult:
        result = tick_once(
            self.state,
            leader_raw,
            follower_q,
            policy_cmd,
            self.profile,
            self.limits,
            self.gripper_span,
        )
        self.state = result.state
        self.diagnostics.extend(result.diagnostics)
        return result

    def leader_to_follower(self, raw: RawTicks) -> JointVector:
        return leader_to_follower(raw, self.profile, self.gripper_span)

    def follower_to_leader(self, q: JointVector) -> RawTicks:
        return follower_to_leader(q, self.profile, self.gripper_span)
