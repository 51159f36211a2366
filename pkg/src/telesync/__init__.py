"""telesync: bilateral leader/follower joint synchronization for robot learning.

A real-time teleoperation middleware in miniature: a servo-bus codec, DH
kinematics, offset calibration with bidirectional position maps, an
autonomous/intervention mode machine with guarded handover, episode
recording with correction-aware dataset mixing, a streaming gateway, and a
desk-scale human-in-the-loop learning harness.
"""

__version__ = "0.1.0"

from .errors import FileFormatError, InputError, TelesyncError
from .kinematics import (
    DHTable,
    JointLimits,
    JointVector,
    Pose,
    clamp_to_limits,
    forward_kinematics,
    load_dh_file,
    scale_dh,
)
from .servobus import BusPacket, RawTicks, crc16, decode_stream, encode_packet
from .sync import (
    ActionSource,
    CalibrationProfile,
    ControlMode,
    PedalEvent,
    SyncEngine,
    SyncState,
    calibrate,
    follower_to_leader,
    leader_to_follower,
)
from .episodes import (
    EpisodeRecord,
    EpisodeRecorder,
    InterventionStats,
    MixSetting,
    Outcome,
    Scenario,
    Step,
    intervention_stats,
    mix_datasets,
    read_episode,
    write_episode,
)

__all__ = [
    "ActionSource",
    "BusPacket",
    "CalibrationProfile",
    "ControlMode",
    "DHTable",
    "EpisodeRecord",
    "EpisodeRecorder",
    "FileFormatError",
    "InputError",
    "InterventionStats",
    "JointLimits",
    "JointVector",
    "MixSetting",
    "Outcome",
    "PedalEvent",
    "Pose",
    "RawTicks",
    "Scenario",
    "Step",
    "SyncEngine",
    "SyncState",
    "TelesyncError",
    "calibrate",
    "clamp_to_limits",
    "crc16",
    "decode_stream",
    "encode_packet",
    "follower_to_leader",
    "forward_kinematics",
    "intervention_stats",
    "leader_to_follower",
    "load_dh_file",
    "mix_datasets",
    "read_episode",
    "scale_dh",
    "write_episode",
]
