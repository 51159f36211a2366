"""Bilateral synchronization walkthrough: calibration, both position maps,
the mode machine with its handover guard, and reverse-sync mirroring.

Run:  python3 demos/03_calibration_and_sync.py
"""

import numpy as np

from telesync import CalibrationProfile, JointLimits, JointVector, PedalEvent, SyncEngine
from telesync.devices import SimLeader
from telesync.servobus import RawTicks
from telesync.sync import ControlMode, calibrate, follower_to_leader, leader_to_follower

np.set_printoptions(precision=4, suppress=True)

# --- offset calibration ------------------------------------------------------
# Pose the leader to mirror the follower's reference pose, read raw ticks,
# and the per-joint offsets fall out.
raw_at_reference = RawTicks(np.array([2048, 3072, 1024]))
reference = JointVector(np.array([0.0, np.pi / 2, np.pi / 2]))
profile = calibrate(raw_at_reference, reference, sign=[1, 1, -1])
print("calibrated offsets:", profile.offset, "signs:", profile.sign)

# Forward map: raw leader ticks -> follower joint command.
q = leader_to_follower(raw_at_reference, profile)
print("at the reference pose the map returns:", q.q)

# Reverse map ("reverse offset compensation"): follower joints -> leader
# tick targets, so the leader can mirror the robot while a policy drives it.
ticks = follower_to_leader(JointVector(np.array([0.5, -0.25, 1.0])), profile)
print("tick targets for an arbitrary pose:", ticks.ticks)
round_trip = leader_to_follower(ticks, profile)
print("round trip error (rad):", np.abs(round_trip.q - [0.5, -0.25, 1.0]).max())

# --- the mode machine --------------------------------------------------------
limits = JointLimits.symmetric(3, v_max=1.0)
engine = SyncEngine(profile, limits, handover_tolerance=0.02)

follower_q = JointVector(np.array([0.3, 0.1, -0.2]))
synced = follower_to_leader(follower_q, profile)
desynced = follower_to_leader(JointVector(np.array([0.9, 0.1, -0.2])), profile)

# Pressing the pedal while the leader is out of position is refused:
engine.tick(desynced, follower_q, policy_cmd=follower_q)
engine.handle_event(PedalEvent(True, timestamp=0.0))
print("\npedal with desynced leader ->", engine.mode.value)
print("diagnostic:", engine.diagnostics[-1])

# Once the leader mirrors the follower, the same press goes through:
engine.tick(synced, follower_q, policy_cmd=follower_q)
engine.handle_event(PedalEvent(True, timestamp=1.0))
print("pedal with mirroring leader ->", engine.mode.value)
engine.handle_event(PedalEvent(False, timestamp=2.0))
print("pedal released ->", engine.mode.value)

# --- reverse synchronization in motion ----------------------------------------
# While a policy drives the follower, every tick sends the leader a mirror
# target; the simulated leader (a rate-limited servo) tracks it.
leader = SimLeader(profile, JointLimits.symmetric(3, v_max=4.0), dt=0.02)
target_q = JointVector(np.array([0.6, -0.4, 0.8]))
for step in range(20):
    result = engine.tick(leader.read_ticks(), target_q, policy_cmd=target_q)
    leader.write_ticks(result.leader_target)
    leader.step()
print("\nafter 20 ticks of reverse sync the leader sits at:", leader.angles)
print("(the follower pose it mirrors:                      ", target_q.q, ")")
