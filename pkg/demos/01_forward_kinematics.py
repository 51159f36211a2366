"""Forward kinematics walkthrough: DH tables, poses, and leader miniaturization.

Run:  python3 demos/01_forward_kinematics.py
"""

import numpy as np

from telesync import DHTable, JointVector, forward_kinematics, scale_dh
from telesync.kinematics import DEFAULT_LEADER_SCALE, load_dh_file

np.set_printoptions(precision=4, suppress=True)

# A DH table is one row per joint: (a, alpha, d, theta_offset).
# This is the shipped 6-axis arm table (manufacturer values).
from importlib import resources

with resources.as_file(resources.files("telesync.data") / "ur5.dh") as path:
    arm = load_dh_file(path)
print(f"loaded DH table with {arm.joint_count} joints")

# Home pose: all joints at zero.
home = forward_kinematics(arm, JointVector(np.zeros(6)))
print("home position   :", home.position)
print("home orientation:\n", home.orientation)

# Move the first joint a quarter turn.
pose = forward_kinematics(arm, np.array([np.pi / 2, 0, 0, 0, 0, 0]))
print("\nafter a quarter turn of joint 1:", pose.position)

# The miniature leader device uses the *same* joint structure with link
# lengths scaled down, so joint angles map one-to-one with the robot; no
# inverse kinematics anywhere.
mini = scale_dh(arm, DEFAULT_LEADER_SCALE)
q = JointVector(np.array([0.3, -0.8, 1.0, 0.2, 0.5, -0.1]))
full_pose = forward_kinematics(arm, q)
mini_pose = forward_kinematics(mini, q)
print("\nfull-size end effector:", full_pose.position)
print("miniature end effector:", mini_pose.position)
print("position ratio        :", mini_pose.position / full_pose.position)
print("orientations identical:", np.allclose(full_pose.orientation, mini_pose.orientation))
