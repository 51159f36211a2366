"""Kinematics tests.

The FK oracle here chains primitive homogeneous matrices (Rz, Tz, Tx, Rx)
one by one; the production code uses the closed-form single-row matrix.
Both must agree to machine precision.
"""

import math

import numpy as np
import pytest

from telesync.errors import FileFormatError, InputError
from telesync.kinematics import (
    DHTable,
    JointLimits,
    JointVector,
    Pose,
    clamp_to_limits,
    forward_kinematics,
    load_dh_file,
    save_dh_file,
    scale_dh,
)


def _rot_z(t):
    c, s = np.cos(t), np.sin(t)
    T = np.eye(4)
    T[0, 0], T[0, 1], T[1, 0], T[1, 1] = c, -s, s, c
    return T


def _rot_x(a):
    c, s = np.cos(a), np.sin(a)
    T = np.eye(4)
    T[1, 1], T[1, 2], T[2, 1], T[2, 2] = c, -s, s, c
    return T


def _trans(x=0.0, z=0.0):
    T = np.eye(4)
    T[0, 3], T[2, 3] = x, z
    return T


def fk_oracle(rows, q):
    """Brute-force chain of primitive transforms (independent of the codebase)."""
    T = np.eye(4)
    for (a, alpha, d, off), qi in zip(rows, q):
        T = T @ _rot_z(qi + off) @ _trans(z=d) @ _trans(x=a) @ _rot_x(alpha)
    return T


UR5_ROWS = [
    (0.0, math.pi / 2, 0.089159, 0.0),
    (-0.425, 0.0, 0.0, 0.0),
    (-0.39225, 0.0, 0.0, 0.0),
    (0.0, math.pi / 2, 0.10915, 0.0),
    (0.0, -math.pi / 2, 0.09465, 0.0),
    (0.0, 0.0, 0.0823, 0.0),
]

# Frozen from fk_oracle(UR5_ROWS, zeros(6)).
UR5_HOME_POSITION = np.array([-0.81725, -0.19145, -0.005491])


def ur5_table():
    return DHTable.from_rows(UR5_ROWS)


class TestForwardKinematics:
    def test_single_joint_identity(self):
        dh = DHTable.from_rows([(0.0, 0.0, 0.0, 0.0)])
        pose = forward_kinematics(dh, JointVector(np.array([0.0])))
        assert np.allclose(pose.position, [0, 0, 0])
        assert np.allclose(pose.orientation, np.eye(3))

    def test_unit_link_quarter_turn(self):
        dh = DHTable.from_rows([(1.0, 0.0, 0.0, 0.0)])
        pose = forward_kinematics(dh, np.array([math.pi / 2]))
        assert np.allclose(pose.position, [0, 1, 0], atol=1e-15)

    def test_ur5_home_matches_oracle(self):
        pose = forward_kinematics(ur5_table(), np.zeros(6))
        T = fk_oracle(UR5_ROWS, np.zeros(6))
        assert np.allclose(pose.position, T[:3, 3], atol=1e-14)
        assert np.allclose(pose.orientation, T[:3, :3], atol=1e-14)
        assert np.allclose(pose.position, UR5_HOME_POSITION, atol=1e-12)

    def test_random_configurations_match_oracle(self):
        rng = np.random.default_rng(42)
        dh = ur5_table()
        for _ in range(200):
            q = rng.uniform(-math.pi, math.pi, size=6)
            pose = forward_kinematics(dh, q)
            T = fk_oracle(UR5_ROWS, q)
            assert np.allclose(pose.position, T[:3, 3], atol=1e-12)
            assert np.allclose(pose.orientation, T[:3, :3], atol=1e-12)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InputError):
            forward_kinematics(ur5_table(), np.zeros(5))

    def test_orientation_orthonormal_over_many_configurations(self):
        rng = np.random.default_rng(123)
        dh = ur5_table()
        worst = 0.0
        for _ in range(10_000):
            q = rng.uniform(-math.pi, math.pi, size=6)
            R = forward_kinematics(dh, q).orientation
            worst = max(worst, np.max(np.abs(R.T @ R - np.eye(3))))
        assert worst < 1e-9


class TestScaleDh:
    def test_identity_factor(self):
        dh = ur5_table()
        scaled = scale_dh(dh, 1.0)
        assert np.array_equal(scaled.a, dh.a)
        assert np.array_equal(scaled.d, dh.d)

    def test_half_factor_on_lengths_only(self):
        dh = DHTable.from_rows([(1.0, 0.3, 2.0, 0.7)])
        scaled = scale_dh(dh, 0.5)
        assert scaled.a[0] == 0.5 and scaled.d[0] == 1.0
        assert scaled.alpha[0] == 0.3 and scaled.theta_offset[0] == 0.7

    @pytest.mark.parametrize("factor", [0.0, -1.0, math.nan])
    def test_nonpositive_factor_rejected(self, factor):
        with pytest.raises(InputError):
            scale_dh(ur5_table(), factor)

    def test_fk_position_scales_orientation_unchanged(self):
        rng = np.random.default_rng(9)
        dh = ur5_table()
        for _ in range(100):
            q = rng.uniform(-math.pi, math.pi, size=6)
            k = float(rng.uniform(0.1, 3.0))
            base = forward_kinematics(dh, q)
            scaled = forward_kinematics(scale_dh(dh, k), q)
            assert np.allclose(scaled.position, k * base.position, atol=1e-12)
            assert np.allclose(scaled.orientation, base.orientation, atol=1e-12, rtol=0.0)


class TestClamp:
    def limits(self):
        return JointLimits(np.array([-math.pi, -1.0]), np.array([math.pi, 1.0]), np.array([1.0, 1.0]))

    def test_within_limits_unchanged(self):
        q = JointVector(np.array([0.5, -0.5]), 0.3)
        out = clamp_to_limits(q, self.limits())
        assert out == q

    def test_clamps_high_and_low(self):
        out = clamp_to_limits(JointVector(np.array([10.0, -10.0])), self.limits())
        assert out.q[0] == math.pi and out.q[1] == -1.0

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        lim = self.limits()
        for _ in range(200):
            q = JointVector(rng.uniform(-10, 10, size=2), float(rng.uniform(0, 1)))
            once = clamp_to_limits(q, lim)
            twice = clamp_to_limits(once, lim)
            assert once == twice

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InputError):
            clamp_to_limits(JointVector(np.zeros(3)), self.limits())


class TestTypes:
    def test_joint_vector_rejects_bad_gripper(self):
        with pytest.raises(InputError):
            JointVector(np.zeros(2), 1.5)
        with pytest.raises(InputError):
            JointVector(np.zeros(2), -0.1)

    def test_joint_vector_rejects_non_finite(self):
        with pytest.raises(InputError):
            JointVector(np.array([np.inf]))

    def test_limits_validation(self):
        with pytest.raises(InputError):
            JointLimits(np.array([1.0]), np.array([0.0]), np.array([1.0]))
        with pytest.raises(InputError):
            JointLimits(np.array([0.0]), np.array([1.0]), np.array([0.0]))

    def test_pose_rejects_non_rotation(self):
        with pytest.raises(InputError):
            Pose(np.zeros(3), 2 * np.eye(3))
        with pytest.raises(InputError):
            Pose(np.zeros(3), np.diag([1.0, 1.0, -1.0]))  # det -1


class TestDhFile:
    def test_shipped_ur5_table_matches_oracle(self):
        from importlib import resources

        with resources.as_file(resources.files("telesync.data") / "ur5.dh") as path:
            dh = load_dh_file(path)
        pose = forward_kinematics(dh, np.zeros(6))
        assert np.allclose(pose.position, UR5_HOME_POSITION, atol=1e-12)

    def test_round_trip(self, tmp_path):
        dh = ur5_table()
        path = tmp_path / "arm.dh"
        save_dh_file(path, dh, header="test table")
        loaded = load_dh_file(path)
        assert np.array_equal(loaded.a, dh.a)
        assert np.array_equal(loaded.alpha, dh.alpha)
        assert np.array_equal(loaded.d, dh.d)

    def test_bad_line_cites_line_number(self, tmp_path):
        path = tmp_path / "bad.dh"
        path.write_text("# comment\n0 0 0 0\n1 2 3\n")
        with pytest.raises(FileFormatError, match=r"bad\.dh:3"):
            load_dh_file(path)

    def test_non_numeric_cites_line_number(self, tmp_path):
        path = tmp_path / "bad.dh"
        path.write_text("0 zero 0 0\n")
        with pytest.raises(FileFormatError, match=r"bad\.dh:1"):
            load_dh_file(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.dh"
        path.write_text("# nothing\n")
        with pytest.raises(FileFormatError):
            load_dh_file(path)
