"""Denavit-Hartenberg kinematic chains and forward kinematics.

Uses the standard (distal) DH convention: the transform for joint i is

    A_i = Rz(theta_i + theta_offset_i) . Tz(d_i) . Tx(a_i) . Rx(alpha_i)

All angles are radians, all lengths meters. Functions here are pure and
safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FileFormatError, InputError

ORTHONORMALITY_TOL = 1e-9


@dataclass(frozen=True)
class DHTable:
    """One row per joint: (a, alpha, d, theta_offset)."""

    a: np.ndarray
    alpha: np.ndarray
    d: np.ndarray
    theta_offset: np.ndarray

    def __post_init__(self):
        for name in ("a", "alpha", "d", "theta_offset"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        n = len(self.a)
        if n < 1:
            raise InputError("DH table needs at least one row")
        for name in ("alpha", "d", "theta_offset"):
            if len(getattr(self, name)) != n:
                raise InputError("DH table columns differ in length")
        for name in ("a", "alpha", "d", "theta_offset"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InputError(f"DH column {name!r} contains non-finite values")

    @property
    def joint_count(self) -> int:
        return len(self.a)

    @classmethod
    def from_rows(cls, rows) -> "DHTable":
        """Build from an iterable of (a, alpha, d, theta_offset) rows."""
        rows = list(rows)
        if not rows:
            raise InputError("DH table needs at least one row")
        cols = np.asarray(rows, dtype=float)
        if cols.ndim != 2 or cols.shape[1] != 4:
            raise InputError("each DH row must be (a, alpha, d, theta_offset)")
        return cls(cols[:, 0], cols[:, 1], cols[:, 2], cols[:, 3])

    def rows(self):
        return [tuple(row) for row in np.stack([self.a, self.alpha, self.d, self.theta_offset], axis=1)]


@dataclass
class JointVector:
    """Ordered joint angles (radians) plus a normalized gripper command."""

    q: np.ndarray
    gripper: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 1:
            raise InputError("q must be a 1-D array of joint angles")
        if not np.all(np.isfinite(self.q)):
            raise InputError("joint angles must be finite")
        self.gripper = float(self.gripper)
        if not math.isfinite(self.gripper) or not 0.0 <= self.gripper <= 1.0:
            raise InputError(f"gripper must be in [0, 1], got {self.gripper}")

    def __len__(self) -> int:
        return len(self.q)

    def copy(self) -> "JointVector":
        return JointVector(self.q.copy(), self.gripper)

    def allclose(self, other: "JointVector", atol: float = 1e-12) -> bool:
        return (
            len(self) == len(other)
            and np.allclose(self.q, other.q, atol=atol, rtol=0.0)
            and abs(self.gripper - other.gripper) <= atol
        )

    def __eq__(self, other):
        if not isinstance(other, JointVector):
            return NotImplemented
        return (
            np.array_equal(self.q, other.q) and self.gripper == other.gripper
        )


@dataclass(frozen=True)
class JointLimits:
    lower: np.ndarray
    upper: np.ndarray
    v_max: np.ndarray  # rad/s, per joint

    def __post_init__(self):
        for name in ("lower", "upper", "v_max"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (len(self.lower) == len(self.upper) == len(self.v_max)):
            raise InputError("limit arrays differ in length")
        if np.any(self.lower > self.upper):
            raise InputError("lower limit exceeds upper limit")
        if np.any(self.v_max <= 0.0):
            raise InputError("v_max must be positive")

    @property
    def joint_count(self) -> int:
        return len(self.lower)

    @classmethod
    def symmetric(cls, joint_count: int, bound: float = math.pi, v_max: float = 1.0) -> "JointLimits":
        return cls(
            np.full(joint_count, -bound),
            np.full(joint_count, bound),
            np.full(joint_count, v_max),
        )


@dataclass(frozen=True)
class Pose:
    """End-frame pose: position in meters, row-major 3x3 rotation."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        R = np.asarray(self.orientation, dtype=float).reshape(3, 3)
        object.__setattr__(self, "orientation", R)
        err = np.max(np.abs(R.T @ R - np.eye(3)))
        if err >= ORTHONORMALITY_TOL or abs(np.linalg.det(R) - 1.0) >= ORTHONORMALITY_TOL:
            raise InputError("orientation is not a proper rotation matrix")


def dh_transform(a: float, alpha: float, d: float, theta: float) -> np.ndarray:
    """Homogeneous transform of one standard-DH joint."""
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(alpha), math.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def chain_transforms(dh: DHTable, q: JointVector | np.ndarray) -> list[np.ndarray]:
    """Cumulative transforms base->joint_i for i = 1..n (useful for sketches)."""
    angles = q.q if isinstance(q, JointVector) else np.asarray(q, dtype=float)
    if len(angles) != dh.joint_count:
        raise InputError(
            f"joint vector has {len(angles)} entries, DH table has {dh.joint_count} rows"
        )
    T = np.eye(4)
    out = []
    for i in range(dh.joint_count):
        T = T @ dh_transform(dh.a[i], dh.alpha[i], dh.d[i], angles[i] + dh.theta_offset[i])
        out.append(T.copy())
    return out


def forward_kinematics(dh: DHTable, q: JointVector | np.ndarray) -> Pose:
    """End-frame pose from chaining the standard DH transforms. Deterministic."""
    T = chain_transforms(dh, q)[-1]
    return Pose(T[:3, 3], T[:3, :3])


def scale_dh(dh: DHTable, factor: float) -> DHTable:
    """Scale link lengths (a and d) by `factor`; angles are untouched.

    This is how a miniature, kinematically equivalent input device is derived
    from the full-size arm's table: same joint structure, shorter links.
    """
    factor = float(factor)
    if not math.isfinite(factor) or factor <= 0.0:
        raise InputError(f"scale factor must be positive, got {factor}")
    return DHTable(dh.a * factor, dh.alpha.copy(), dh.d * factor, dh.theta_offset.copy())


# Default miniaturization for the leader device; configuration, not physics.
DEFAULT_LEADER_SCALE = 0.5


def clamp_to_limits(q: JointVector, limits: JointLimits) -> JointVector:
    if len(q) != limits.joint_count:
        raise InputError(
            f"joint vector has {len(q)} entries, limits have {limits.joint_count}"
        )
    clamped = np.clip(q.q, limits.lower, limits.upper)
    return JointVector(clamped, min(max(q.gripper, 0.0), 1.0))


def load_dh_file(path) -> DHTable:
    """Load a DH table from a plain-text file.

    One row per line: `a alpha d theta_offset` (decimal, meters/radians).
    `#` starts a comment. Errors cite the offending line.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FileFormatError(path, lineno, f"expected 4 values, got {len(parts)}")
            try:
                rows.append(tuple(float(p) for p in parts))
            except ValueError:
                raise FileFormatError(path, lineno, f"non-numeric value in {line!r}") from None
    if not rows:
        raise FileFormatError(path, 0, "no DH rows found")
    return DHTable.from_rows(rows)


def save_dh_file(path, dh: DHTable, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        fh.write("# a alpha d theta_offset\n")
        for a, alpha, d, off in dh.rows():
            fh.write(f"{float(a)!r} {float(alpha)!r} {float(d)!r} {float(off)!r}\n")
