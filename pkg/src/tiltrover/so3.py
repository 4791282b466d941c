"""Rotation-matrix algebra for the vehicle state.

Attitude is carried as a 3x3 rotation matrix (body -> world) everywhere.
Euler angles appear only at the edges: operator setpoints, telemetry, and
the planar ground model, using the intrinsic Z-Y-X (yaw-pitch-roll)
convention R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
"""

from __future__ import annotations

import numpy as np


def skew(v: np.ndarray) -> np.ndarray:
    """Map a 3-vector to the matrix S with S @ u == cross(v, u)."""
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of skew for a skew-symmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Intrinsic Z-Y-X: yaw about world z, then pitch, then roll."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_to_euler(r: np.ndarray) -> tuple[float, float, float]:
    """Back out (roll, pitch, yaw) from a Z-Y-X rotation matrix.

    At the pitch singularity (|cos pitch| ~ 0) roll is reported as 0 and
    the remaining rotation is absorbed into yaw, which keeps lying-flat
    states (pitch at +-90 deg) well defined.
    """
    # r[2,0] = -sin(pitch); clamp against roundoff outside [-1, 1]
    sp = np.clip(-r[2, 0], -1.0, 1.0)
    pitch = float(np.arcsin(sp))
    if abs(sp) > 1.0 - 1e-12:
        roll = 0.0
        yaw = float(np.arctan2(-r[0, 1], r[1, 1]))
    else:
        roll = float(np.arctan2(r[2, 1], r[2, 2]))
        yaw = float(np.arctan2(r[1, 0], r[0, 0]))
    return roll, pitch, yaw


def attitude_error(r_d: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Body-frame attitude error 0.5 * vee(Rd^T R - R^T Rd).

    Zero iff R == Rd; for R = Rd @ Rz(e) the z component of the error is
    sin(e). Antisymmetric in its arguments.
    """
    e = 0.5 * (r_d.T @ r - r.T @ r_d)
    return vee(e)


def renormalize(r: np.ndarray) -> np.ndarray:
    """Re-orthonormalize a drifted rotation matrix (Gram-Schmidt on rows)."""
    x = r[0]
    x = x / np.linalg.norm(x)
    y = r[1] - np.dot(r[1], x) * x
    y = y / np.linalg.norm(y)
    z = np.cross(x, y)
    return np.array([x, y, z])


def wrap_pi(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    if w == -np.pi:
        w = np.pi
    return float(w)
