"""Quaternion and rotation helpers, vectorized over leading batch axes.

Quaternions are stored as (w, x, y, z) and map body-frame vectors into the
world frame: v_world = rotate(q, v_body).
"""

from __future__ import annotations

import numpy as np


def quat_identity(batch: int) -> np.ndarray:
    q = np.zeros((batch, 4))
    q[:, 0] = 1.0
    return q


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = (a[..., i] for i in range(4))
    bw, bx, by, bz = (b[..., i] for i in range(4))
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate body-frame vectors v into the world frame."""
    qw = q[..., :1]
    qv = q[..., 1:]
    t = 2.0 * np.cross(qv, v)
    return v + qw * t + np.cross(qv, t)


def quat_rotate_inv(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate world-frame vectors v into the body frame."""
    return quat_rotate(quat_conj(q), v)


def quat_from_axis_angle(axis: np.ndarray, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.broadcast_to(np.asarray(angle, dtype=float), axis.shape[:-1])
    return np.concatenate(
        [np.cos(half)[..., None], np.sin(half)[..., None] * axis], axis=-1
    )


def quat_integrate(q: np.ndarray, omega_body: np.ndarray, dt: float) -> np.ndarray:
    """One step of q <- q * exp(omega_body * dt / 2), renormalized."""
    ang = np.linalg.norm(omega_body, axis=-1, keepdims=True)
    half = 0.5 * dt * ang
    # small-angle safe axis
    axis = np.where(ang > 1e-12, omega_body / np.where(ang > 1e-12, ang, 1.0), 0.0)
    dq = np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)
    return quat_normalize(quat_mul(q, dq))


def quat_to_euler(q: np.ndarray):
    """Return (roll, pitch, yaw) in radians, ZYX convention."""
    w, x, y, z = (q[..., i] for i in range(4))
    roll = np.arctan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    sinp = np.clip(2.0 * (w * y - z * x), -1.0, 1.0)
    pitch = np.arcsin(sinp)
    yaw = np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw


def yaw_quat(yaw) -> np.ndarray:
    yaw = np.asarray(yaw, dtype=float)
    half = 0.5 * yaw
    zeros = np.zeros_like(half)
    return np.stack([np.cos(half), zeros, zeros, np.sin(half)], axis=-1)


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    wrapped = np.remainder(-a + np.pi, 2.0 * np.pi)
    return -(wrapped - np.pi)
