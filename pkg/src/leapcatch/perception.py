"""Synthetic observation channel: FoV gating, camera-rate sampling,
per-episode latency, capture-time noise, and observation assembly.

Captures happen on the virtual camera's 30 Hz grid; each capture stores the
(noised) target position in the end-effector frame together with its
detected bit.  Queries return the newest capture that is at least one
latency old, zero-order held; noise is attached at capture time, so a
re-served capture carries identical noise.
"""

from __future__ import annotations

import numpy as np

from .config import CameraConfig, PerceptionConfig
from .rotations import quat_rotate, quat_rotate_inv


# observation layout (pre-hint): slices into the flat vector
OBS_JOINT_POS = slice(0, 12)
OBS_JOINT_VEL = slice(12, 24)
OBS_ANG_VEL = slice(24, 27)
OBS_GRAVITY = slice(27, 30)
OBS_PREV_ACTION = slice(30, 42)
OBS_TARGET = slice(42, 45)
OBS_DETECTED = 45
OBS_V_CMD = 46
OBS_HINT = 47
OBS_DIM = 47  # +1 with the absolute-height hint

# normalization constants applied when assembling the vector
JOINT_VEL_SCALE = 0.05
ANG_VEL_SCALE = 0.25
TARGET_CLIP = 4.0  # m


def camera_axes(base_quat, cam: CameraConfig):
    """World-frame optical axis and camera origin offset handling.

    The camera sits at ``cam.offset`` in the base frame with its optical
    axis pitched up by ``cam.pitch_up`` from base +x.  Returns the world
    position offset and the three camera basis vectors (axis, right, up).
    """
    cp, sp = np.cos(cam.pitch_up), np.sin(cam.pitch_up)
    axis_b = np.array([cp, 0.0, sp])
    right_b = np.array([0.0, -1.0, 0.0])
    up_b = np.cross(axis_b, right_b)
    axis = quat_rotate(base_quat, np.broadcast_to(axis_b, base_quat[..., :3].shape))
    right = quat_rotate(base_quat, np.broadcast_to(right_b, base_quat[..., :3].shape))
    up = quat_rotate(base_quat, np.broadcast_to(up_b, base_quat[..., :3].shape))
    return axis, right, up


def fov_check(ball_pos_w, base_pos, base_quat, cam: CameraConfig):
    """1 iff the ball center lies in front of the camera and inside both
    FoV half-angles (closed boundary)."""
    offset_w = quat_rotate(base_quat, np.broadcast_to(np.asarray(cam.offset, dtype=float),
                                                     base_pos.shape))
    cam_pos = np.asarray(base_pos, dtype=float) + offset_w
    rel = np.asarray(ball_pos_w, dtype=float) - cam_pos
    axis, right, up = camera_axes(base_quat, cam)
    depth = np.sum(rel * axis, axis=-1)
    x = np.sum(rel * right, axis=-1)
    y = np.sum(rel * up, axis=-1)
    in_front = depth > 1e-9
    safe_depth = np.maximum(depth, 1e-9)
    h_ok = np.abs(np.arctan2(x, safe_depth)) <= cam.h_half_fov
    v_ok = np.abs(np.arctan2(y, safe_depth)) <= cam.v_half_fov
    return in_front & h_ok & v_ok


def add_uniform_noise(pos, amplitude: float, rng: np.random.Generator):
    """Independent per-axis Uniform(-a, +a) perturbation."""
    if amplitude < 0.0:
        raise ValueError("noise amplitude must be >= 0")
    pos = np.asarray(pos, dtype=float)
    if amplitude == 0.0:
        return pos.copy()
    return pos + rng.uniform(-amplitude, amplitude, size=pos.shape)


def target_in_ee_frame(ball_pos_w, ee_pos_w, base_quat):
    """Ball position expressed in the end-effector (gripper) frame, which is
    base-oriented and centered at the mouth point."""
    return quat_rotate_inv(base_quat, np.asarray(ball_pos_w) - np.asarray(ee_pos_w))


class DelayBuffer:
    """Per-env ring buffer of camera captures with per-episode latency.

    Stores up to ``depth`` captures of (t_capture, detected, xyz).  The
    query returns the newest capture with t_capture + L <= t_now; with no
    capture old enough the detected bit is 0 and the position zeros.
    """

    def __init__(self, num_envs: int, depth: int = 8):
        self.num_envs = num_envs
        self.depth = depth
        self.t_capture = np.full((num_envs, depth), -np.inf)
        self.detected = np.zeros((num_envs, depth), dtype=bool)
        self.xyz = np.zeros((num_envs, depth, 3))
        self.head = np.zeros(num_envs, dtype=np.int64)

    def reset(self, env_mask):
        self.t_capture[env_mask] = -np.inf
        self.detected[env_mask] = False
        self.xyz[env_mask] = 0.0
        self.head[env_mask] = 0

    def push(self, env_mask, t, detected, xyz):
        """Record a capture for the masked envs at their current head slot."""
        idx = np.nonzero(env_mask)[0]
        if idx.size == 0:
            return
        slots = self.head[idx] % self.depth
        self.t_capture[idx, slots] = np.asarray(t)[idx] if np.ndim(t) else t
        self.detected[idx, slots] = np.asarray(detected)[idx]
        self.xyz[idx, slots] = np.asarray(xyz)[idx]
        self.head[idx] += 1

    def query(self, t_now, latency):
        """Latest capture per env satisfying t_capture + L <= t_now.

        Returns (detected, xyz, age); undelivered envs get detected=0,
        zeros, and age=inf.
        """
        t_now = np.broadcast_to(np.asarray(t_now, dtype=float), (self.num_envs,))
        latency = np.broadcast_to(np.asarray(latency, dtype=float), (self.num_envs,))
        avail = self.t_capture + latency[:, None] <= t_now[:, None] + 1e-12
        t_masked = np.where(avail, self.t_capture, -np.inf)
        best = np.argmax(t_masked, axis=1)
        rows = np.arange(self.num_envs)
        has = np.isfinite(t_masked[rows, best])
        detected = self.detected[rows, best] & has
        xyz = np.where(detected[:, None], self.xyz[rows, best], 0.0)
        age = np.where(has, t_now - self.t_capture[rows, best], np.inf)
        return detected, xyz, age


def build_observation(joint_pos, joint_vel, nominal_pose, omega_body,
                      base_quat, prev_action, target_rel, detected, v_cmd,
                      cfg: PerceptionConfig, height_hint=None):
    """Assemble the flat observation vector in the documented order.

    detected=0 zeroes the target slot.  The hint column exists only when
    ``cfg.height_hint`` is set; passing a hint while disabled (or vice
    versa) is a configuration error.
    """
    if cfg.height_hint != (height_hint is not None):
        raise ValueError("height hint flag and hint value must agree")
    n = np.shape(joint_pos)[0]
    gravity_b = quat_rotate_inv(base_quat, np.broadcast_to(np.array([0.0, 0.0, -1.0]),
                                                           (n, 3)))
    det = np.asarray(detected, dtype=bool)
    target = np.clip(np.asarray(target_rel, dtype=float), -TARGET_CLIP, TARGET_CLIP)
    target = np.where(det[:, None], target, 0.0)
    cols = [
        np.asarray(joint_pos) - np.asarray(nominal_pose),
        np.asarray(joint_vel) * JOINT_VEL_SCALE,
        np.asarray(omega_body) * ANG_VEL_SCALE,
        gravity_b,
        np.asarray(prev_action, dtype=float),
        target,
        det[:, None].astype(float),
        np.broadcast_to(np.asarray(v_cmd, dtype=float)[..., None], (n, 1)),
    ]
    if height_hint is not None:
        cols.append(np.broadcast_to(np.asarray(height_hint, dtype=float)[..., None], (n, 1)))
    obs = np.concatenate(cols, axis=-1)
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite observation")
    return obs


def observation_dim(cfg: PerceptionConfig) -> int:
    return OBS_DIM + (1 if cfg.height_hint else 0)
