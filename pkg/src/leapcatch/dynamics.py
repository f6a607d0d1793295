"""Reduced-order rigid-body and joint dynamics.

The robot is one rigid base with twelve decoupled, torque-limited PD joints.
Legs are massless: foot positions follow from forward kinematics of the leg
joints, and ground-contact forces computed at the feet are applied as an
external wrench on the base.  All functions are vectorized over leading batch
axes; a scalar call works the same way.
"""

from __future__ import annotations

import numpy as np

from .config import ContactParams, GripperFrame, LegGeometry
from .rotations import quat_rotate


class InvalidStateError(ValueError):
    """Raised when a dynamics routine receives non-finite state."""


def pd_torque(q_target, q, qdot, kp: float, kd: float, torque_limit: float):
    """Joint torque tau = clamp(kp*(q_target - q) - kd*qdot, +-torque_limit)."""
    q_target = np.asarray(q_target, dtype=float)
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    if not (np.all(np.isfinite(q_target)) and np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
        raise InvalidStateError("non-finite joint state passed to pd_torque")
    tau = kp * (q_target - q) - kd * qdot
    return np.clip(tau, -torque_limit, torque_limit)


def step_joint(q, qdot, tau, dt: float, inertia: float, viscous: float,
               limit_lo, limit_hi):
    """Semi-implicit Euler on one (batch of) decoupled joint(s).

    Joint limits are hard clamps; velocity pointing into an active limit is
    zeroed.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot)) and np.all(np.isfinite(tau))):
        raise InvalidStateError("non-finite joint state passed to step_joint")
    qdot_new = qdot + dt * (tau - viscous * qdot) / inertia
    q_new = q + dt * qdot_new
    at_lo = q_new < limit_lo
    at_hi = q_new > limit_hi
    q_new = np.clip(q_new, limit_lo, limit_hi)
    qdot_new = np.where(at_lo & (qdot_new < 0.0), 0.0, qdot_new)
    qdot_new = np.where(at_hi & (qdot_new > 0.0), 0.0, qdot_new)
    return q_new, qdot_new


def leg_forward_kinematics(angles: np.ndarray, geom: LegGeometry) -> np.ndarray:
    """Foot positions in the base frame.

    angles: (..., 4, 3) per leg (abduction about x, hip pitch about y,
    knee pitch about y).  Zero configuration points both links straight down.
    Returns (..., 4, 3).
    """
    angles = np.asarray(angles, dtype=float)
    q0 = angles[..., 0]
    q1 = angles[..., 1]
    q2 = angles[..., 2]
    l1, l2 = geom.l1, geom.l2
    # in the abduction frame: link 1 rotated by q1 about y, link 2 by q1+q2
    x = -np.sin(q1) * l1 - np.sin(q1 + q2) * l2
    z = -np.cos(q1) * l1 - np.cos(q1 + q2) * l2
    # abduction rolls the (0, y, z) components about the x axis
    c0, s0 = np.cos(q0), np.sin(q0)
    foot = np.stack([x, -s0 * z, c0 * z], axis=-1)
    return geom.hip_offsets_array + foot


def leg_jacobian(angles: np.ndarray, geom: LegGeometry) -> np.ndarray:
    """Foot-position Jacobian d(foot)/d(q) in the base frame.

    angles: (..., 4, 3); returns (..., 4, 3, 3) with rows x,y,z and columns
    abduction, hip pitch, knee pitch.
    """
    angles = np.asarray(angles, dtype=float)
    q0 = angles[..., 0]
    q1 = angles[..., 1]
    q2 = angles[..., 2]
    l1, l2 = geom.l1, geom.l2
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    s0, c0 = np.sin(q0), np.cos(q0)
    x = -s1 * l1 - s12 * l2
    z = -c1 * l1 - c12 * l2
    zero = np.zeros_like(q0)
    row_x = np.stack([zero, z, -c12 * l2], axis=-1)
    row_y = np.stack([-c0 * z, s0 * x, -s0 * s12 * l2], axis=-1)
    row_z = np.stack([-s0 * z, -c0 * x, c0 * s12 * l2], axis=-1)
    return np.stack([row_x, row_y, row_z], axis=-2)


def contact_force(foot_pos_w: np.ndarray, foot_vel_w: np.ndarray,
                  params: ContactParams) -> np.ndarray:
    """Compliant unilateral ground contact force in the world frame.

    Normal: spring-damper, clamped to be non-negative.  Tangential: viscous
    opposition to the foot's horizontal velocity, clamped to the friction
    cone |F_t| <= mu * F_n.
    """
    foot_pos_w = np.asarray(foot_pos_w, dtype=float)
    foot_vel_w = np.asarray(foot_vel_w, dtype=float)
    penetration = params.ground_height - foot_pos_w[..., 2]
    in_contact = penetration > 0.0
    fn = np.maximum(0.0, params.stiffness * penetration - params.damping * foot_vel_w[..., 2])
    fn = np.where(in_contact, fn, 0.0)
    ft = -params.tangential_damping * foot_vel_w[..., :2]
    ft_norm = np.linalg.norm(ft, axis=-1, keepdims=True)
    cone = params.friction_coeff * fn[..., None]
    scale = np.where(ft_norm > cone, cone / np.maximum(ft_norm, 1e-12), 1.0)
    ft = ft * scale * in_contact[..., None]
    return np.concatenate([ft, fn[..., None]], axis=-1)


def contact_force_stick(foot_pos_w: np.ndarray, foot_vel_w: np.ndarray,
                        anchor_xy: np.ndarray, params: ContactParams):
    """Ground contact with penalty stiction; returns (force, new anchor).

    The normal component matches :func:`contact_force`.  Tangentially each
    foot drags a spring anchored where it touched down; inside the friction
    cone the foot sticks, and when the spring-damper force saturates the
    cone the anchor slides along so the stretch stays consistent with the
    clamped force (Coulomb slip).  Airborne feet re-anchor under their
    current position.  A purely viscous tangential model would let loaded
    feet creep continuously; the resulting friction force below the center
    of mass acts as a destabilizing roll/pitch moment, which stiction
    removes.
    """
    foot_pos_w = np.asarray(foot_pos_w, dtype=float)
    foot_vel_w = np.asarray(foot_vel_w, dtype=float)
    penetration = params.ground_height - foot_pos_w[..., 2]
    in_contact = penetration > 0.0
    fn = np.maximum(0.0, params.stiffness * penetration
                    - params.damping * foot_vel_w[..., 2])
    fn = np.where(in_contact, fn, 0.0)

    stretch = foot_pos_w[..., :2] - anchor_xy
    ft = (-params.tangential_stiffness * stretch
          - params.tangential_damping * foot_vel_w[..., :2])
    ft_norm = np.linalg.norm(ft, axis=-1, keepdims=True)
    cone = params.friction_coeff * fn[..., None]
    scale = np.where(ft_norm > cone, cone / np.maximum(ft_norm, 1e-12), 1.0)
    ft = ft * scale * in_contact[..., None]

    k = max(params.tangential_stiffness, 1e-12)
    slid_anchor = foot_pos_w[..., :2] + ft / k
    new_anchor = np.where(in_contact[..., None],
                          np.where(scale < 1.0, slid_anchor, anchor_xy),
                          foot_pos_w[..., :2])
    return np.concatenate([ft, fn[..., None]], axis=-1), new_anchor


def step_base(pos, quat, vel, omega_body, force_w, torque_body, dt: float,
              mass: float, inertia: np.ndarray, inertia_inv: np.ndarray,
              gravity: float):
    """Semi-implicit Euler for the floating base.

    force_w excludes gravity; torque_body is in the body frame.  Returns
    (pos, quat, vel, omega_body) with the quaternion renormalized.
    """
    from .rotations import quat_integrate

    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    acc = force_w / mass
    acc = acc - np.array([0.0, 0.0, gravity])
    vel_new = vel + dt * acc
    pos_new = pos + dt * vel_new
    # Euler's equation with gyroscopic term
    l_body = omega_body @ inertia.T
    omega_dot = (torque_body - np.cross(omega_body, l_body)) @ inertia_inv.T
    omega_new = omega_body + dt * omega_dot
    quat_new = quat_integrate(quat, omega_new, dt)
    return pos_new, quat_new, vel_new, omega_new


def gripper_pose(pos, quat, vel, omega_body, frame: GripperFrame):
    """World position and velocity of the gripper mouth center point."""
    r_w = quat_rotate(quat, np.broadcast_to(frame.offset_array, pos.shape))
    p = pos + r_w
    omega_w = quat_rotate(quat, omega_body)
    v = vel + np.cross(omega_w, r_w)
    return p, v
