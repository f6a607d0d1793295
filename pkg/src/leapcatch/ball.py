"""Hanging-ball dynamics: tether return controller, grasp attachment,
robot-ball collision and catch detection.

The ball "hangs" from a virtual tether: a PD force pulls it back to its
anchor and cancels gravity there, so the rest point is exactly the anchor.
Once the ball sits inside the grasp capture radius for a few consecutive
substeps it is welded to the gripper frame for the rest of the episode.
"""

from __future__ import annotations

import numpy as np

from .config import BallConfig, GraspConfig, GripperFrame, TetherConfig
from .rotations import quat_rotate_inv


def grasp_force(p_ball, v_ball, p_gripper, v_gripper, cfg: GraspConfig):
    """Mutual PD force pair between ball and gripper.

    Returns (force_on_gripper, force_on_ball); the pair is an exact
    action-reaction pair, and both vanish outside the assist radius — the
    attraction basin within which the gripper pulls the ball toward the
    mouth point.  A catch is only confirmed later, inside the (smaller)
    capture radius.
    """
    p_ball = np.asarray(p_ball, dtype=float)
    p_gripper = np.asarray(p_gripper, dtype=float)
    err = p_ball - p_gripper
    verr = np.asarray(v_ball, dtype=float) - np.asarray(v_gripper, dtype=float)
    inside = np.linalg.norm(err, axis=-1, keepdims=True) < cfg.assist_radius
    f_gripper = (cfg.kp * err - cfg.kd * verr) * inside
    return f_gripper, -f_gripper


def tether_force(p_ball, v_ball, anchor, mass: float, gravity: float,
                 cfg: TetherConfig, stiffness_scale=1.0):
    """Return-to-anchor PD force, including gravity compensation."""
    k = cfg.stiffness * cfg.stiffness_decay * stiffness_scale
    f = k * (np.asarray(anchor, dtype=float) - np.asarray(p_ball, dtype=float))
    f = f - cfg.damping * np.asarray(v_ball, dtype=float)
    f = f + np.array([0.0, 0.0, mass * gravity])
    return f


def _closest_point_in_box(local_p, half_extents):
    return np.clip(local_p, -np.asarray(half_extents), np.asarray(half_extents))


def collide_ball_box(p_ball, v_ball, box_center_w, box_quat, half_extents,
                     box_vel_w, radius: float, restitution: float):
    """Sphere-vs-oriented-box collision, resolved as an impulse on the ball.

    Returns (new_v_ball, corrected_p_ball, hit_mask).  The box is treated as
    infinitely massive; the normal component of the relative velocity is
    reflected with the given restitution and the sphere is pushed out to the
    surface.
    """
    p_ball = np.asarray(p_ball, dtype=float)
    v_ball = np.asarray(v_ball, dtype=float)
    local = quat_rotate_inv(box_quat, p_ball - box_center_w)
    closest = _closest_point_in_box(local, half_extents)
    delta = local - closest
    dist = np.linalg.norm(delta, axis=-1)
    inside_box = dist < 1e-12
    hit = (dist < radius) & ~inside_box
    # degenerate center-inside-box case: push out along z
    hit_any = hit | ((dist < radius) & inside_box)
    normal_local = np.where(
        inside_box[..., None],
        np.broadcast_to(np.array([0.0, 0.0, 1.0]), delta.shape),
        delta / np.maximum(dist, 1e-12)[..., None],
    )
    from .rotations import quat_rotate

    normal_w = quat_rotate(box_quat, normal_local)
    rel_v = v_ball - np.asarray(box_vel_w, dtype=float)
    vn = np.sum(rel_v * normal_w, axis=-1)
    approaching = vn < 0.0
    dv = -(1.0 + restitution) * vn * approaching
    v_new = v_ball + (hit_any & approaching)[..., None] * dv[..., None] * normal_w
    pen = np.maximum(0.0, radius - dist)
    p_new = p_ball + hit_any[..., None] * pen[..., None] * normal_w
    return v_new, p_new, hit_any


def in_mouth_aperture(p_ball, gripper_pos_w, base_quat, frame: GripperFrame,
                      radius: float):
    """True when the ball center sits in the frontal capture corridor of the
    mouth, where contact is handled by the grasp controller instead of the
    knock-away collision."""
    local = quat_rotate_inv(base_quat, np.asarray(p_ball, dtype=float) - gripper_pos_w)
    hx, hy, hz = frame.mouth_half_extents
    # corridor extends forward of the mouth by one ball radius
    ok_x = (local[..., 0] > -hx) & (local[..., 0] < hx + 2.0 * radius)
    ok_y = np.abs(local[..., 1]) < hy + radius
    ok_z = np.abs(local[..., 2]) < hz + radius
    return ok_x & ok_y & ok_z


def check_catch(catch_counter, p_ball, p_gripper, cfg: GraspConfig, caught):
    """Update the consecutive-proximity counter; returns (counter, caught,
    catch_event).  A catch fires when the ball stays inside the capture
    radius for ``catch_persistence`` consecutive substeps; the flag is
    monotone within an episode."""
    dist = np.linalg.norm(np.asarray(p_ball) - np.asarray(p_gripper), axis=-1)
    inside = dist < cfg.capture_radius
    counter = np.where(inside, catch_counter + 1, 0)
    newly = (~caught) & (counter >= cfg.catch_persistence)
    return counter, caught | newly, newly


def step_ball(p_ball, v_ball, force, dt: float, mass: float, gravity: float):
    """Semi-implicit Euler for the free ball. Gravity is included here;
    callers pass tether/grasp/contact forces only."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    acc = np.asarray(force, dtype=float) / mass - np.array([0.0, 0.0, gravity])
    v_new = np.asarray(v_ball, dtype=float) + dt * acc
    p_new = np.asarray(p_ball, dtype=float) + dt * v_new
    return p_new, v_new


def ball_defaults(cfg: BallConfig):
    return dict(radius=cfg.radius, mass=cfg.mass, restitution=cfg.restitution)
