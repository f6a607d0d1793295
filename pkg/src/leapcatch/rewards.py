"""Reward terms, episode termination and the success criterion.

The goal-tracking reward switches between a velocity-tracking branch far
from the target and an exponential position branch near it (with a +1
offset so the position branch dominates), plus a yaw-facing term, negative
regularization, and a one-shot catch bonus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RewardConfig, TerminationConfig
from .rotations import wrap_angle

# episode status codes
RUNNING = 0
FELL = 1
CAUGHT_LANDED = 2
TIMEOUT = 3
INVALID = 4

STATUS_NAMES = {
    RUNNING: "running",
    FELL: "fell",
    CAUGHT_LANDED: "caught_landed",
    TIMEOUT: "timeout",
    INVALID: "invalid",
}

BRANCH_VELOCITY = 0
BRANCH_POSITION = 1


@dataclass
class RewardBreakdown:
    r_goal: np.ndarray
    r_yaw: np.ndarray
    r_reg: np.ndarray
    r_catch: np.ndarray
    total: np.ndarray
    branch: np.ndarray  # BRANCH_VELOCITY / BRANCH_POSITION per env


def tracking_goal_reward(base_pos, base_vel_xy, ee_pos, ball_pos, v_cmd,
                         cfg: RewardConfig):
    """Switched goal reward.

    Far branch (d_xy > D, d_xy the end-effector/ball xy distance):
    r_vel = min(<v_xy, d_hat>, v_cmd) with d_hat the unit xy direction from
    the base to the goal.  Near branch: r_pos = exp(-||p - x|| / alpha) + 1
    on the full 3D base-to-goal distance.  Returns (reward, branch).
    """
    base_pos = np.asarray(base_pos, dtype=float)
    ball_pos = np.asarray(ball_pos, dtype=float)
    ee_pos = np.asarray(ee_pos, dtype=float)
    d_xy = np.linalg.norm(ball_pos[..., :2] - ee_pos[..., :2], axis=-1)
    goal_dir = ball_pos[..., :2] - base_pos[..., :2]
    dir_norm = np.linalg.norm(goal_dir, axis=-1, keepdims=True)
    # goal straight above the base in xy: direction defined as zero
    d_hat = np.where(dir_norm > 1e-9, goal_dir / np.maximum(dir_norm, 1e-9), 0.0)
    r_vel = np.minimum(np.sum(np.asarray(base_vel_xy, dtype=float) * d_hat, axis=-1),
                       v_cmd)
    dist3 = np.linalg.norm(ball_pos - base_pos, axis=-1)
    r_pos = np.exp(-dist3 / cfg.position_scale) + 1.0
    near = d_xy <= cfg.switch_distance
    reward = np.where(near, r_pos, r_vel)
    branch = np.where(near, BRANCH_POSITION, BRANCH_VELOCITY)
    return reward, branch


def tracking_yaw_reward(yaw_goal, yaw, sigma: float):
    """exp(-|wrap(yaw_goal - yaw)| / sigma), in (0, 1]."""
    err = np.abs(wrap_angle(np.asarray(yaw_goal) - np.asarray(yaw)))
    return np.exp(-err / sigma)


def regularization(torques, joint_vels, action, prev_action, omega_body,
                   cfg: RewardConfig):
    """Non-positive penalty: mechanical power + action rate + base xy spin."""
    power = np.sum(np.abs(np.asarray(torques) * np.asarray(joint_vels)), axis=-1)
    rate = np.sum((np.asarray(action) - np.asarray(prev_action)) ** 2, axis=-1)
    spin = np.sum(np.asarray(omega_body)[..., :2] ** 2, axis=-1)
    return -(cfg.energy_coeff * power + cfg.action_rate_coeff * rate
             + cfg.ang_vel_coeff * spin)


def catch_bonus(catch_event, cfg: RewardConfig):
    """w_catch on the step a catch event fires, else 0."""
    return np.where(np.asarray(catch_event, dtype=bool), cfg.w_catch, 0.0)


def total_reward(r_goal, r_yaw, r_reg, r_catch_raw, branch, cfg: RewardConfig):
    total = (cfg.w_goal * r_goal + cfg.w_yaw * r_yaw + cfg.w_reg * r_reg
             + r_catch_raw)
    return RewardBreakdown(r_goal=r_goal, r_yaw=r_yaw, r_reg=r_reg,
                           r_catch=r_catch_raw, total=total, branch=branch)


def terminate(roll, pitch, base_height, caught, stable_stance_time, t,
              liftoff_attempts, invalid, cfg: TerminationConfig):
    """Per-env episode status.

    fell: excessive tilt or collapsed base.  caught_landed: ball caught and
    the robot back in a stable upright stance for the hold time.  timeout at
    the horizon.  ``liftoff_attempts`` is reported so the success judgment
    (catch within three front-leg liftoffs) can be applied by callers.
    """
    fell = (np.abs(roll) > cfg.max_roll_pitch) | (np.abs(pitch) > cfg.max_roll_pitch) \
        | (base_height < cfg.min_base_height)
    landed = caught & (stable_stance_time >= cfg.landed_hold_time)
    timeout = t >= cfg.episode_length
    status = np.full(np.shape(fell), RUNNING, dtype=np.int64)
    status = np.where(timeout, TIMEOUT, status)
    status = np.where(landed, CAUGHT_LANDED, status)
    status = np.where(fell, FELL, status)
    status = np.where(invalid, INVALID, status)
    return status


def is_success(status, liftoff_attempts, cfg: TerminationConfig):
    """Success: caught and landed, within the liftoff-attempt budget."""
    return (np.asarray(status) == CAUGHT_LANDED) & \
        (np.asarray(liftoff_attempts) <= cfg.max_liftoff_attempts)
