"""Batched run-and-catch environment.

One instance simulates ``num_envs`` independent episodes in lock-step with
vectorized numpy state.  Each control step (50 Hz by default) runs several
physics substeps: joint PD torques -> decoupled joint integration -> leg
forward kinematics -> ground contact forces -> base wrench -> base and ball
integration -> catch bookkeeping -> camera captures.  Episodes auto-reset;
step() reports per-env terminal status in its info dict.

All randomness flows through explicitly seeded generators: per-episode
configuration is a pure function of (seed, episode counter), and capture
noise comes from a single per-instance stream consumed in a fixed order.
"""

from __future__ import annotations

import numpy as np

from . import ball as ballmod
from . import dynamics, perception, rewards
from .config import FullConfig
from .rotations import (quat_identity, quat_rotate, quat_to_euler)


class EpisodeSampler:
    """Per-episode randomization, fully determined by (seed, episode counter).

    ``height_fn(rng)`` may be supplied (e.g. by the curriculum) and must
    return (height, bin_index); otherwise ``fixed_height`` is used.
    """

    def __init__(self, cfg: FullConfig, seed: int, fixed_height=0.30,
                 height_fn=None, noise_amplitude=None, latency_range=None,
                 distance_range=None):
        self.cfg = cfg
        self.seed = seed
        self.fixed_height = fixed_height
        self.height_fn = height_fn
        # trainer may override per-iteration (spawn-distance curriculum)
        self.distance_range = distance_range
        self.lateral_range = None
        self.noise_amplitude = (cfg.perception.noise_amplitude
                                if noise_amplitude is None else noise_amplitude)
        if self.noise_amplitude < 0.0:
            raise ValueError("noise amplitude must be >= 0")
        self.latency_range = (cfg.perception.latency_range
                              if latency_range is None else latency_range)
        lo, hi = self.latency_range
        if not 0.0 <= lo <= hi:
            raise ValueError("latency range must satisfy 0 <= lo <= hi")

    def __call__(self, counters: np.ndarray) -> dict:
        n = len(counters)
        ranges = self.cfg.train.ranges
        out = {
            "height": np.zeros(n), "height_bin": np.full(n, -1, dtype=np.int64),
            "distance": np.zeros(n), "lateral": np.zeros(n),
            "v_cmd": np.zeros(n), "latency": np.zeros(n),
            "noise_amp": np.full(n, float(self.noise_amplitude)),
            "tether_scale": np.ones(n),
        }
        lo_l, hi_l = self.latency_range
        for i, counter in enumerate(counters):
            rng = np.random.default_rng(
                np.random.SeedSequence((int(self.seed), int(counter))))
            if self.height_fn is not None:
                h, b = self.height_fn(rng)
                out["height"][i] = h
                out["height_bin"][i] = b
            else:
                out["height"][i] = self.fixed_height
            d_range = (self.distance_range if self.distance_range is not None
                       else ranges.spawn_distance_range)
            out["distance"][i] = rng.uniform(*d_range)
            l_range = (self.lateral_range if self.lateral_range is not None
                       else ranges.spawn_lateral_range)
            out["lateral"][i] = rng.uniform(*l_range)
            out["v_cmd"][i] = rng.uniform(*ranges.v_cmd_range)
            out["latency"][i] = rng.uniform(lo_l, hi_l)
        return out


class QuadrupedCatchEnv:
    """Vectorized reduced-order quadruped + hanging-ball environment."""

    NUM_JOINTS = 12
    NUM_LEGS = 4
    FRONT_LEGS = (0, 1)

    def __init__(self, cfg: FullConfig, num_envs: int, seed: int = 0,
                 sampler: EpisodeSampler | None = None):
        cfg.validate()
        if cfg.sim.substeps < 1:
            raise ValueError("substep count must be >= 1")
        self.cfg = cfg
        self.num_envs = num_envs
        self.sampler = sampler if sampler is not None else EpisodeSampler(cfg, seed)
        self.rng = np.random.default_rng(np.random.SeedSequence((int(seed), 0xC0FFEE)))

        sim = cfg.sim
        self.nominal_pose = np.tile(np.asarray(sim.nominal_pose), self.NUM_LEGS)
        self.limit_lo = np.tile(np.asarray(sim.joint.limit_lo), self.NUM_LEGS)
        self.limit_hi = np.tile(np.asarray(sim.joint.limit_hi), self.NUM_LEGS)
        self.inertia = sim.body.inertia()
        self.inertia_inv = np.linalg.inv(self.inertia)

        n = num_envs
        self.base_pos = np.zeros((n, 3))
        self.base_quat = quat_identity(n)
        self.base_vel = np.zeros((n, 3))
        self.base_omega = np.zeros((n, 3))
        self.q = np.zeros((n, 12))
        self.qd = np.zeros((n, 12))
        self.prev_foot_w = np.zeros((n, 4, 3))
        self.contact_anchor = np.zeros((n, 4, 2))
        self.ball_p = np.zeros((n, 3))
        self.ball_v = np.zeros((n, 3))
        self.anchor = np.zeros((n, 3))
        self.caught = np.zeros(n, dtype=bool)
        self.catch_counter = np.zeros(n, dtype=np.int64)
        self.t = np.zeros(n)
        self.prev_action = np.zeros((n, 12))
        self.front_air_time = np.zeros(n)
        self.front_attempt_open = np.zeros(n, dtype=bool)
        self.attempts = np.zeros(n, dtype=np.int64)
        self.stance_time = np.zeros(n)
        self.catch_time = np.full(n, np.nan)
        self.next_capture = np.zeros(n)
        self.invalid = np.zeros(n, dtype=bool)
        self.height = np.zeros(n)
        self.height_bin = np.full(n, -1, dtype=np.int64)
        self.v_cmd = np.zeros(n)
        self.latency = np.zeros(n)
        self.noise_amp = np.zeros(n)
        self.tether_scale = np.ones(n)
        self.buffer = perception.DelayBuffer(n)
        self.episode_counter = 0

    # -- resets ---------------------------------------------------------------

    def reset_all(self):
        self._reset_envs(np.ones(self.num_envs, dtype=bool))
        return self._observe()

    def _reset_envs(self, mask):
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            return
        counters = np.arange(self.episode_counter, self.episode_counter + idx.size)
        self.episode_counter += idx.size
        ep = self.sampler(counters)

        sim = self.cfg.sim
        stand_z = -dynamics.leg_forward_kinematics(
            np.asarray(sim.nominal_pose)[None, None, :], sim.legs)[0, 0, 2]
        self.base_pos[idx] = 0.0
        self.base_pos[idx, 2] = stand_z
        self.base_quat[idx] = 0.0
        self.base_quat[idx, 0] = 1.0
        self.base_vel[idx] = 0.0
        self.base_omega[idx] = 0.0
        self.q[idx] = self.nominal_pose
        self.qd[idx] = 0.0
        self.t[idx] = 0.0
        self.prev_action[idx] = 0.0
        self.caught[idx] = False
        self.catch_counter[idx] = 0
        self.front_air_time[idx] = 0.0
        self.front_attempt_open[idx] = False
        self.attempts[idx] = 0
        self.stance_time[idx] = 0.0
        self.catch_time[idx] = np.nan
        self.invalid[idx] = False
        self.height[idx] = ep["height"]
        self.height_bin[idx] = ep["height_bin"]
        self.v_cmd[idx] = ep["v_cmd"]
        self.latency[idx] = ep["latency"]
        self.noise_amp[idx] = ep["noise_amp"]
        self.tether_scale[idx] = ep["tether_scale"]
        self.anchor[idx, 0] = ep["distance"]
        self.anchor[idx, 1] = ep["lateral"]
        self.anchor[idx, 2] = ep["height"]
        self.ball_p[idx] = self.anchor[idx]
        self.ball_v[idx] = 0.0

        foot_b = dynamics.leg_forward_kinematics(self.q[idx].reshape(-1, 4, 3), sim.legs)
        self.prev_foot_w[idx] = (self.base_pos[idx, None, :]
                                 + quat_rotate(self.base_quat[idx, None, :], foot_b))
        self.contact_anchor[idx] = self.prev_foot_w[idx, :, :2]
        self.buffer.reset(mask)
        self.next_capture[idx] = self.cfg.perception.camera.period
        self._capture(mask)

    # -- perception -----------------------------------------------------------

    def _gripper(self):
        return dynamics.gripper_pose(self.base_pos, self.base_quat, self.base_vel,
                                     self.base_omega, self.cfg.sim.gripper)

    def _capture(self, mask):
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            return
        ee_pos, _ = self._gripper()
        visible = perception.fov_check(self.ball_p, self.base_pos, self.base_quat,
                                       self.cfg.perception.camera)
        rel = perception.target_in_ee_frame(self.ball_p, ee_pos, self.base_quat)
        noise = self.rng.uniform(-1.0, 1.0, size=(idx.size, 3)) * self.noise_amp[idx, None]
        measured = rel.copy()
        measured[idx] += noise
        self.buffer.push(mask, self.t, visible, measured)

    def _observe(self):
        ee_pos, _ = self._gripper()
        detected, target, _age = self.buffer.query(self.t, self.latency)
        pcfg = self.cfg.perception
        hint = self.height if pcfg.height_hint else None
        obs = perception.build_observation(
            self.q, self.qd, self.nominal_pose, self.base_omega, self.base_quat,
            self.prev_action, target, detected, self.v_cmd, pcfg, hint)
        true_rel = perception.target_in_ee_frame(self.ball_p, ee_pos, self.base_quat)
        ones = np.ones(self.num_envs, dtype=bool)
        priv = perception.build_observation(
            self.q, self.qd, self.nominal_pose, self.base_omega, self.base_quat,
            self.prev_action, true_rel, ones, self.v_cmd, pcfg, hint)
        return obs, priv

    # -- stepping -------------------------------------------------------------

    def step(self, action: np.ndarray):
        """Advance one control period.

        action: (num_envs, 12) in network-output units; joint targets are
        nominal_pose + action_scale * action, clipped to the joint limits.
        Returns (obs, priv_obs, RewardBreakdown, done, info).
        """
        action = np.asarray(action, dtype=float)
        if action.shape != (self.num_envs, 12):
            raise ValueError(f"action shape {action.shape} != ({self.num_envs}, 12)")
        if not np.all(np.isfinite(action)):
            raise dynamics.InvalidStateError("non-finite action")
        cfg = self.cfg
        sim = cfg.sim
        dt = sim.physics_dt
        q_target = np.clip(self.nominal_pose + cfg.train.action_scale * action,
                           self.limit_lo, self.limit_hi)

        catch_event = np.zeros(self.num_envs, dtype=bool)
        power_sum = np.zeros(self.num_envs)
        torques = np.zeros((self.num_envs, 12))
        contact_flags = np.zeros((self.num_envs, 4), dtype=bool)

        from .rotations import quat_rotate_inv

        for _ in range(sim.substeps):
            foot_b = dynamics.leg_forward_kinematics(self.q.reshape(-1, 4, 3), sim.legs)
            foot_w = self.base_pos[:, None, :] + quat_rotate(self.base_quat[:, None, :], foot_b)
            foot_vel_w = (foot_w - self.prev_foot_w) / dt
            f_contact, self.contact_anchor = dynamics.contact_force_stick(
                foot_w, foot_vel_w, self.contact_anchor, sim.contact)
            contact_flags = f_contact[..., 2] > 0.0

            # tangential contact reaction mapped onto the leg joints: a foot
            # held by friction stalls its leg instead of plowing sideways
            f_tan_w = f_contact.copy()
            f_tan_w[..., 2] = 0.0
            f_tan_b = quat_rotate_inv(self.base_quat[:, None, :], f_tan_w)
            jac = dynamics.leg_jacobian(self.q.reshape(-1, 4, 3), sim.legs)
            tau_react = np.einsum('nlij,nli->nlj', jac, f_tan_b).reshape(-1, 12)

            torques = dynamics.pd_torque(q_target, self.q, self.qd,
                                         sim.actuator.kp, sim.actuator.kd,
                                         sim.joint.torque_limit)
            self.q, self.qd = dynamics.step_joint(
                self.q, self.qd, torques + tau_react, dt,
                sim.joint.reflected_inertia, sim.joint.viscous_friction,
                self.limit_lo, self.limit_hi)
            power_sum += np.sum(np.abs(torques * self.qd), axis=-1)
            foot_b = dynamics.leg_forward_kinematics(self.q.reshape(-1, 4, 3), sim.legs)

            ee_pos, ee_vel = self._gripper()
            f_grip = np.zeros((self.num_envs, 3))
            free = ~self.caught
            if np.any(free):
                f_on_gripper, f_on_ball = ballmod.grasp_force(
                    self.ball_p, self.ball_v, ee_pos, ee_vel, cfg.ball.grasp)
                f_grip = np.where(free[:, None], f_on_gripper, 0.0)
                f_ball = np.where(free[:, None], f_on_ball, 0.0)
            else:
                f_ball = np.zeros((self.num_envs, 3))

            # base wrench: contacts at the feet plus the grasp reaction at the mouth
            force_w = f_contact.sum(axis=1) + f_grip
            r_feet = foot_w - self.base_pos[:, None, :]
            torque_w = np.cross(r_feet, f_contact).sum(axis=1)
            torque_w += np.cross(ee_pos - self.base_pos, f_grip)
            torque_b = quat_rotate_inv(self.base_quat, torque_w)

            self.base_pos, self.base_quat, self.base_vel, self.base_omega = \
                dynamics.step_base(self.base_pos, self.base_quat, self.base_vel,
                                   self.base_omega, force_w, torque_b, dt,
                                   sim.body.mass, self.inertia, self.inertia_inv,
                                   sim.gravity)

            # free-ball dynamics: tether + grasp reaction + knock-away collisions
            f_ball = f_ball + ballmod.tether_force(
                self.ball_p, self.ball_v, self.anchor, cfg.ball.mass, sim.gravity,
                cfg.ball.tether, self.tether_scale[:, None])
            ball_p_new, ball_v_new = ballmod.step_ball(
                self.ball_p, self.ball_v, f_ball, dt, cfg.ball.mass, sim.gravity)
            ee_pos2, ee_vel2 = self._gripper()
            # inside the grasp basin the gripper's pull wins over body bumps
            in_basin = (np.linalg.norm(ball_p_new - ee_pos2, axis=-1)
                        < cfg.ball.grasp.assist_radius)
            v_body, p_body, _hit_base = ballmod.collide_ball_box(
                ball_p_new, ball_v_new, self.base_pos, self.base_quat,
                np.asarray(sim.body.box_size) / 2.0, self.base_vel,
                cfg.ball.radius, cfg.ball.restitution)
            keep_b = in_basin[:, None]
            ball_v_new = np.where(keep_b, ball_v_new, v_body)
            ball_p_new = np.where(keep_b, ball_p_new, p_body)
            in_mouth = ballmod.in_mouth_aperture(ball_p_new, ee_pos2, self.base_quat,
                                                 sim.gripper, cfg.ball.radius)
            v_knock, p_knock, _hit_grip = ballmod.collide_ball_box(
                ball_p_new, ball_v_new, ee_pos2, self.base_quat,
                sim.gripper.mouth_half_extents, ee_vel2,
                cfg.ball.radius, cfg.ball.restitution)
            keep = (in_mouth | in_basin)[:, None]
            ball_v_new = np.where(keep, ball_v_new, v_knock)
            ball_p_new = np.where(keep, ball_p_new, p_knock)

            # magnetic seating is inelastic: once the ball reaches the mouth
            # it moves with it (the confirmation counter still debounces)
            snap = (~self.caught) & (np.linalg.norm(
                ball_p_new - ee_pos2, axis=-1) < cfg.ball.grasp.capture_radius)
            ball_v_new = np.where(snap[:, None], ee_vel2, ball_v_new)

            # caught balls are welded to the mouth point
            self.ball_p = np.where(self.caught[:, None], ee_pos2, ball_p_new)
            self.ball_v = np.where(self.caught[:, None], ee_vel2, ball_v_new)

            self.catch_counter, self.caught, newly = ballmod.check_catch(
                self.catch_counter, self.ball_p, ee_pos2, cfg.ball.grasp, self.caught)
            catch_event |= newly
            self.catch_time = np.where(newly, self.t, self.catch_time)

            self.prev_foot_w = (self.base_pos[:, None, :]
                                + quat_rotate(self.base_quat[:, None, :], foot_b))
            self.t += dt

            # liftoff-attempt bookkeeping at substep resolution
            front_air = ~contact_flags[:, self.FRONT_LEGS[0]] & ~contact_flags[:, self.FRONT_LEGS[1]]
            self.front_air_time = np.where(front_air, self.front_air_time + dt, 0.0)
            new_attempt = front_air & ~self.front_attempt_open & \
                (self.front_air_time >= cfg.termination.liftoff_debounce)
            self.attempts += new_attempt
            self.front_attempt_open = np.where(front_air,
                                               self.front_attempt_open | new_attempt,
                                               False)

            capture_due = self.t >= self.next_capture - 1e-12
            if np.any(capture_due):
                self._capture(capture_due)
                self.next_capture = np.where(capture_due,
                                             self.next_capture + cfg.perception.camera.period,
                                             self.next_capture)

        # control-rate bookkeeping and rewards
        roll, pitch, yaw = quat_to_euler(self.base_quat)
        upright = (np.abs(roll) < 0.3) & (np.abs(pitch) < 0.3)
        standing = (self.prev_foot_w[:, :, 2]
                    < cfg.termination.stance_foot_clearance).all(axis=1)
        self.stance_time = np.where(standing & upright,
                                    self.stance_time + sim.control_dt, 0.0)

        self.invalid |= (np.abs(self.base_pos).max(axis=-1) > sim.safety_position_bound) \
            | (np.abs(self.base_vel).max(axis=-1) > sim.safety_velocity_bound) \
            | ~np.isfinite(self.base_pos).all(axis=-1)

        ee_pos, _ = self._gripper()
        r_goal, branch = rewards.tracking_goal_reward(
            self.base_pos, self.base_vel[:, :2], ee_pos, self.ball_p, self.v_cmd,
            cfg.reward)
        goal_dir = self.ball_p[:, :2] - self.base_pos[:, :2]
        yaw_goal = np.arctan2(goal_dir[:, 1], goal_dir[:, 0])
        r_yaw = rewards.tracking_yaw_reward(yaw_goal, yaw, cfg.reward.yaw_scale)
        mean_power = power_sum / sim.substeps
        r_reg = -(cfg.reward.energy_coeff * mean_power
                  + cfg.reward.action_rate_coeff
                  * np.sum((action - self.prev_action) ** 2, axis=-1)
                  + cfg.reward.ang_vel_coeff * np.sum(self.base_omega[:, :2] ** 2, axis=-1))
        r_catch = rewards.catch_bonus(catch_event, cfg.reward)
        breakdown = rewards.total_reward(r_goal, r_yaw, r_reg, r_catch, branch, cfg.reward)
        # long-range proximity shaping: a persistent pull toward the ball so
        # that parking short of it is never reward-neutral
        dist_ball = np.linalg.norm(self.ball_p - self.base_pos, axis=-1)
        breakdown.total = breakdown.total + (
            cfg.reward.approach_coeff
            * np.exp(-dist_ball / cfg.reward.approach_scale))

        status = rewards.terminate(roll, pitch, self.base_pos[:, 2], self.caught,
                                   self.stance_time, self.t, self.attempts,
                                   self.invalid, cfg.termination)
        done = status != rewards.RUNNING
        success = rewards.is_success(status, self.attempts, cfg.termination)
        breakdown.total = breakdown.total - cfg.reward.fall_penalty * (
            status == rewards.FELL)

        self.prev_action = action.copy()

        info = {
            "status": status,
            "success": success,
            "attempts": self.attempts.copy(),
            "height": self.height.copy(),
            "height_bin": self.height_bin.copy(),
            "caught": self.caught.copy(),
            "catch_event": catch_event,
            "catch_time": self.catch_time.copy(),
            "latency": self.latency.copy(),
            "contact_flags": contact_flags,
            "torques": torques,
            "mech_power": mean_power,
            "time": self.t.copy(),
            "ball_pos": self.ball_p.copy(),
            "base_pos": self.base_pos.copy(),
            "base_vel": self.base_vel.copy(),
            "rpy": np.stack([roll, pitch, yaw], axis=-1),
        }

        if np.any(done):
            self._reset_envs(done)
        obs, priv = self._observe()
        return obs, priv, breakdown, done, info
