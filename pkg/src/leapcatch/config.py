"""Configuration schema for the simulator, rewards, perception and training.

All quantities are SI (meters, seconds, kilograms, Newtons, radians).  The
on-disk format is YAML with one top-level section per dataclass below; any
omitted key falls back to the default.  ``load_config`` / ``save_config``
round-trip the full tree, and ``config_fingerprint`` hashes the resolved
values so reports can pin the exact configuration they were produced with.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

CONFIG_SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


@dataclass
class ActuatorConfig:
    """PD gains of the joint-level controller, torque in Nm."""

    kp: float = 35.0
    kd: float = 0.6

    def validate(self):
        if not (self.kp > 0.0 and self.kd >= 0.0):
            raise ConfigError(f"bad actuator gains kp={self.kp} kd={self.kd}")


@dataclass
class JointConfig:
    reflected_inertia: float = 0.02  # kg m^2
    viscous_friction: float = 0.01  # Nm s/rad
    torque_limit: float = 30.0  # Nm
    # limits per leg-local joint (abduction, hip pitch, knee pitch)
    limit_lo: tuple = (-0.9, -1.6, -2.8)
    limit_hi: tuple = (0.9, 2.6, 0.6)

    def validate(self):
        if self.reflected_inertia <= 0.0:
            raise ConfigError("joint reflected inertia must be > 0")
        if self.torque_limit <= 0.0:
            raise ConfigError("torque limit must be > 0")


@dataclass
class LegGeometry:
    """3-DoF leg: hip abduction (x axis), hip pitch (y), knee pitch (y)."""

    l1: float = 0.21
    l2: float = 0.21
    # hip offsets from base origin, order FL, FR, RL, RR
    hip_offsets: tuple = (
        (0.22, 0.13, 0.0),
        (0.22, -0.13, 0.0),
        (-0.22, 0.13, 0.0),
        (-0.22, -0.13, 0.0),
    )

    def validate(self):
        if self.l1 <= 0.0 or self.l2 <= 0.0:
            raise ConfigError("link lengths must be > 0")

    @property
    def hip_offsets_array(self) -> np.ndarray:
        return np.asarray(self.hip_offsets, dtype=float)


@dataclass
class BodyConfig:
    mass: float = 15.0  # kg
    # box collision shape, full extents (m)
    box_size: tuple = (0.70, 0.31, 0.30)
    standing_height: float = 0.30

    def validate(self):
        if self.mass <= 0.0:
            raise ConfigError("mass must be > 0")

    def inertia(self) -> np.ndarray:
        lx, ly, lz = self.box_size
        m = self.mass
        return np.diag(
            [
                m / 12.0 * (ly * ly + lz * lz),
                m / 12.0 * (lx * lx + lz * lz),
                m / 12.0 * (lx * lx + ly * ly),
            ]
        )


@dataclass
class ContactParams:
    stiffness: float = 20000.0  # N/m
    damping: float = 300.0  # N s/m
    friction_coeff: float = 0.8
    tangential_damping: float = 100.0  # N s/m, clamped to the friction cone
    tangential_stiffness: float = 4000.0  # N/m, anchor spring emulating stiction
    ground_height: float = 0.0

    def validate(self):
        if self.stiffness <= 0.0 or self.damping < 0.0 or self.friction_coeff < 0.0:
            raise ConfigError("bad contact parameters")
        if self.tangential_stiffness < 0.0 or self.tangential_damping < 0.0:
            raise ConfigError("bad contact parameters")


@dataclass
class GripperFrame:
    """Mouth frame rigidly attached to the front of the base."""

    offset: tuple = (0.40, 0.0, 0.0)
    # mouth half extents (depth along +x, half width, half height)
    mouth_half_extents: tuple = (0.04, 0.025, 0.025)

    def validate(self):
        _, hy, hz = self.mouth_half_extents
        if 4.0 * hy * hz > 25e-4 + 1e-12:
            raise ConfigError("mouth aperture exceeds 25 cm^2")

    @property
    def offset_array(self) -> np.ndarray:
        return np.asarray(self.offset, dtype=float)


@dataclass
class SimConfig:
    physics_dt: float = 0.005
    substeps: int = 4  # per control step; control period = substeps * physics_dt
    gravity: float = 9.81
    # standing nominal pose per leg (abduction, hip pitch, knee pitch)
    nominal_pose: tuple = (0.0, 0.78, -1.56)
    safety_position_bound: float = 50.0
    safety_velocity_bound: float = 50.0
    actuator: ActuatorConfig = field(default_factory=ActuatorConfig)
    joint: JointConfig = field(default_factory=JointConfig)
    legs: LegGeometry = field(default_factory=LegGeometry)
    body: BodyConfig = field(default_factory=BodyConfig)
    contact: ContactParams = field(default_factory=ContactParams)
    gripper: GripperFrame = field(default_factory=GripperFrame)

    @property
    def control_dt(self) -> float:
        return self.physics_dt * self.substeps

    def validate(self):
        if self.physics_dt <= 0.0:
            raise ConfigError("physics_dt must be > 0")
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1")
        for sub in (self.actuator, self.joint, self.legs, self.body, self.contact, self.gripper):
            sub.validate()


@dataclass
class GraspConfig:
    kp: float = 150.0  # N/m
    kd: float = 2.0  # N s/m
    capture_radius: float = 0.03  # m, catch-confirmation threshold
    assist_radius: float = 0.10  # m, attraction basin of the grasp PD force
    catch_persistence: int = 5  # consecutive substeps inside the radius

    def validate(self):
        if min(self.kp, self.kd, self.capture_radius) <= 0.0:
            raise ConfigError("grasp parameters must be positive")
        if self.assist_radius < self.capture_radius:
            raise ConfigError("assist radius must cover the capture radius")


@dataclass
class TetherConfig:
    stiffness: float = 8.0  # N/m
    damping: float = 0.9  # N s/m
    # multiplicative stiffness decay applied by the trainer as difficulty rises
    stiffness_decay: float = 1.0

    def validate(self):
        if self.stiffness < 0.0 or self.damping < 0.0:
            raise ConfigError("tether gains must be >= 0")


@dataclass
class BallConfig:
    radius: float = 0.025
    mass: float = 0.05
    restitution: float = 0.6
    grasp: GraspConfig = field(default_factory=GraspConfig)
    tether: TetherConfig = field(default_factory=TetherConfig)

    def validate(self):
        if not (0.0 < self.radius <= 0.025):
            raise ConfigError("ball radius must lie in (0, 0.025]")
        if self.mass <= 0.0:
            raise ConfigError("ball mass must be > 0")
        self.grasp.validate()
        self.tether.validate()


@dataclass
class RewardConfig:
    switch_distance: float = 1.0  # m, velocity->position branch threshold
    position_scale: float = 0.2  # m
    yaw_scale: float = 0.5  # rad
    w_goal: float = 1.0
    w_yaw: float = 0.5
    w_reg: float = 1.0
    w_catch: float = 100.0
    energy_coeff: float = 0.002
    action_rate_coeff: float = 0.01
    ang_vel_coeff: float = 0.02
    fall_penalty: float = 30.0  # one-time penalty on a fall termination
    approach_coeff: float = 1.5  # weight of the always-on proximity shaping
    approach_scale: float = 0.7  # m, length scale of the proximity shaping

    def validate(self):
        if min(self.switch_distance, self.position_scale, self.yaw_scale) <= 0.0:
            raise ConfigError("reward scales must be > 0")
        if min(self.w_goal, self.w_yaw, self.w_reg, self.w_catch) < 0.0:
            raise ConfigError("reward weights must be >= 0")
        if self.fall_penalty < 0.0:
            raise ConfigError("fall penalty must be >= 0")
        if self.approach_coeff < 0.0 or self.approach_scale <= 0.0:
            raise ConfigError("approach shaping needs coeff >= 0 and scale > 0")


@dataclass
class TerminationConfig:
    max_roll_pitch: float = 1.0  # rad
    min_base_height: float = 0.12  # m
    landed_hold_time: float = 0.5  # s of stable stance after a catch
    max_liftoff_attempts: int = 3
    episode_length: float = 8.0  # s
    # both front feet airborne at least this long to count one attempt
    liftoff_debounce: float = 0.12  # s
    # feet within this height of the ground count as standing; tolerates
    # single-substep contact flicker from the penalty-spring ground model
    stance_foot_clearance: float = 0.01  # m


@dataclass
class CameraConfig:
    """Virtual camera used for field-of-view gating during training."""

    offset: tuple = (-0.15, 0.0, 0.10)  # from base origin, rear mounted
    pitch_up: float = 0.26  # rad, optical axis elevation above +x
    h_half_fov: float = 0.76  # rad (~87 deg full)
    v_half_fov: float = 0.51  # rad (~58 deg full)
    period: float = 1.0 / 30.0

    def validate(self):
        if not (0.0 < self.h_half_fov < np.pi / 2 and 0.0 < self.v_half_fov < np.pi / 2):
            raise ConfigError("FoV half angles must lie in (0, pi/2)")
        if self.period <= 0.0:
            raise ConfigError("camera period must be > 0")


@dataclass
class PerceptionConfig:
    camera: CameraConfig = field(default_factory=CameraConfig)
    latency_range: tuple = (0.03, 0.08)  # s, sampled uniformly per episode
    noise_amplitude: float = 0.02  # m, uniform per axis at capture time
    height_hint: bool = False
    # critic sees the true, delay-free target position
    privileged_critic: bool = True

    def validate(self):
        lo, hi = self.latency_range
        if not (0.0 <= lo <= hi):
            raise ConfigError("latency range must satisfy 0 <= lo <= hi")
        if self.noise_amplitude < 0.0:
            raise ConfigError("noise amplitude must be >= 0")
        self.camera.validate()


@dataclass
class EpisodeRanges:
    """Per-episode randomization ranges used when sampling EpisodeConfig."""

    v_cmd_range: tuple = (1.0, 2.0)
    spawn_distance_range: tuple = (1.5, 3.0)
    spawn_lateral_range: tuple = (-0.5, 0.5)


@dataclass
class CurriculumConfig:
    h_min: float = 0.30
    bin_width: float = 0.05
    initial_bins: int = 1
    promote_threshold: float = 0.6
    promote_patience: int = 3  # consecutive checks above threshold
    top_bin_share: float = 0.5
    ema_alpha: float = 0.05
    weight_floor: float = 0.05
    h_max_cap: float = 1.05

    def validate(self):
        if self.bin_width <= 0.0 or self.initial_bins < 1:
            raise ConfigError("bad curriculum bins")
        if not 0.0 < self.top_bin_share <= 1.0:
            raise ConfigError("top_bin_share must be in (0, 1]")


@dataclass
class TrainConfig:
    num_envs: int = 256
    horizon: int = 24
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_range: float = 0.2
    epochs: int = 5
    minibatches: int = 4
    learning_rate: float = 3e-4
    entropy_coeff: float = 0.005
    value_coeff: float = 1.0
    max_grad_norm: float = 1.0
    iterations: int = 1500
    backbone: str = "recurrent"  # or "memoryless"
    hidden_size: int = 128
    mlp_width: int = 256
    action_scale: float = 0.5
    init_log_std: float = -0.5
    checkpoint_interval: int = 200
    # spawn-distance curriculum: training episodes start with the ball this
    # close (so the terminal catch-and-hold skill is learned first) and the
    # spawn range widens toward the standard range only while the per-batch
    # success rate stays at or above the gate, at most 1/spawn_anneal_iters
    # of the way per iteration (0 disables; evaluation is unaffected)
    spawn_curriculum_start: float = 0.3
    spawn_anneal_iters: int = 400
    spawn_gate_success: float = 0.7
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    ranges: EpisodeRanges = field(default_factory=EpisodeRanges)

    def validate(self):
        if self.backbone not in ("recurrent", "memoryless"):
            raise ConfigError(f"unknown backbone {self.backbone!r}")
        if self.num_envs < 1 or self.horizon < 1:
            raise ConfigError("num_envs and horizon must be >= 1")
        if self.spawn_curriculum_start <= 0.0:
            raise ConfigError("spawn_curriculum_start must be > 0")
        if self.spawn_anneal_iters < 0:
            raise ConfigError("spawn_anneal_iters must be >= 0")
        if not 0.0 < self.spawn_gate_success <= 1.0:
            raise ConfigError("spawn_gate_success must be in (0, 1]")
        self.curriculum.validate()


@dataclass
class FullConfig:
    schema_version: int = CONFIG_SCHEMA_VERSION
    sim: SimConfig = field(default_factory=SimConfig)
    ball: BallConfig = field(default_factory=BallConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    termination: TerminationConfig = field(default_factory=TerminationConfig)
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self):
        if self.schema_version != CONFIG_SCHEMA_VERSION:
            raise ConfigError(
                f"config schema version {self.schema_version} != {CONFIG_SCHEMA_VERSION}"
            )
        self.sim.validate()
        self.ball.validate()
        self.reward.validate()
        self.perception.validate()
        self.train.validate()


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _from_plain(cls, data):
    if not dataclasses.is_dataclass(cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"expected mapping for {cls.__name__}, got {type(data).__name__}")
    kwargs = {}
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config key {key!r} in {cls.__name__}")
        f = names[key]
        if dataclasses.is_dataclass(f.type) or (
            isinstance(f.default_factory, type) and dataclasses.is_dataclass(f.default_factory)
        ):
            sub_cls = f.default_factory if f.default_factory is not dataclasses.MISSING else f.type
            kwargs[key] = _from_plain(sub_cls, value)
        elif isinstance(value, list):
            kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def default_config() -> FullConfig:
    return FullConfig()


def load_config(path) -> FullConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"unreadable config {path}: {exc}") from exc
    if data is None:
        data = {}
    cfg = _from_plain(FullConfig, data)
    cfg.validate()
    return cfg


def save_config(cfg: FullConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(_to_plain(cfg), sort_keys=False))


def config_fingerprint(cfg: FullConfig) -> str:
    blob = json.dumps(_to_plain(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
