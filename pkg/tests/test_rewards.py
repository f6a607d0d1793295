import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leapcatch import rewards
from leapcatch.config import RewardConfig, TerminationConfig


CFG = RewardConfig()  # D=1.0, alpha=0.2, sigma=0.5


def goal_reward(base, vel_xy, ee, ball, v_cmd, cfg=CFG):
    r, b = rewards.tracking_goal_reward(
        np.asarray(base, dtype=float)[None], np.asarray(vel_xy, dtype=float)[None],
        np.asarray(ee, dtype=float)[None], np.asarray(ball, dtype=float)[None],
        v_cmd, cfg)
    return float(r[0]), int(b[0])


class TestTrackingGoalReward:
    def test_velocity_clamped_at_command(self):
        # far branch, moving straight at the goal faster than commanded
        r, b = goal_reward([0, 0, 0.3], [2.0, 0.0], [0.4, 0, 0.3], [3.0, 0, 0.5], 1.5)
        assert b == rewards.BRANCH_VELOCITY
        assert r == pytest.approx(1.5)

    def test_moving_away_penalized(self):
        r, _ = goal_reward([0, 0, 0.3], [-0.5, 0.0], [0.4, 0, 0.3], [3.0, 0, 0.5], 1.5)
        assert r == pytest.approx(-0.5)

    def test_position_branch_closed_forms(self):
        # ee on the ball in xy -> position branch on 3D base distance
        r, b = goal_reward([0.5, 0, 0.5], [0, 0], [0.5, 0, 0.5], [0.5, 0, 0.5], 1.0)
        assert b == rewards.BRANCH_POSITION
        assert r == pytest.approx(2.0)
        r, _ = goal_reward([0.5, 0, 0.5], [0, 0], [0.5, 0, 0.5],
                           [0.5 + CFG.position_scale, 0, 0.5], 1.0)
        assert r == pytest.approx(np.exp(-1.0) + 1.0)

    def test_branch_switch_at_threshold(self):
        # d_xy exactly D is the position branch (<=)
        _, b = goal_reward([0, 0, 0.3], [1.0, 0.0], [0, 0, 0.3],
                           [CFG.switch_distance, 0, 0.5], 1.0)
        assert b == rewards.BRANCH_POSITION
        _, b = goal_reward([0, 0, 0.3], [1.0, 0.0], [0, 0, 0.3],
                           [CFG.switch_distance + 1e-9, 0, 0.5], 1.0)
        assert b == rewards.BRANCH_VELOCITY

    def test_goal_directly_above_base(self):
        # degenerate direction -> zero vector, r_vel = min(0, v_cmd)
        r, b = goal_reward([0, 0, 0.3], [2.0, 0.0], [2.0, 0, 0.3], [0.0, 0, 0.5], 1.5)
        assert b == rewards.BRANCH_VELOCITY
        assert r == pytest.approx(0.0)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 3))
    @settings(max_examples=100, deadline=None)
    def test_r_vel_never_exceeds_command(self, vx, vy, v_cmd):
        r, b = goal_reward([0, 0, 0.3], [vx, vy], [0.4, 0, 0.3], [3.0, 0, 0.5], v_cmd)
        assert r <= v_cmd + 1e-12

    @given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 2))
    @settings(max_examples=100, deadline=None)
    def test_r_pos_in_range_and_decreasing(self, d1, d2, z):
        lo, hi = sorted((d1, d2))
        r_near, _ = goal_reward([0, 0, 0], [0, 0], [0, 0, 0], [0, 0, lo], 1.0)
        r_far, _ = goal_reward([0, 0, 0], [0, 0], [0, 0, 0], [0, 0, hi], 1.0)
        assert 1.0 <= r_near <= 2.0 and 1.0 <= r_far <= 2.0
        assert r_far <= r_near

    def test_position_branch_dominates_low_commands(self):
        # the +1 offset: with v_cmd <= 1, r_pos > any r_vel
        rng = np.random.default_rng(0)
        for _ in range(200):
            ball = rng.uniform(-5, 5, 3)
            base = rng.uniform(-5, 5, 3)
            v = rng.uniform(-3, 3, 2)
            v_cmd = rng.uniform(0, 1)
            r_pos, _ = goal_reward(base, [0, 0], ball, ball, v_cmd)
            r_vel, _ = goal_reward([0, 0, 0.3], v, [0.4, 0, 0.3], [5, 0, 0.5], v_cmd)
            assert r_pos > r_vel


class TestTrackingYawReward:
    def test_aligned(self):
        assert rewards.tracking_yaw_reward(0.7, 0.7, 0.5) == pytest.approx(1.0)

    def test_one_sigma(self):
        assert rewards.tracking_yaw_reward(0.5, 0.0, 0.5) == pytest.approx(np.exp(-1.0))

    def test_wrapping(self):
        eps = 1e-6
        r = rewards.tracking_yaw_reward(2 * np.pi - eps, 0.0, 0.5)
        assert r == pytest.approx(1.0, abs=1e-5)

    @given(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi),
           st.integers(-3, 3), st.integers(-3, 3))
    @settings(max_examples=100, deadline=None)
    def test_invariant_under_2pi_shifts(self, a, b, ka, kb):
        r0 = rewards.tracking_yaw_reward(a, b, 0.5)
        r1 = rewards.tracking_yaw_reward(a + 2 * np.pi * ka, b + 2 * np.pi * kb, 0.5)
        assert r0 == pytest.approx(r1, abs=1e-9)


class TestRegularization:
    def test_zero_at_rest(self):
        r = rewards.regularization(np.zeros((1, 12)), np.zeros((1, 12)),
                                   np.zeros((1, 12)), np.zeros((1, 12)),
                                   np.zeros((1, 3)), CFG)
        assert r[0] == 0.0

    def test_energy_substitution(self):
        cfg = RewardConfig(energy_coeff=0.01, action_rate_coeff=0.0, ang_vel_coeff=0.0)
        tau = np.zeros((1, 12))
        qd = np.zeros((1, 12))
        tau[0, :2] = [5.0, -5.0]
        qd[0, :2] = [1.0, 1.0]  # |5*1| + |-5*1| = 10 W
        r = rewards.regularization(tau, qd, np.zeros((1, 12)), np.zeros((1, 12)),
                                   np.zeros((1, 3)), cfg)
        assert r[0] == pytest.approx(-0.1)

    def test_never_positive(self):
        rng = np.random.default_rng(1)
        r = rewards.regularization(rng.normal(size=(50, 12)), rng.normal(size=(50, 12)),
                                   rng.normal(size=(50, 12)), rng.normal(size=(50, 12)),
                                   rng.normal(size=(50, 3)), CFG)
        assert np.all(r <= 0.0)


class TestCatchBonus:
    def test_no_event(self):
        assert rewards.catch_bonus(np.array([False]), CFG)[0] == 0.0

    def test_event_pays_weight(self):
        assert rewards.catch_bonus(np.array([True]), CFG)[0] == CFG.w_catch


class TestTerminate:
    cfg = TerminationConfig()

    def _status(self, roll=0.0, pitch=0.0, z=0.3, caught=False, stance=0.0,
                t=1.0, attempts=0, invalid=False):
        return int(rewards.terminate(
            np.array([roll]), np.array([pitch]), np.array([z]),
            np.array([caught]), np.array([stance]), np.array([t]),
            np.array([attempts]), np.array([invalid]), self.cfg)[0])

    def test_running(self):
        assert self._status() == rewards.RUNNING

    def test_fell_on_pitch(self):
        assert self._status(pitch=1.2) == rewards.FELL

    def test_fell_on_low_base(self):
        assert self._status(z=0.05) == rewards.FELL

    def test_caught_landed(self):
        assert self._status(caught=True, stance=0.6) == rewards.CAUGHT_LANDED

    def test_timeout(self):
        assert self._status(t=9.0) == rewards.TIMEOUT

    def test_invalid_dominates(self):
        assert self._status(pitch=1.2, invalid=True) == rewards.INVALID

    def test_success_within_attempt_budget(self):
        ok = rewards.is_success(np.array([rewards.CAUGHT_LANDED]), np.array([2]),
                                self.cfg)
        assert ok[0]

    def test_failure_beyond_attempt_budget(self):
        ok = rewards.is_success(np.array([rewards.CAUGHT_LANDED]), np.array([4]),
                                self.cfg)
        assert not ok[0]


def test_total_matches_weighted_sum():
    rng = np.random.default_rng(2)
    r_goal = rng.normal(size=8)
    r_yaw = rng.random(8)
    r_reg = -rng.random(8)
    r_catch = rewards.catch_bonus(rng.random(8) > 0.5, CFG)
    bd = rewards.total_reward(r_goal, r_yaw, r_reg, r_catch,
                              np.zeros(8, dtype=int), CFG)
    np.testing.assert_allclose(
        bd.total,
        CFG.w_goal * r_goal + CFG.w_yaw * r_yaw + CFG.w_reg * r_reg + r_catch)
