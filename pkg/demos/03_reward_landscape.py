"""Shape of the switched tracking reward.

Sweeps the gripper-to-ball distance across the switch threshold and prints
the reward surface: far away the velocity branch pays for closing speed
(clamped at the commanded speed); inside the threshold the position branch
pays exp(-dist/alpha) + 1, which always beats any velocity reward once the
command is at or below 1 m/s.
"""

import numpy as np

from leapcatch import rewards
from leapcatch.config import RewardConfig


def main():
    cfg = RewardConfig()
    v_cmd = 1.0
    print(f"switch distance D={cfg.switch_distance} m, "
          f"alpha={cfg.position_scale}, v_cmd={v_cmd}\n")
    print(f"{'d_xy [m]':>9} {'branch':>9} {'reward':>8}")
    for d in [3.0, 2.0, 1.5, 1.01, 1.0, 0.8, 0.5, 0.2, 0.1, 0.0]:
        base = np.array([[0.0, 0.0, 0.3]])
        ball = np.array([[d, 0.0, 0.5]])
        ee = np.array([[0.0, 0.0, 0.3]])
        vel = np.array([[v_cmd, 0.0]])  # running straight at the ball
        r, b = rewards.tracking_goal_reward(base, vel, ee, ball, v_cmd, cfg)
        name = "velocity" if b[0] == rewards.BRANCH_VELOCITY else "position"
        print(f"{d:9.2f} {name:>9} {float(r[0]):8.4f}")

    print("\nyaw reward vs heading error:")
    for err in [0.0, 0.25, 0.5, 1.0, np.pi, 2 * np.pi - 0.01]:
        r = rewards.tracking_yaw_reward(err, 0.0, cfg.yaw_scale)
        print(f"  error {err:5.2f} rad -> {float(r):.4f}")


if __name__ == "__main__":
    main()
