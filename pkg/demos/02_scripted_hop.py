"""Open-loop hop: crouch, extend, leave the ground.

Shows the leap mechanics without any learning: a short symmetric crouch
followed by a fast leg extension pops the base upward and the front feet
leave the ground long enough to register a debounced liftoff attempt.
"""

import numpy as np

from leapcatch.config import default_config
from leapcatch.env import EpisodeSampler, QuadrupedCatchEnv


def main():
    cfg = default_config()
    env = QuadrupedCatchEnv(cfg, 1, seed=0,
                            sampler=EpisodeSampler(cfg, 0, fixed_height=2.0))
    env.reset_all()

    crouch = np.zeros((1, 12))
    crouch[0, 1::3] = 0.6
    crouch[0, 2::3] = -0.6
    for _ in range(15):
        env.step(crouch)
    print(f"crouched to z={env.base_pos[0, 2]:.3f} m")

    extend = np.zeros((1, 12))
    extend[0, 1::3] = -1.2
    extend[0, 2::3] = 2.0
    apex = 0.0
    for _ in range(10):
        *_, done, info = env.step(extend)
        apex = max(apex, float(info["base_pos"][0, 2]))
        airborne = not info["contact_flags"][0].any()
        print(f"t={info['time'][0]:.2f}s  z={info['base_pos'][0, 2]:.3f} m"
              f"  airborne={airborne}  attempts={info['attempts'][0]}")
        if done[0]:
            break
    print(f"apex: {apex:.3f} m")


if __name__ == "__main__":
    main()
