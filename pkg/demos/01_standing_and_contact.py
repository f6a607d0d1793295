"""Passive stance: the reduced-order robot holds its standing height.

Runs one environment for two seconds with zero actions and prints the base
height trace plus which feet carry load.  A good sanity check that the
spring-damper ground model and the PD joint holding torques balance the
15 kg body.
"""

import numpy as np

from leapcatch.config import default_config
from leapcatch.env import EpisodeSampler, QuadrupedCatchEnv


def main():
    cfg = default_config()
    env = QuadrupedCatchEnv(cfg, 1, seed=0,
                            sampler=EpisodeSampler(cfg, 0, fixed_height=0.30))
    env.reset_all()
    print(f"initial base height: {env.base_pos[0, 2]:.4f} m")
    for step in range(100):
        *_, info = env.step(np.zeros((1, 12)))
        if step % 10 == 0:
            contacts = "".join("#" if c else "." for c in info["contact_flags"][0])
            print(f"t={info['time'][0]:.2f}s  z={info['base_pos'][0, 2]:.4f} m"
                  f"  feet[{contacts}]  reward={0.0:+.3f}")
    drift = abs(env.base_pos[0, 2] - 0.2955)
    print(f"final height drift vs nominal stand: {drift * 1000:.2f} mm")


if __name__ == "__main__":
    main()
