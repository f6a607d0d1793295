"""Short end-to-end training session.

Trains the recurrent policy for a handful of iterations at a small batch
size, then evaluates the checkpoint deterministically and dumps one replay
trajectory.  This exercises the whole stack (environment, nets, PPO,
evaluation, checkpoint I/O) in about a minute; it is far too short to
produce a catching policy.
"""

import tempfile
from pathlib import Path

from leapcatch.config import default_config
from leapcatch.evaluate import evaluate, replay
from leapcatch.nets import ActorCritic
from leapcatch.trainer import train


def main():
    out = Path(tempfile.mkdtemp(prefix="leapcatch_smoke_"))
    cfg = default_config()
    cfg.train.num_envs = 32
    cfg.train.horizon = 16
    cfg.termination.episode_length = 4.0

    print("training (tiny budget)...")
    _, ckpt, _ = train(cfg, seed=0, out_dir=out, iterations=10,
                       fixed_height=0.30)
    print(f"checkpoint: {ckpt}")
    for line in (out / "metrics.csv").read_text().splitlines()[:4]:
        print("  " + line)

    net = ActorCritic.load(ckpt)
    rep = evaluate(cfg, net, [0.30], trials=8, seed=1)[0]
    print(f"\ndeterministic eval: {rep.successes}/{rep.trials} catches, "
          f"wilson 95% [{rep.wilson_lo:.3f}, {rep.wilson_hi:.3f}]")

    path, ep_return = replay(cfg, net, 0.30, 0, out / "trajectory.csv")
    print(f"replay: {path} (return {ep_return:.2f})")


if __name__ == "__main__":
    main()
