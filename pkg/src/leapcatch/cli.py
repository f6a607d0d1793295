"""Command-line entry point: train | eval | sweep | detect | replay.

Exit status 0 on success; failures print a single machine-readable line
``error: <kind>: <detail>`` to stderr and return a nonzero status.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, default_config, load_config, save_config
from .detector import HsvRange, JumpFilter, detect_frame
from .evaluate import SweepSpec, evaluate, replay, sweep, write_reports, write_sweep
from .nets import ActorCritic
from .synthetic import corpus_intrinsics, load_corpus
from .trainer import train

DETECT_HEADER = ["frame", "found", "u", "v", "area", "depth",
                 "x_ee", "y_ee", "z_ee", "accepted"]


def _add_common(p):
    p.add_argument("--config", type=str, default=None, help="YAML config path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None,
                   help="output directory (default $LEAPCATCH_OUT or ./out)")


def _resolve_out(args):
    out = args.out or os.environ.get("LEAPCATCH_OUT", "out")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_cfg(args):
    if args.config is None:
        return default_config()
    return load_config(args.config)


def build_parser():
    parser = argparse.ArgumentParser(prog="leapcatch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training session")
    _add_common(p)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--fixed-height", type=float, default=None)
    p.add_argument("--curriculum", action="store_true")
    p.add_argument("--backbone", choices=["recurrent", "memoryless"], default=None)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--heights", type=str, default="0.3",
                   help="comma-separated target heights in meters")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--noise", type=float, default=None)

    p = sub.add_parser("sweep", help="evaluate over a parameter grid")
    _add_common(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--variable", choices=["noise", "height", "hint"], default="noise")
    p.add_argument("--values", type=str, required=True)
    p.add_argument("--heights", type=str, default="0.3")
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("detect", help="run the RGB-D detector on a corpus")
    _add_common(p)
    p.add_argument("--input", type=str, required=True,
                   help="manifest.json path or its directory")
    p.add_argument("--hsv", type=str, default="340,20,0.5,1.0,0.3,1.0",
                   help="h_min,h_max,s_min,s_max,v_min,v_max")
    p.add_argument("--max-jump", type=float, default=0.5)
    p.add_argument("--max-rejections", type=int, default=3)

    p = sub.add_parser("replay", help="dump one episode trajectory")
    _add_common(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--height", type=float, default=0.3)
    p.add_argument("--episode-seed", type=int, default=0)

    p = sub.add_parser("make-config", help="write the default config YAML")
    _add_common(p)
    return parser


def _parse_floats(text):
    return [float(x) for x in text.split(",") if x]


def cmd_train(args):
    cfg = _load_cfg(args)
    out = _resolve_out(args)
    net, ckpt, _ = train(cfg, args.seed, out, iterations=args.iterations,
                         fixed_height=args.fixed_height,
                         use_curriculum=args.curriculum, backbone=args.backbone)
    print(f"checkpoint: {ckpt}")
    print(f"metrics: {out / 'metrics.csv'}")
    return 0


def cmd_eval(args):
    cfg = _load_cfg(args)
    out = _resolve_out(args)
    net = ActorCritic.load(args.checkpoint)
    reports = evaluate(cfg, net, _parse_floats(args.heights), args.trials,
                       seed=args.seed, noise_amplitude=args.noise)
    path = out / "eval.csv"
    summary = write_reports(reports, path)
    for rep in reports:
        print(f"h={rep.height:.2f}: {rep.successes}/{rep.trials} "
              f"success_rate={rep.success_rate:.3f} "
              f"wilson=[{rep.wilson_lo:.3f}, {rep.wilson_hi:.3f}]")
    print(f"report: {summary}")
    return 0


def cmd_sweep(args):
    cfg = _load_cfg(args)
    out = _resolve_out(args)
    net = ActorCritic.load(args.checkpoint)
    spec = SweepSpec(variable=args.variable, values=_parse_floats(args.values),
                     heights=_parse_floats(args.heights), trials=args.trials,
                     seed=args.seed)
    grid = sweep(cfg, net, spec)
    path = write_sweep(grid, out / "sweep.csv")
    print(f"sweep: {path}")
    return 0


def cmd_detect(args):
    out = _resolve_out(args)
    manifest = Path(args.input)
    if manifest.is_dir():
        manifest = manifest / "manifest.json"
    if not manifest.exists():
        raise ConfigError(f"corpus manifest not found: {manifest}")
    vals = _parse_floats(args.hsv)
    if len(vals) != 6:
        raise ConfigError("--hsv needs 6 comma-separated values")
    hsv = HsvRange(*vals)
    hsv.validate()
    K, rotation, translation = corpus_intrinsics(manifest)
    filt = JumpFilter(max_jump=args.max_jump, max_rejections=args.max_rejections)
    path = out / "detections.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DETECT_HEADER)
        for i, (rgb, depth, _meta) in enumerate(load_corpus(manifest)):
            res = detect_frame(rgb, depth, hsv, K, rotation, translation)
            if not res.found:
                w.writerow([i, 0, "", "", 0, "", "", "", "", 0])
                continue
            point, accepted = filt(res.point_ee)
            w.writerow([i, 1, f"{res.u:.4f}", f"{res.v:.4f}", res.area,
                        f"{res.depth:.4f}", *(f"{p:.5f}" for p in point),
                        int(accepted)])
    print(f"detections: {path}")
    return 0


def cmd_replay(args):
    cfg = _load_cfg(args)
    out = _resolve_out(args)
    net = ActorCritic.load(args.checkpoint)
    path, ep_return = replay(cfg, net, args.height, args.episode_seed,
                             out / "trajectory.csv")
    print(f"trajectory: {path} return={ep_return:.4f}")
    return 0


def cmd_make_config(args):
    out = _resolve_out(args)
    path = out / "config.yaml"
    save_config(default_config(), path)
    print(f"config: {path}")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "detect": cmd_detect,
    "replay": cmd_replay,
    "make-config": cmd_make_config,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: invalid-input: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
