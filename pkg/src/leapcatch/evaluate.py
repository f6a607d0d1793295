"""Evaluation harness: deterministic-policy trials, Wilson intervals,
experiment sweeps and trajectory replay dumps.

All trials of one evaluation run in parallel as one env batch; per-episode
configuration is keyed by (eval seed, trial index) so two cells of a sweep
that share a seed schedule see identical episodes except for the swept
variable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import FullConfig, config_fingerprint
from .env import EpisodeSampler, QuadrupedCatchEnv
from .nets import ActorCritic
from .perception import observation_dim
from .rewards import STATUS_NAMES

EVAL_CSV_VERSION = 1
EVAL_CSV_HEADER = [
    "schema", "height", "trial", "outcome", "success", "attempts",
    "time_to_catch", "noise_amp", "latency",
]
REPORT_HEADER = [
    "schema", "height", "trials", "successes", "success_rate",
    "wilson_lo", "wilson_hi", "noise_amp", "seed", "fingerprint",
]
REPLAY_HEADER = [
    "t", "base_x", "base_y", "base_z", "roll", "pitch", "yaw",
    "vel_x", "vel_y", "vel_z", "ball_x", "ball_y", "ball_z",
    "r_goal", "r_yaw", "r_reg", "r_catch", "total", "branch",
    "front_liftoffs", "caught", "catch_event", "status",
]


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054):
    """Wilson 95% score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class EvalReport:
    height: float
    trials: int
    successes: int
    success_rate: float
    wilson_lo: float
    wilson_hi: float
    noise_amp: float
    seed: int
    fingerprint: str
    records: list = field(default_factory=list)  # per-trial dicts


def _run_trials(cfg: FullConfig, policy, height: float, trials: int, seed: int,
                noise_amplitude, latency_range) -> EvalReport:
    sampler = EpisodeSampler(cfg, seed, fixed_height=height,
                             noise_amplitude=noise_amplitude,
                             latency_range=latency_range)
    env = QuadrupedCatchEnv(cfg, trials, seed=seed, sampler=sampler)
    obs, priv = env.reset_all()
    hidden = policy.initial_hidden(trials) if isinstance(policy, ActorCritic) else None
    finished = np.zeros(trials, dtype=bool)
    records = [None] * trials
    max_steps = int(cfg.termination.episode_length / cfg.sim.control_dt) + 2
    amp = cfg.perception.noise_amplitude if noise_amplitude is None else noise_amplitude
    for _ in range(max_steps):
        if isinstance(policy, ActorCritic):
            action, hidden = policy.actor_mean(obs, hidden)
        else:
            action = policy(env, obs)
        obs, priv, _rb, done, info = env.step(action)
        if isinstance(policy, ActorCritic) and hidden.size:
            hidden[done] = 0.0
        newly = done & ~finished
        for i in np.nonzero(newly)[0]:
            records[i] = {
                "trial": int(i),
                "outcome": STATUS_NAMES[int(info["status"][i])],
                "success": bool(info["success"][i]),
                "attempts": int(info["attempts"][i]),
                "time_to_catch": (float(info["catch_time"][i])
                                  if np.isfinite(info["catch_time"][i]) else -1.0),
                "noise_amp": float(amp),
                "latency": float(info["latency"][i]),
            }
        finished |= done
        if finished.all():
            break
    for i in range(trials):
        if records[i] is None:
            records[i] = {"trial": i, "outcome": "timeout", "success": False,
                          "attempts": 0, "time_to_catch": -1.0,
                          "noise_amp": float(amp), "latency": 0.0}
    successes = sum(r["success"] for r in records)
    lo, hi = wilson_interval(successes, trials)
    return EvalReport(height=height, trials=trials, successes=successes,
                      success_rate=successes / trials, wilson_lo=lo, wilson_hi=hi,
                      noise_amp=float(amp), seed=seed,
                      fingerprint=config_fingerprint(cfg), records=records)


def evaluate(cfg: FullConfig, policy, heights, trials: int, seed: int = 0,
             noise_amplitude=None, latency_range=None) -> list[EvalReport]:
    """Deterministic-policy evaluation; one report per height.

    ``policy`` is an ActorCritic (run at its action mean) or a callable
    ``policy(env, obs) -> action`` for scripted harness self-tests.
    """
    if isinstance(policy, ActorCritic):
        expected = observation_dim(cfg.perception)
        if policy.obs_dim != expected:
            raise ValueError(
                f"checkpoint observation dim {policy.obs_dim} does not match "
                f"environment observation dim {expected}")
    return [_run_trials(cfg, policy, float(h), trials, seed,
                        noise_amplitude, latency_range) for h in heights]


def write_reports(reports: list[EvalReport], out_path):
    """Long-format per-trial CSV plus a per-height summary CSV."""
    out_path = Path(out_path)
    with out_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVAL_CSV_HEADER)
        for rep in reports:
            for r in rep.records:
                w.writerow([EVAL_CSV_VERSION, f"{rep.height:.10g}", r["trial"],
                            r["outcome"], int(r["success"]), r["attempts"],
                            f"{r['time_to_catch']:.10g}", f"{r['noise_amp']:.10g}",
                            f"{r['latency']:.10g}"])
    summary = out_path.with_name(out_path.stem + "_summary.csv")
    with summary.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for rep in reports:
            w.writerow([EVAL_CSV_VERSION, f"{rep.height:.10g}", rep.trials,
                        rep.successes, f"{rep.success_rate:.10g}",
                        f"{rep.wilson_lo:.10g}", f"{rep.wilson_hi:.10g}",
                        f"{rep.noise_amp:.10g}", rep.seed, rep.fingerprint])
    return summary


@dataclass
class SweepSpec:
    variable: str  # "noise" | "height" | "hint"
    values: list
    heights: list
    trials: int
    seed: int = 0

    def validate(self):
        if not self.values or self.trials < 1:
            raise ValueError("sweep needs a non-empty grid and trials >= 1")
        if self.variable not in ("noise", "height", "hint"):
            raise ValueError(f"unknown sweep variable {self.variable!r}")


def sweep(cfg: FullConfig, policy, spec: SweepSpec):
    """One evaluate() per grid cell, shared seed schedule across cells.

    Returns a list of (cell value, [EvalReport per height]); per-cell
    failures are recorded as None entries rather than aborting the grid.
    """
    spec.validate()
    grid = []
    for value in spec.values:
        try:
            if spec.variable == "noise":
                reps = evaluate(cfg, policy, spec.heights, spec.trials,
                                seed=spec.seed, noise_amplitude=float(value))
            else:
                reps = evaluate(cfg, policy, spec.heights, spec.trials,
                                seed=spec.seed)
            grid.append((value, reps))
        except Exception as exc:  # propagate per-cell failure without aborting
            grid.append((value, None))
            print(f"sweep cell {spec.variable}={value} failed: {exc}")
    return grid


def write_sweep(grid, out_path):
    out_path = Path(out_path)
    with out_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema", "cell", "height", "trials", "successes",
                    "success_rate", "wilson_lo", "wilson_hi"])
        for value, reps in grid:
            if reps is None:
                w.writerow([EVAL_CSV_VERSION, value, "", "", "", "failed", "", ""])
                continue
            for rep in reps:
                w.writerow([EVAL_CSV_VERSION, value, f"{rep.height:.10g}",
                            rep.trials, rep.successes, f"{rep.success_rate:.10g}",
                            f"{rep.wilson_lo:.10g}", f"{rep.wilson_hi:.10g}"])
    return out_path


def replay(cfg: FullConfig, policy, height: float, episode_seed: int, dump_path):
    """Run one deterministic episode and dump a per-step trajectory CSV."""
    sampler = EpisodeSampler(cfg, episode_seed, fixed_height=height)
    env = QuadrupedCatchEnv(cfg, 1, seed=episode_seed, sampler=sampler)
    obs, priv = env.reset_all()
    hidden = policy.initial_hidden(1)
    dump_path = Path(dump_path)
    max_steps = int(cfg.termination.episode_length / cfg.sim.control_dt) + 2
    total_return = 0.0
    with dump_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPLAY_HEADER)
        for _ in range(max_steps):
            action, hidden = policy.actor_mean(obs, hidden)
            t_now = float(env.t[0])
            obs, priv, rb, done, info = env.step(action)
            total_return += float(rb.total[0])
            w.writerow([f"{t_now:.10g}",
                        *(f"{v:.10g}" for v in info["base_pos"][0]),
                        *(f"{float(v):.10g}" for v in info["rpy"][0]),
                        *(f"{v:.10g}" for v in info["base_vel"][0]),
                        *(f"{v:.10g}" for v in info["ball_pos"][0]),
                        f"{float(rb.r_goal[0]):.10g}", f"{float(rb.r_yaw[0]):.10g}",
                        f"{float(rb.r_reg[0]):.10g}", f"{float(rb.r_catch[0]):.10g}",
                        f"{float(rb.total[0]):.10g}", int(rb.branch[0]),
                        int(info["attempts"][0]), int(info["caught"][0]),
                        int(info["catch_event"][0]),
                        STATUS_NAMES[int(info["status"][0])]])
            if done[0]:
                break
    return dump_path, total_return
