"""On-policy actor-critic training: rollout collection over the batched
environment, generalized advantage estimation, and clipped-surrogate
updates, with the goal-height curriculum driving per-episode difficulty.

Phases never overlap: rollouts read parameters only; the update is the
single writer.  Everything is deterministic for a fixed (config, seed):
per-episode randomization is keyed by (seed, episode counter), action
noise and minibatch shuffles come from dedicated streams consumed in a
fixed order, and metric reductions run in fixed env order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import FullConfig, config_fingerprint
from .curriculum import HeightCurriculum
from .env import EpisodeSampler, QuadrupedCatchEnv
from .nets import ActorCritic, Adam
from .perception import observation_dim


@dataclass
class RolloutBatch:
    obs: np.ndarray        # (T, B, D)
    priv: np.ndarray       # (T, B, D)
    actions: np.ndarray    # (T, B, A)
    logp: np.ndarray       # (T, B)
    values: np.ndarray     # (T, B)
    rewards: np.ndarray    # (T, B)
    dones: np.ndarray      # (T, B) bool, episode ended at step t
    reset_masks: np.ndarray  # (T, B), 0 where the episode restarted before step t
    h0: np.ndarray         # (B, H) hidden at window start
    last_values: np.ndarray  # (B,) bootstrap for the step after the window
    episode_results: list  # (height_bin, success) per completed episode


def gae(rewards, values, dones, last_values, gamma: float, lam: float):
    """Backward GAE recursion; returns (advantages, returns).

    ``dones[t]`` true means the episode terminated at step t, so no value
    bootstraps across it.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    for t in reversed(range(T)):
        nonterminal = ~dones[t]
        next_v = last_values if t == T - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + values


def collect_rollouts(env: QuadrupedCatchEnv, net: ActorCritic, horizon: int,
                     rng: np.random.Generator, obs=None, priv=None, hidden=None,
                     prev_done=None):
    """Step all envs ``horizon`` times, recording everything the update
    needs.  Returns (batch, carry) where carry resumes the next window."""
    B = env.num_envs
    if obs is None:
        obs, priv = env.reset_all()
        hidden = net.initial_hidden(B)
        prev_done = np.zeros(B, dtype=bool)
    T = horizon
    D = obs.shape[1]
    A = net.act_dim
    out = RolloutBatch(
        obs=np.zeros((T, B, D)), priv=np.zeros((T, B, D)),
        actions=np.zeros((T, B, A)), logp=np.zeros((T, B)),
        values=np.zeros((T, B)), rewards=np.zeros((T, B)),
        dones=np.zeros((T, B), dtype=bool), reset_masks=np.ones((T, B)),
        h0=hidden.copy(), last_values=np.zeros(B), episode_results=[])
    for t in range(T):
        out.reset_masks[t] = (~prev_done).astype(float)
        hidden = hidden * out.reset_masks[t][:, None]
        out.obs[t] = obs
        out.priv[t] = priv
        _, action, logp, value, hidden = net.act(obs, hidden, priv, rng=rng)
        obs, priv, breakdown, done, info = env.step(action)
        out.actions[t] = action
        out.logp[t] = logp
        out.values[t] = value
        out.rewards[t] = breakdown.total
        out.dones[t] = done
        prev_done = done
        if np.any(done):
            for i in np.nonzero(done)[0]:
                out.episode_results.append(
                    (int(info["height_bin"][i]), bool(info["success"][i]),
                     float(info["height"][i])))
    out.last_values = np.where(prev_done, 0.0, net.value(priv))
    carry = (obs, priv, hidden, prev_done)
    return out, carry


def ppo_update(net: ActorCritic, opt: Adam, batch: RolloutBatch, adv, returns,
               cfg, rng: np.random.Generator):
    """Several epochs of clipped-surrogate minibatch steps.

    Minibatches split the env axis so recurrent sequences stay intact.
    Returns a stats dict; a non-finite loss skips that minibatch and leaves
    parameters unchanged.
    """
    T, B = batch.logp.shape
    adv_n = (adv - adv.mean()) / (adv.std() + 1e-8)
    clip = cfg.clip_range
    n_mb = min(cfg.minibatches, B)
    stats = {"loss_actor": [], "loss_value": [], "entropy": [],
             "kl": [], "clip_frac": [], "skipped": 0}
    for _ in range(cfg.epochs):
        order = rng.permutation(B)
        for mb in np.array_split(order, n_mb):
            mb = np.sort(mb)  # fixed reduction order inside the minibatch
            logp_new, values, cache = net.evaluate_sequence(
                batch.obs[:, mb], batch.h0[mb], batch.reset_masks[:, mb],
                batch.actions[:, mb], batch.priv[:, mb])
            a = adv_n[:, mb]
            ratio = np.exp(logp_new - batch.logp[:, mb])
            unclipped = ratio * a
            clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * a
            surrogate = np.minimum(unclipped, clipped)
            v_err = values - returns[:, mb]
            m = surrogate.size
            loss_actor = -surrogate.mean()
            loss_value = 0.5 * cfg.value_coeff * np.mean(v_err ** 2)
            entropy = net.entropy()
            loss = loss_actor + loss_value - cfg.entropy_coeff * entropy
            if not np.isfinite(loss):
                stats["skipped"] += 1
                continue
            net.zero_grad()
            use_unclipped = (unclipped <= clipped).astype(float)
            dlogp = -(use_unclipped * ratio * a) / m
            dvalues = cfg.value_coeff * v_err / m
            net.backward_sequence(cache, dlogp, dvalues)
            net.log_std.g += -cfg.entropy_coeff
            opt.step(max_grad_norm=cfg.max_grad_norm)
            stats["loss_actor"].append(loss_actor)
            stats["loss_value"].append(loss_value)
            stats["entropy"].append(entropy)
            stats["kl"].append(float(np.mean(batch.logp[:, mb] - logp_new)))
            stats["clip_frac"].append(float(np.mean(np.abs(ratio - 1.0) > clip)))
    return {k: (float(np.mean(v)) if isinstance(v, list) and v else
                (v if not isinstance(v, list) else 0.0))
            for k, v in stats.items()}


METRICS_HEADER = [
    "iteration", "env_steps", "mean_reward", "episodes", "success_rate",
    "h_max", "num_bins", "bin_ema", "loss_actor", "loss_value", "entropy",
    "kl", "clip_frac",
]


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def train(cfg: FullConfig, seed: int, out_dir, iterations=None,
          fixed_height=None, use_curriculum=False, backbone=None,
          noise_amplitude=None, latency_range=None, eval_hook=None,
          log_every: int = 1):
    """Full training run.  Writes ``metrics.csv`` and checkpoints under
    ``out_dir``; returns (net, final checkpoint path, curriculum or None).

    ``eval_hook(iteration, net, curriculum) -> bool`` may stop training
    early (e.g. once a target success rate is reached).
    """
    cfg.validate()
    tcfg = cfg.train
    if backbone is not None:
        tcfg.backbone = backbone
    iterations = tcfg.iterations if iterations is None else iterations
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    curriculum = HeightCurriculum(tcfg.curriculum) if use_curriculum else None
    height_fn = curriculum.sample_height if use_curriculum else None
    sampler = EpisodeSampler(cfg, seed, fixed_height=fixed_height,
                             height_fn=height_fn,
                             noise_amplitude=noise_amplitude,
                             latency_range=latency_range)
    env = QuadrupedCatchEnv(cfg, tcfg.num_envs, seed=seed, sampler=sampler)
    obs_dim = observation_dim(cfg.perception)
    net = ActorCritic(obs_dim, 12, backbone=tcfg.backbone,
                      hidden_size=tcfg.hidden_size, mlp_width=tcfg.mlp_width,
                      seed=seed)
    net.log_std.v[...] = tcfg.init_log_std
    opt = Adam(net, lr=tcfg.learning_rate)
    action_rng = np.random.default_rng(np.random.SeedSequence((seed, 0xAC7)))
    shuffle_rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5F1E)))

    metrics_path = out_dir / "metrics.csv"
    ckpt_path = out_dir / "checkpoint_final.lpck"
    carry = (None, None, None, None)
    env_steps = 0
    with metrics_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        d_lo_full, d_hi_full = tcfg.ranges.spawn_distance_range
        lat_lo_full, lat_hi_full = tcfg.ranges.spawn_lateral_range
        d_lo0 = tcfg.spawn_curriculum_start
        d_hi0 = d_lo0 + 0.4
        spawn_progress = 0.0 if tcfg.spawn_anneal_iters > 0 else 1.0
        for it in range(1, iterations + 1):
            if tcfg.spawn_anneal_iters > 0:
                p = spawn_progress
                lat_scale = 0.2 + 0.8 * p
                sampler.distance_range = (d_lo0 + p * (d_lo_full - d_lo0),
                                          d_hi0 + p * (d_hi_full - d_hi0))
                sampler.lateral_range = (lat_lo_full * lat_scale,
                                         lat_hi_full * lat_scale)
            batch, carry = collect_rollouts(env, net, tcfg.horizon, action_rng,
                                            *carry)
            env_steps += tcfg.horizon * tcfg.num_envs
            adv, returns = gae(batch.rewards, batch.values, batch.dones,
                               batch.last_values, tcfg.gamma, tcfg.gae_lambda)
            stats = ppo_update(net, opt, batch, adv, returns, tcfg, shuffle_rng)
            episodes = batch.episode_results
            succ = [s for (_, s, _) in episodes]
            if curriculum is not None and episodes:
                curriculum.record([b for (b, _, _) in episodes], succ)
                curriculum.update()
            # widen the spawn range only once the current one is mastered
            if (tcfg.spawn_anneal_iters > 0 and succ
                    and float(np.mean(succ)) >= tcfg.spawn_gate_success):
                spawn_progress = min(
                    1.0, spawn_progress + 1.0 / tcfg.spawn_anneal_iters)
            if it % log_every == 0 or it == iterations:
                row = [
                    it, env_steps, float(batch.rewards.mean()), len(episodes),
                    (float(np.mean(succ)) if succ else 0.0),
                    (curriculum.h_max if curriculum else
                     (fixed_height if fixed_height is not None else 0.0)),
                    (curriculum.num_bins if curriculum else 1),
                    (";".join(f"{e:.6g}" for e in curriculum.ema)
                     if curriculum else ""),
                    stats["loss_actor"], stats["loss_value"], stats["entropy"],
                    stats["kl"], stats["clip_frac"],
                ]
                writer.writerow([_fmt(x) for x in row])
                fh.flush()
            if tcfg.checkpoint_interval and it % tcfg.checkpoint_interval == 0:
                net.save(out_dir / f"checkpoint_{it:06d}.lpck")
            if eval_hook is not None and eval_hook(it, net, curriculum):
                break
    net.save(ckpt_path)
    (out_dir / "fingerprint.txt").write_text(config_fingerprint(cfg) + "\n")
    return net, ckpt_path, curriculum
