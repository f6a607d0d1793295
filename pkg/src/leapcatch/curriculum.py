"""Goal-height curriculum.

Heights are discretized into bins of fixed width starting at ``h_min``.
Each bin keeps an exponential moving average of episode success; when the
top bin's EMA stays above the promotion threshold for enough consecutive
checks, a new bin is appended (harder targets).  Sampling weights give the
top bin a fixed share and spread the remainder over lower bins
proportionally to (1 - EMA), floored so no bin ever starves.
"""

from __future__ import annotations

import numpy as np

from .config import CurriculumConfig


class HeightCurriculum:
    def __init__(self, cfg: CurriculumConfig):
        cfg.validate()
        self.cfg = cfg
        self.num_bins = cfg.initial_bins
        self.ema = np.zeros(cfg.initial_bins)
        self.counts = np.zeros(cfg.initial_bins, dtype=np.int64)
        self.patience = 0

    @property
    def h_max(self) -> float:
        return self.cfg.h_min + self.num_bins * self.cfg.bin_width

    def bin_edges(self, index: int):
        lo = self.cfg.h_min + index * self.cfg.bin_width
        return lo, lo + self.cfg.bin_width

    def weights(self) -> np.ndarray:
        """Per-bin sampling probabilities; always a distribution."""
        cfg = self.cfg
        n = self.num_bins
        if n == 1:
            return np.ones(1)
        w = np.empty(n)
        w[-1] = cfg.top_bin_share
        lower = np.maximum(1.0 - self.ema[:-1], cfg.weight_floor)
        w[:-1] = (1.0 - cfg.top_bin_share) * lower / lower.sum()
        return w / w.sum()

    def sample_height(self, rng: np.random.Generator):
        """Draw (height, bin index): bin per weights, uniform within bin."""
        w = self.weights()
        b = int(rng.choice(self.num_bins, p=w))
        lo, hi = self.bin_edges(b)
        return float(rng.uniform(lo, hi)), b

    def record(self, bin_indices, successes):
        """Fold completed-episode outcomes into the per-bin EMAs."""
        a = self.cfg.ema_alpha
        for b, s in zip(np.asarray(bin_indices), np.asarray(successes)):
            if b < 0 or b >= self.num_bins:
                continue
            self.ema[b] = (1.0 - a) * self.ema[b] + a * float(s)
            self.counts[b] += 1

    def update(self):
        """Promotion check; call once per training iteration."""
        cfg = self.cfg
        if self.h_max >= cfg.h_max_cap:
            return False
        if self.ema[-1] > cfg.promote_threshold:
            self.patience += 1
        else:
            self.patience = 0
        if self.patience >= cfg.promote_patience:
            self.num_bins += 1
            self.ema = np.append(self.ema, 0.0)
            self.counts = np.append(self.counts, 0)
            self.patience = 0
            return True
        return False
