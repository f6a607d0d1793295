import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.proportion import proportion_confint

from leapcatch.config import default_config
from leapcatch.evaluate import (EVAL_CSV_HEADER, REPLAY_HEADER, SweepSpec,
                                evaluate, replay, sweep, wilson_interval,
                                write_reports, write_sweep)
from leapcatch.nets import ActorCritic


def _short_cfg():
    cfg = default_config()
    cfg.termination.episode_length = 1.0
    return cfg


def _zero_policy(env, obs):
    return np.zeros((obs.shape[0], 12))


class TestWilsonInterval:
    def test_known_values(self):
        lo, hi = wilson_interval(8, 10)
        assert lo == pytest.approx(0.4901624715, abs=1e-9)
        assert hi == pytest.approx(0.9433178485, abs=1e-9)

    def test_zero_trials(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)

    @given(st.integers(0, 200), st.integers(1, 200))
    @settings(max_examples=150, deadline=None)
    def test_matches_statsmodels(self, k, n):
        k = min(k, n)
        lo, hi = wilson_interval(k, n)
        ref_lo, ref_hi = proportion_confint(k, n, method="wilson")
        assert lo == pytest.approx(ref_lo, abs=1e-9)
        assert hi == pytest.approx(ref_hi, abs=1e-9)

    @given(st.integers(0, 50), st.integers(1, 50))
    @settings(max_examples=100, deadline=None)
    def test_contains_point_estimate(self, k, n):
        k = min(k, n)
        lo, hi = wilson_interval(k, n)
        assert 0.0 <= lo <= k / n + 1e-12 and k / n <= hi + 1e-12 and hi <= 1.0


class TestEvaluate:
    def test_scripted_policy_reports(self):
        cfg = _short_cfg()
        reports = evaluate(cfg, _zero_policy, [0.3], trials=4, seed=0)
        rep = reports[0]
        assert rep.trials == 4
        assert len(rep.records) == 4
        assert 0.0 <= rep.wilson_lo <= rep.success_rate <= rep.wilson_hi <= 1.0
        # standing still at h=0.3 never catches
        assert rep.successes == 0
        for r in rep.records:
            assert r["outcome"] in ("timeout", "fell", "caught_landed", "invalid")
            assert r["latency"] > 0.0

    def test_deterministic(self):
        cfg = _short_cfg()
        a = evaluate(cfg, _zero_policy, [0.3], trials=3, seed=5)[0]
        b = evaluate(cfg, _zero_policy, [0.3], trials=3, seed=5)[0]
        assert a.records == b.records

    def test_checkpoint_dim_mismatch_names_both(self):
        cfg = _short_cfg()
        net = ActorCritic(30, 12, backbone="memoryless")
        with pytest.raises(ValueError, match="30.*47"):
            evaluate(cfg, net, [0.3], trials=1)

    def test_network_policy_runs(self):
        cfg = _short_cfg()
        net = ActorCritic(47, 12, backbone="recurrent", hidden_size=16,
                          mlp_width=32, seed=0)
        rep = evaluate(cfg, net, [0.3], trials=2, seed=1)[0]
        assert rep.trials == 2


class TestReports:
    def test_csv_round_trip(self, tmp_path):
        cfg = _short_cfg()
        reports = evaluate(cfg, _zero_policy, [0.3, 0.4], trials=3, seed=0)
        path = tmp_path / "eval.csv"
        summary = write_reports(reports, path)
        with path.open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == EVAL_CSV_HEADER
        assert len(rows) == 1 + 6  # 2 heights x 3 trials
        with summary.open() as fh:
            srows = list(csv.reader(fh))
        assert len(srows) == 3
        assert srows[1][1] == "0.3" and srows[2][1] == "0.4"
        # fingerprint column ties the report to the exact config
        from leapcatch.config import config_fingerprint
        assert srows[1][9] == config_fingerprint(cfg)


class TestSweep:
    def test_noise_grid(self, tmp_path):
        cfg = _short_cfg()
        spec = SweepSpec(variable="noise", values=[0.0, 0.05], heights=[0.3],
                         trials=2, seed=0)
        grid = sweep(cfg, _zero_policy, spec)
        assert len(grid) == 2
        assert grid[0][0] == 0.0 and grid[0][1][0].noise_amp == 0.0
        assert grid[1][1][0].noise_amp == 0.05
        path = write_sweep(grid, tmp_path / "sweep.csv")
        rows = list(csv.reader(path.open()))
        assert len(rows) == 3

    def test_bad_spec_rejected(self):
        with pytest.raises(ValueError):
            SweepSpec(variable="nonsense", values=[1], heights=[0.3],
                      trials=1).validate()
        with pytest.raises(ValueError):
            SweepSpec(variable="noise", values=[], heights=[0.3],
                      trials=1).validate()

    def test_cell_failure_recorded_not_raised(self, tmp_path):
        cfg = _short_cfg()
        spec = SweepSpec(variable="noise", values=[-1.0, 0.0], heights=[0.3],
                         trials=2, seed=0)
        grid = sweep(cfg, _zero_policy, spec)
        assert grid[0][1] is None  # negative noise fails validation
        assert grid[1][1] is not None
        path = write_sweep(grid, tmp_path / "sweep.csv")
        rows = list(csv.reader(path.open()))
        assert rows[1][5] == "failed"


class TestReplay:
    def test_trajectory_dump(self, tmp_path):
        cfg = _short_cfg()
        net = ActorCritic(47, 12, backbone="recurrent", hidden_size=16,
                          mlp_width=32, seed=0)
        path, ep_return = replay(cfg, net, 0.3, 0, tmp_path / "traj.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == REPLAY_HEADER
        assert len(rows) >= 3
        times = [float(r[0]) for r in rows[1:]]
        assert times == sorted(times)
        assert times[0] == pytest.approx(0.0)
        # episode return equals the sum of the per-step totals
        total_col = REPLAY_HEADER.index("total")
        assert ep_return == pytest.approx(sum(float(r[total_col])
                                              for r in rows[1:]))
        # terminal row carries a final status
        assert rows[-1][-1] in ("timeout", "fell", "caught_landed", "invalid")
