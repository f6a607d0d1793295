import numpy as np
import pytest

from leapcatch.config import ConfigError, CurriculumConfig
from leapcatch.curriculum import HeightCurriculum


def _cur(**kw):
    return HeightCurriculum(CurriculumConfig(**kw))


class TestBins:
    def test_initial_range(self):
        c = _cur()
        assert c.num_bins == 1
        assert c.h_max == pytest.approx(0.35)
        assert c.bin_edges(0) == (pytest.approx(0.30), pytest.approx(0.35))

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            _cur(bin_width=0.0)
        with pytest.raises(ConfigError):
            _cur(top_bin_share=0.0)


class TestWeights:
    def test_single_bin(self):
        np.testing.assert_array_equal(_cur().weights(), [1.0])

    def test_distribution(self):
        c = _cur(initial_bins=4)
        w = c.weights()
        assert w.sum() == pytest.approx(1.0)
        assert np.all(w > 0.0)
        assert w[-1] == pytest.approx(0.5)

    def test_solved_lower_bins_diluted(self):
        c = _cur(initial_bins=3)
        c.ema[0] = 0.95  # nearly solved
        c.ema[1] = 0.10
        w = c.weights()
        assert w[0] < w[1]

    def test_floor_prevents_starvation(self):
        c = _cur(initial_bins=3, weight_floor=0.05)
        c.ema[:] = 1.0
        w = c.weights()
        assert np.all(w > 0.0)
        assert w.sum() == pytest.approx(1.0)

    def test_sampling_matches_weights(self):
        c = _cur(initial_bins=3)
        c.ema[0] = 0.9
        rng = np.random.default_rng(0)
        draws = np.array([c.sample_height(rng)[1] for _ in range(20000)])
        freq = np.bincount(draws, minlength=3) / len(draws)
        np.testing.assert_allclose(freq, c.weights(), atol=0.01)

    def test_heights_inside_sampled_bin(self):
        c = _cur(initial_bins=2)
        rng = np.random.default_rng(1)
        for _ in range(500):
            h, b = c.sample_height(rng)
            lo, hi = c.bin_edges(b)
            assert lo <= h <= hi


class TestEma:
    def test_update_rule(self):
        c = _cur(ema_alpha=0.1)
        c.record([0], [True])
        assert c.ema[0] == pytest.approx(0.1)
        c.record([0], [False])
        assert c.ema[0] == pytest.approx(0.09)

    def test_out_of_range_bin_ignored(self):
        c = _cur()
        c.record([5, -1], [True, True])
        assert c.counts[0] == 0


class TestPromotion:
    def test_requires_consecutive_checks(self):
        c = _cur(promote_threshold=0.6, promote_patience=3)
        c.ema[0] = 0.9
        assert not c.update()
        assert not c.update()
        assert c.update()
        assert c.num_bins == 2
        assert c.h_max == pytest.approx(0.40)

    def test_dip_resets_patience(self):
        c = _cur(promote_threshold=0.6, promote_patience=2)
        c.ema[0] = 0.9
        assert not c.update()
        c.ema[0] = 0.1
        assert not c.update()
        c.ema[0] = 0.9
        assert not c.update()  # patience restarted

    def test_new_bin_starts_cold(self):
        c = _cur(promote_patience=1)
        c.ema[0] = 0.9
        c.update()
        assert c.ema[-1] == 0.0
        assert c.counts[-1] == 0

    def test_h_max_monotone_and_capped(self):
        c = _cur(promote_patience=1, h_max_cap=0.45)
        prev = c.h_max
        for _ in range(20):
            c.ema[-1] = 1.0
            c.update()
            assert c.h_max >= prev
            prev = c.h_max
        assert c.h_max <= 0.45 + 1e-12
