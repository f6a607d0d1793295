import colorsys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leapcatch import detector as det
from leapcatch.detector import (CameraIntrinsics, HsvRange, JumpFilter,
                                backproject, camera_to_ee, detect_frame,
                                largest_component, median_depth, project,
                                rgb_to_hsv, threshold_mask)
from leapcatch.synthetic import (DEFAULT_INTRINSICS, generate_corpus,
                                 load_corpus, corpus_intrinsics)


RED = HsvRange(h_min=340.0, h_max=20.0, s_min=0.5, s_max=1.0,
               v_min=0.3, v_max=1.0)
K = CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)


class TestRgbToHsv:
    def test_primaries(self):
        h, s, v = rgb_to_hsv(np.array([[255, 0, 0], [0, 255, 0], [0, 0, 255]]))
        np.testing.assert_allclose(h, [0.0, 120.0, 240.0])
        np.testing.assert_allclose(s, 1.0)
        np.testing.assert_allclose(v, 1.0)

    def test_gray_zero_saturation(self):
        h, s, v = rgb_to_hsv(np.array([128, 128, 128]))
        assert s == 0.0 and h == 0.0
        assert v == pytest.approx(128 / 255)

    @given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
    @settings(max_examples=200, deadline=None)
    def test_matches_colorsys(self, r, g, b):
        # stdlib colorsys as the independent oracle
        h, s, v = rgb_to_hsv(np.array([r, g, b]))
        oh, os_, ov = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
        # colorsys hue is in [0,1); compare modulo 360
        dh = (float(h) - oh * 360.0 + 180.0) % 360.0 - 180.0
        assert abs(dh) < 1e-9 or s == 0.0
        assert float(s) == pytest.approx(os_, abs=1e-12)
        assert float(v) == pytest.approx(ov, abs=1e-12)


class TestThresholdMask:
    def test_wrap_aware_red(self):
        img = np.array([[[230, 25, 30], [25, 230, 30], [230, 25, 200]]])
        mask = threshold_mask(img, RED)
        assert mask[0, 0] and not mask[0, 1]

    def test_non_wrapping_range(self):
        rng = HsvRange(100.0, 140.0, 0.5, 1.0, 0.3, 1.0)
        img = np.array([[[25, 230, 30], [230, 25, 30]]])
        mask = threshold_mask(img, rng)
        assert mask[0, 0] and not mask[0, 1]

    def test_validate_rejects_bad_saturation(self):
        with pytest.raises(ValueError):
            HsvRange(0, 10, 0.9, 0.1, 0, 1).validate()


def _oracle_components(mask):
    """Exhaustive BFS 8-connected labeling, independent of scipy."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    comps = []
    h, w = mask.shape
    for i in range(h):
        for j in range(w):
            if mask[i, j] and not seen[i, j]:
                stack = [(i, j)]
                seen[i, j] = True
                pix = []
                while stack:
                    a, b = stack.pop()
                    pix.append((a, b))
                    for da in (-1, 0, 1):
                        for db in (-1, 0, 1):
                            na, nb = a + da, b + db
                            if 0 <= na < h and 0 <= nb < w and mask[na, nb] \
                                    and not seen[na, nb]:
                                seen[na, nb] = True
                                stack.append((na, nb))
                comps.append(pix)
    return comps


class TestLargestComponent:
    def test_empty(self):
        comp, cen, area = largest_component(np.zeros((4, 4), dtype=bool))
        assert comp is None and cen is None and area == 0

    def test_diagonal_is_connected(self):
        mask = np.eye(5, dtype=bool)
        _, cen, area = largest_component(mask)
        assert area == 5
        assert cen == (2.0, 2.0)

    def test_picks_larger_blob(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[1:3, 1:3] = True  # area 4
        mask[5:9, 5:9] = True  # area 16
        comp, cen, area = largest_component(mask)
        assert area == 16
        assert cen == (6.5, 6.5)

    def test_tie_breaks_on_min_row_then_col(self):
        mask = np.zeros((6, 6), dtype=bool)
        mask[0, 4:6] = True   # area 2, row 0
        mask[3, 0:2] = True   # area 2, row 3
        comp, cen, area = largest_component(mask)
        assert area == 2
        assert cen == (4.5, 0.0)

    def test_matches_bfs_oracle_fuzz(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            mask = rng.random((16, 16)) < 0.35
            comps = _oracle_components(mask)
            comp, cen, area = largest_component(mask)
            if not comps:
                assert comp is None
                continue
            assert area == max(len(c) for c in comps)
            # centroid of some maximal oracle component matches
            best = [c for c in comps if len(c) == area]
            ok = any(
                cen[0] == pytest.approx(np.mean([b for _, b in c])) and
                cen[1] == pytest.approx(np.mean([a for a, _ in c]))
                for c in best)
            assert ok


class TestMedianDepth:
    def test_odd_count(self):
        comp = np.ones((1, 3), dtype=bool)
        assert median_depth(comp, np.array([[1.0, 5.0, 2.0]])) == 2.0

    def test_even_count_averages(self):
        comp = np.ones((1, 4), dtype=bool)
        assert median_depth(comp, np.array([[1.0, 2.0, 3.0, 4.0]])) == 2.5

    def test_zeros_excluded(self):
        comp = np.ones((1, 4), dtype=bool)
        assert median_depth(comp, np.array([[0.0, 0.0, 2.0, 0.0]])) == 2.0

    def test_all_invalid(self):
        comp = np.ones((1, 2), dtype=bool)
        assert median_depth(comp, np.zeros((1, 2))) is None

    def test_robust_to_minority_outliers(self):
        # up to 49% corrupted pixels leave the median within the true band
        rng = np.random.default_rng(1)
        depth = np.full((1, 101), 2.0) + rng.normal(0, 0.005, (1, 101))
        depth[0, :49] = 6.0
        comp = np.ones_like(depth, dtype=bool)
        assert median_depth(comp, depth) == pytest.approx(2.0, abs=0.05)


class TestBackprojection:
    def test_principal_point(self):
        np.testing.assert_allclose(backproject(K.cx, K.cy, 2.0, K), [0, 0, 2.0])

    def test_substitution(self):
        p = backproject(920.0, 540.0, 1.5, K)
        np.testing.assert_allclose(p, [600 * 1.5 / 600, 300 * 1.5 / 600, 1.5])

    def test_nonpositive_depth_rejected(self):
        with pytest.raises(ValueError):
            backproject(0.0, 0.0, 0.0, K)

    @given(st.floats(0, 640), st.floats(0, 480), st.floats(0.1, 10))
    @settings(max_examples=100, deadline=None)
    def test_project_round_trip(self, u, v, d):
        p = backproject(u, v, d, K)
        u2, v2 = project(p, K)
        assert u2 == pytest.approx(u, abs=1e-9)
        assert v2 == pytest.approx(v, abs=1e-9)


class TestCameraToEe:
    def test_identity(self):
        p = camera_to_ee(np.array([1.0, 2.0, 3.0]), np.eye(3), np.zeros(3))
        np.testing.assert_array_equal(p, [1.0, 2.0, 3.0])

    def test_rigid_transform(self):
        # 90 deg about z plus a shift
        R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        t = np.array([0.1, 0.0, -0.05])
        p = camera_to_ee(np.array([1.0, 0.0, 2.0]), R, t)
        np.testing.assert_allclose(p, [0.1, 1.0, 1.95], atol=1e-12)

    def test_preserves_distances(self):
        rng = np.random.default_rng(2)
        th = 0.7
        R = np.array([[np.cos(th), -np.sin(th), 0],
                      [np.sin(th), np.cos(th), 0], [0, 0, 1.0]])
        a, b = rng.normal(size=(2, 3))
        d0 = np.linalg.norm(a - b)
        d1 = np.linalg.norm(camera_to_ee(a, R, np.ones(3)) -
                            camera_to_ee(b, R, np.ones(3)))
        assert d1 == pytest.approx(d0, abs=1e-12)

    def test_improper_rotation_rejected(self):
        with pytest.raises(ValueError):
            camera_to_ee(np.zeros(3), np.diag([1.0, 1.0, -1.0]), np.zeros(3))


class TestJumpFilter:
    def test_first_estimate_accepted(self):
        f = JumpFilter()
        out, ok = f(np.array([0.0, 0.0, 2.0]))
        assert ok

    def test_small_step_accepted(self):
        f = JumpFilter(max_jump=0.5)
        f(np.array([0.0, 0.0, 2.0]))
        out, ok = f(np.array([0.0, 0.0, 2.3]))
        assert ok and out[2] == 2.3

    def test_jump_rejected_holds_previous(self):
        f = JumpFilter(max_jump=0.5)
        f(np.array([0.0, 0.0, 2.0]))
        out, ok = f(np.array([0.0, 0.0, 4.0]))
        assert not ok
        np.testing.assert_array_equal(out, [0.0, 0.0, 2.0])

    def test_forced_reacquisition(self):
        f = JumpFilter(max_jump=0.5, max_rejections=3)
        f(np.array([0.0, 0.0, 2.0]))
        for _ in range(3):
            _, ok = f(np.array([0.0, 0.0, 4.0]))
            assert not ok
        out, ok = f(np.array([0.0, 0.0, 4.0]))
        assert ok and out[2] == 4.0

    def test_reset(self):
        f = JumpFilter(max_jump=0.5)
        f(np.array([0.0, 0.0, 2.0]))
        f.reset()
        _, ok = f(np.array([0.0, 0.0, 9.0]))
        assert ok


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    path = generate_corpus(out, n_frames=30, seed=0, outlier_frames=(12, 13))
    return path


class TestCorpusEndToEnd:
    def test_centroid_within_one_pixel(self, corpus):
        for rgb, depth, meta in load_corpus(corpus):
            if meta["truth"]["outlier"]:
                continue
            res = detect_frame(rgb, depth, RED, DEFAULT_INTRINSICS)
            assert res.found
            assert abs(res.u - meta["truth"]["u"]) <= 1.0
            assert abs(res.v - meta["truth"]["v"]) <= 1.0

    def test_3d_error_under_2cm(self, corpus):
        K_m, R, t = corpus_intrinsics(corpus)
        for rgb, depth, meta in load_corpus(corpus):
            if meta["truth"]["outlier"]:
                continue
            res = detect_frame(rgb, depth, RED, K_m,
                               extrinsic_rotation=R, extrinsic_translation=t)
            err = np.linalg.norm(res.point_ee -
                                 np.asarray(meta["truth"]["point_cam"]))
            assert err <= 0.02

    def test_jump_filter_suppresses_outlier_frames(self, corpus):
        K_m, R, t = corpus_intrinsics(corpus)
        filt = JumpFilter(max_jump=0.5, max_rejections=3)
        rejected = []
        for i, (rgb, depth, meta) in enumerate(load_corpus(corpus)):
            res = detect_frame(rgb, depth, RED, K_m,
                               extrinsic_rotation=R, extrinsic_translation=t)
            if not res.found:
                continue
            _, ok = filt(res.point_ee)
            if not ok:
                rejected.append(i)
        assert set(rejected) == {12, 13}

    def test_deterministic_regeneration(self, corpus, tmp_path):
        path2 = generate_corpus(tmp_path, n_frames=30, seed=0,
                                outlier_frames=(12, 13))
        for (r1, d1, m1), (r2, d2, m2) in zip(load_corpus(corpus),
                                              load_corpus(path2)):
            np.testing.assert_array_equal(r1, r2)
            np.testing.assert_array_equal(d1, d2)

    def test_version_gate(self, corpus, tmp_path):
        import json
        bad = json.loads(corpus.read_text())
        bad["version"] = 99
        p = tmp_path / "manifest.json"
        p.write_text(json.dumps(bad))
        with pytest.raises(ValueError):
            list(load_corpus(p))
