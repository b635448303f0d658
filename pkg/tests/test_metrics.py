import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import naive_otsu
from hiersal.exceptions import DimensionError, EmptyGroundTruth, MissingPair
from hiersal.imgcore import save_gray, to_uint8
from hiersal.metrics import (
    dataset_report,
    evaluate_arrays,
    f_measure,
    mae,
    otsu_threshold,
    pr_sweep,
    scores,
    scores_csv,
    threshold_counts,
    write_report,
)


def hand_case():
    """4x4 case with TP=4, FP=2, FN=2."""
    gt = np.zeros((4, 4), bool)
    gt[0, :] = True
    gt[1, :2] = True
    pred = np.zeros((4, 4))
    pred[0, :] = 1.0
    pred[2, :2] = 1.0
    return pred, gt


class TestScores:
    def test_hand_case(self):
        pred, gt = hand_case()
        s = scores(pred, gt)
        assert s.precision == 2 / 3 and s.recall == 2 / 3
        assert s.f1 == pytest.approx(2 / 3, abs=1e-15)
        assert s.mae == 4 / 16

    def test_identity_and_complement(self):
        gt = np.zeros((4, 4), bool)
        gt[1:3, 1:3] = True
        s = scores(gt.astype(float), gt)
        assert (s.f1, s.mae) == (1.0, 0.0)
        assert scores(1.0 - gt, gt).mae == 1.0

    def test_mae_continuous(self):
        gt = np.array([[True, False]])
        assert mae(np.array([[0.75, 0.25]]), gt) == 0.25

    @given(arrays(np.float64, (5, 5), elements=st.floats(0, 1)), arrays(np.float64, (5, 5), elements=st.floats(0, 1)))
    def test_mae_properties(self, a, b):
        assert mae(a, a) == 0.0
        assert mae(a, b) == pytest.approx(mae(b, a), abs=1e-15)

    @given(st.floats(0.01, 1), st.floats(0.01, 1))
    def test_f1_is_harmonic_mean(self, p, r):
        assert f_measure(p, r) == pytest.approx(2 * p * r / (p + r))

    def test_empty_ground_truth(self):
        with pytest.raises(EmptyGroundTruth):
            pr_sweep(np.zeros((2, 2)), np.zeros((2, 2), bool))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            scores(np.zeros((2, 2)), np.zeros((3, 2), bool))


class TestPrSweep:
    def test_binary_map_equals_gt(self):
        gt = np.zeros((5, 5), bool)
        gt[1:4, 2:] = True
        c = pr_sweep(gt.astype(float), gt)
        assert (c.precision[1:] == 1).all() and (c.recall[1:] == 1).all()
        assert c.recall[0] == 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_counts_match_pixel_loop(self, seed):
        rng = np.random.default_rng(seed)
        smap = rng.random((8, 8))
        gt = rng.random((8, 8)) < 0.4
        tp, fp, fn = threshold_counts(smap, gt)
        q = to_uint8(smap)
        for t in range(256):
            sel = [(q[y, x] >= t, gt[y, x]) for y in range(8) for x in range(8)]
            assert tp[t] == sum(s and g for s, g in sel)
            assert fp[t] == sum(s and not g for s, g in sel)
            assert fn[t] == sum((not s) and g for s, g in sel)
        c = pr_sweep(smap, gt)
        assert (np.diff(c.recall) <= 0).all()
        assert (np.diff(tp + fp) <= 0).all()


class TestOtsu:
    def test_two_modes(self):
        smap = np.full((4, 4), 0.1)
        smap[:, 2:] = 0.9
        t, degenerate = otsu_threshold(smap)
        q = to_uint8(smap)
        assert not degenerate
        assert q.min() < t <= q.max()
        assert t == naive_otsu(np.bincount(q.ravel(), minlength=256))

    def test_constant(self):
        assert otsu_threshold(np.full((3, 3), 0.4)) == (0, True)

    def test_binary_tie_goes_lowest(self):
        smap = np.zeros((2, 2))
        smap[0] = 1.0
        assert otsu_threshold(smap) == (1, False)

    @pytest.mark.parametrize("seed", range(10))
    def test_exhaustive_scan(self, seed):
        rng = np.random.default_rng(seed)
        smap = np.clip(rng.normal(0.4, 0.2, (16, 16)) + (rng.random((16, 16)) < 0.3) * 0.4, 0, 1)
        t, _ = otsu_threshold(smap)
        assert t == naive_otsu(np.bincount(to_uint8(smap).ravel(), minlength=256))


def write_pair(map_dir, gt_dir, name, smap, gt):
    save_gray(map_dir / f"{name}.png", smap)
    save_gray(gt_dir / f"{name}.png", gt.astype(float))


class TestDatasetReport:
    def test_single_image(self, tmp_path):
        pred, gt = hand_case()
        (tmp_path / "m").mkdir()
        (tmp_path / "g").mkdir()
        write_pair(tmp_path / "m", tmp_path / "g", "a", pred, gt)
        r = dataset_report(tmp_path / "m", tmp_path / "g")
        assert r.mean == scores(pred, gt)
        np.testing.assert_array_equal(r.curve.precision, pr_sweep(pred, gt).precision)

    def test_mean_of_two(self):
        gt = np.zeros((2, 4), bool)
        gt[:, :2] = True
        half = np.zeros((2, 4))
        half[:, :] = gt
        half[:, 2:] = 1.0  # selects everything: precision 1/2, recall 1, F1 2/3
        perfect = gt.astype(float)
        r = evaluate_arrays([("b", half, gt), ("a", perfect, gt)])
        assert r.mean.f1 == pytest.approx((1.0 + 2 / 3) / 2)
        assert [n for n, _ in r.per_image] == ["a", "b"]

    def test_order_invariance(self, rng):
        items = [(f"i{k}", rng.random((6, 6)), rng.random((6, 6)) < 0.5) for k in range(4)]
        a, b = evaluate_arrays(items), evaluate_arrays(items[::-1])
        assert scores_csv(a) == scores_csv(b)
        np.testing.assert_array_equal(a.curve.recall, b.curve.recall)

    def test_gt_suffix_and_missing(self, tmp_path):
        m, g = tmp_path / "m", tmp_path / "g"
        m.mkdir()
        g.mkdir()
        pred, gt = hand_case()
        save_gray(m / "x.png", pred)
        save_gray(g / "x_gt.png", gt.astype(float))
        save_gray(m / "lonely.png", pred)
        r = dataset_report(m, g)
        assert [n for n, _ in r.per_image] == ["x"]
        assert r.errors and r.errors[0][0] == "lonely"

    def test_empty_dirs(self, tmp_path):
        (tmp_path / "m").mkdir()
        (tmp_path / "g").mkdir()
        with pytest.raises(MissingPair):
            dataset_report(tmp_path / "m", tmp_path / "g")

    def test_csv_bytes_stable(self, tmp_path, rng):
        items = [(f"i{k}", rng.random((6, 6)), rng.random((6, 6)) < 0.5) for k in range(3)]
        r = evaluate_arrays(items)
        s1, c1 = (p.read_bytes() for p in write_report(r, tmp_path / "r1"))
        s2, c2 = (p.read_bytes() for p in write_report(evaluate_arrays(items), tmp_path / "r2"))
        assert s1 == s2 and c1 == c2
        assert b"\r" not in s1
        assert c1.count(b"\n") == 257
