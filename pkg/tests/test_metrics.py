import itertools

import numpy as np
import pytest

from redgp.errors import DataError
from redgp.metrics import (METRIC_NAMES, RankedEvaluation, aupr, auroc, average_precision,
                           evaluate_detector, pr_curve)
from oracles import ap_oracle, aupr_oracle, auroc_oracle, threshold_points


def ev(scores, positives):
    return RankedEvaluation(np.asarray(scores, float), np.asarray(positives, bool))


class TestRankedEvaluation:
    def test_requires_both_classes(self):
        with pytest.raises(DataError):
            ev([0.1, 0.2], [True, True])
        with pytest.raises(DataError):
            ev([0.1, 0.2], [False, False])

    def test_length_and_finiteness(self):
        with pytest.raises(DataError):
            ev([0.1], [True, False])
        with pytest.raises(DataError):
            ev([np.nan, 0.2], [True, False])


class TestPrCurve:
    def test_perfect(self):
        p, r = pr_curve(ev([4, 3, 2, 1], [1, 1, 0, 0]))
        assert np.all(p[r <= 1][: 3] == 1.0)
        assert average_precision(ev([4, 3, 2, 1], [1, 1, 0, 0])) == 1.0
        assert aupr(ev([4, 3, 2, 1], [1, 1, 0, 0])) == 1.0

    def test_total_tie(self):
        e = ev([0.5] * 4, [1, 0, 0, 0])
        p, r = pr_curve(e)
        np.testing.assert_array_equal(p, [0.25, 0.25])
        np.testing.assert_array_equal(r, [0.0, 1.0])
        assert auroc(e) == 0.5

    def test_four_point(self):
        p, r = pr_curve(ev([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]))
        pts = threshold_points([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
        np.testing.assert_allclose(r, [0.0] + [float(a) for a, _ in pts], rtol=0, atol=0)
        np.testing.assert_allclose(p, [1.0] + [float(b) for _, b in pts], rtol=1e-15)
        assert r[0] == 0 and r[-1] == 1


class TestAgainstOracles:
    @pytest.mark.parametrize("n", range(2, 9))
    def test_all_labelings(self, n):
        rng = np.random.default_rng(n)
        for lab in itertools.product((0, 1), repeat=n):
            if 0 < sum(lab) < n:
                draws = [rng.uniform(size=n) for _ in range(3)] + [rng.integers(0, 3, n).astype(float)]
                for s in draws:
                    e = ev(s, lab)
                    s_list = s.tolist()
                    assert average_precision(e) == pytest.approx(float(ap_oracle(s_list, lab)), abs=1e-12)
                    assert aupr(e) == pytest.approx(float(aupr_oracle(s_list, lab)), abs=1e-12)
                    assert auroc(e) == pytest.approx(float(auroc_oracle(s_list, lab)), abs=1e-12)

    def test_ap_differs_from_aupr(self):
        s, lab = [5, 4, 3, 2, 1], [0, 1, 1, 0, 1]
        e = ev(s, lab)
        want_ap = (0.5 + 2 / 3 + 0.6) / 3
        want_aupr = (0.25 + (0.5 + 2 / 3) / 2 + (0.5 + 0.6) / 2) / 3
        assert average_precision(e) == pytest.approx(want_ap, rel=1e-14)
        assert aupr(e) == pytest.approx(want_aupr, rel=1e-14)
        assert aupr(e) != pytest.approx(average_precision(e), abs=0.05)


class TestProperties:
    def test_random_scores_ap_tends_to_rate(self):
        rng = np.random.default_rng(0)
        lab = rng.uniform(size=100_000) < 0.3
        e = ev(rng.uniform(size=100_000), lab)
        assert abs(average_precision(e) - lab.mean()) < 0.02

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        s = rng.normal(size=40)
        lab = rng.uniform(size=40) < 0.4
        a, b = ev(s, lab), ev(np.exp(3 * s) + 7, lab)
        for f in (average_precision, aupr, auroc):
            assert f(a) == f(b)

    def test_auroc_complement(self):
        rng = np.random.default_rng(2)
        s = rng.integers(0, 5, 30).astype(float)
        lab = rng.uniform(size=30) < 0.5
        assert auroc(ev(s, lab)) == pytest.approx(auroc(ev(-s, ~lab)), abs=1e-15)
        assert auroc(ev(s, lab)) == pytest.approx(1 - auroc(ev(-s, lab)), abs=1e-15)

    def test_ap_one_iff_strict_separation(self):
        assert average_precision(ev([3, 2, 1], [1, 1, 0])) == 1.0
        assert average_precision(ev([3, 2, 2], [1, 1, 0])) < 1.0
        assert average_precision(ev([3, 1, 2], [1, 1, 0])) < 1.0


class TestAdversarialDegeneracy:
    def test_mcp_fifty_twenty_five(self):
        rng = np.random.default_rng(3)
        ind = rng.uniform(0.4, 0.99, 20)
        s = np.r_[ind, np.ones(20)]
        adv = np.r_[np.zeros(20, bool), np.ones(20, bool)]
        e = ev(-s, adv)
        assert average_precision(e) == 0.5
        assert aupr(e) == 0.25


class TestEvaluateDetector:
    def test_keys(self):
        res = evaluate_detector([0.9, 0.2, 0.8, 0.1, 0.5, 0.4], [1, 0, 1, 0, 1, 1],
                                ood_mask=[0, 0, 0, 0, 1, 0], adv_mask=[0, 0, 0, 0, 0, 1])
        assert set(res["values"]) == set(METRIC_NAMES)

    def test_six_point_against_oracles(self):
        s = [0.9, 0.3, 0.8, 0.35, 0.6, 0.7]
        c = [1, 0, 1, 1, 0, 1]
        v = evaluate_detector(s, c)["values"]
        neg = [-x for x in s]
        err = [1 - x for x in c]
        assert v["ap_error"] == pytest.approx(float(ap_oracle(neg, err)), abs=1e-14)
        assert v["aupr_error"] == pytest.approx(float(aupr_oracle(neg, err)), abs=1e-14)
        assert v["ap_success"] == pytest.approx(float(ap_oracle(s, c)), abs=1e-14)
        assert v["aupr_success"] == pytest.approx(float(aupr_oracle(s, c)), abs=1e-14)
        assert v["auroc"] == pytest.approx(float(auroc_oracle(neg, err)), abs=1e-14)
        assert "ap_ood" not in v

    def test_perfect_classifier_na(self):
        res = evaluate_detector([0.9, 0.8, 0.7], [1, 1, 1], ood_mask=[0, 0, 1])
        for m in ("ap_error", "aupr_error", "ap_success", "aupr_success", "auroc"):
            assert res["values"][m] is None and res["na_reasons"][m]
        assert res["values"]["ap_ood"] == 1.0

    def test_ood_excludes_adversarial(self):
        s = np.array([0.9, 0.8, 0.1, 0.95])
        c = np.array([1, 0, 1, 1])
        ood = np.array([0, 0, 1, 0], bool)
        adv = np.array([0, 0, 0, 1], bool)
        v = evaluate_detector(s, c, ood, adv)["values"]
        assert v["ap_ood"] == float(ap_oracle([-0.9, -0.8, -0.1], [0, 0, 1]))
        assert v["ap_adversarial"] == float(ap_oracle([-0.9, -0.8, -0.95], [0, 0, 1]))

    def test_overlapping_masks(self):
        with pytest.raises(DataError):
            evaluate_detector([0.1, 0.2], [1, 0], ood_mask=[1, 0], adv_mask=[1, 0])
