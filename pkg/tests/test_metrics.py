import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from songattr.enet import PROB_EPS
from songattr.metrics import accuracy_at, auc, histogram_by_class, kde_silverman, negative_log_likelihood, roc


def brute_auc(labels, scores):
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return total / (len(pos) * len(neg))


labelled_scores = st.lists(
    st.tuples(st.integers(0, 1), st.sampled_from([i / 20 for i in range(21)])), min_size=2, max_size=40
).filter(lambda r: len({y for y, _ in r}) == 2)


class TestAccuracy:
    def test_separated(self):
        assert accuracy_at([(0, 0.1), (1, 0.9)])[0] == 1.0

    def test_tie_at_cut_is_class_one(self):
        overall, per = accuracy_at([(0, 0.4), (1, 0.4)])
        assert (overall, per) == (0.5, {0: 1.0, 1: 0.0})
        assert accuracy_at([(1, 0.5)])[0] == 1.0

    def test_empty(self):
        with pytest.raises(ValueError):
            accuracy_at([])


class TestNll:
    def test_examples(self):
        assert negative_log_likelihood([(0, 0.5), (1, 0.5)]) == pytest.approx(2 * math.log(2))
        assert negative_log_likelihood([(0, 0.25), (1, 0.75)]) == pytest.approx(0.575364, abs=1e-6)
        assert negative_log_likelihood([(1, 1.0)]) == pytest.approx(PROB_EPS, rel=1e-3)

    def test_perfect_limit(self):
        n = 30
        records = [(i % 2, float(i % 2)) for i in range(n)]
        assert negative_log_likelihood(records) == pytest.approx(-n * math.log(1 - PROB_EPS))


class TestRoc:
    def test_examples(self):
        assert auc([0, 0, 1, 1], [0.1, 0.2, 0.3, 0.4]) == 1.0
        assert auc([0, 0, 1, 1], [0.4, 0.3, 0.2, 0.1]) == 0.0
        assert auc([0, 0, 1, 1], [0.1, 0.6, 0.6, 0.9]) == 0.875

    def test_single_class(self):
        with pytest.raises(ValueError):
            roc([(1, 0.2), (1, 0.3)])

    @given(labelled_scores)
    def test_matches_brute_force(self, records):
        y, s = zip(*records)
        assert auc(y, s) == pytest.approx(brute_auc(y, s), abs=1e-12)

    @given(labelled_scores)
    def test_monotone_transform_and_swap(self, records):
        y, s = map(np.array, zip(*records))
        base = auc(y, s)
        assert auc(y, np.exp(3 * s) - 7) == pytest.approx(base, abs=1e-12)
        assert auc(1 - y, -s) == pytest.approx(base, abs=1e-12)

    @given(labelled_scores)
    def test_curve_shape(self, records):
        curve = roc(records)
        assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)
        assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)

    @given(st.lists(st.integers(0, 1), min_size=2, max_size=30), st.randoms(use_true_random=False))
    def test_trapezoid_equals_concordance_without_ties(self, labels, rnd):
        assume(len(set(labels)) == 2)
        scores = rnd.sample(range(1000), len(labels))
        curve = roc(list(zip(labels, [s / 1000 for s in scores])))
        area = float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1]) / 2))
        assert abs(area - curve.auc) < 1e-12


class TestDensities:
    def test_histogram(self):
        h = histogram_by_class([(0, 0.05), (0, 0.15), (1, 0.95), (1, 1.0)], bins=10)
        assert h[0] == (0.0, 0.1, 1, 0)
        assert h[1][2:] == (1, 0)
        assert h[9][2:] == (0, 2)
        assert sum(c0 + c1 for *_, c0, c1 in h) == 4

    def test_kde_matches_hand_formula(self):
        v = np.array([0.2, 0.35, 0.4, 0.8])
        grid = np.array([0.0, 0.3, 0.5, 1.0])
        _, dens = kde_silverman(v, grid)
        n = v.size
        sd = v.std(ddof=1)
        # scipy's Silverman factor (n * 3/4)^(-1/5) applied to the sample sd
        h = sd * (n * 3 / 4) ** (-1 / 5)
        want = np.exp(-0.5 * ((grid[:, None] - v) / h) ** 2).sum(axis=1) / (n * h * math.sqrt(2 * math.pi))
        np.testing.assert_allclose(dens, want, rtol=1e-10)

    def test_kde_point_mass(self):
        grid, dens = kde_silverman([0.5, 0.5, 0.5])
        assert grid.shape == (201,) and not dens.any()
