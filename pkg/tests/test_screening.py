from dataclasses import replace
from math import comb, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from songattr.corpus import Author, Segment, Song
from songattr.features import build_matrix
from songattr.music import Chord, Key, PitchClass
from songattr.screening import Table2x2, pearson_chi2, screen, simulate_null_pvalue, table_for


def chi2_by_cells(a, b, c, d):
    """Textbook sum of (O - E)^2 / E over the four cells."""
    n = a + b + c + d
    obs = [[a, b], [c, d]]
    rows = [a + b, c + d]
    cols = [a + c, b + d]
    return sum((obs[i][j] - rows[i] * cols[j] / n) ** 2 / (rows[i] * cols[j] / n)
               for i in range(2) for j in range(2))


def exact_conditional_p(t):
    """Fixed-margin p-value by enumerating every admissible top-left cell."""
    r0, r1 = t.a + t.b, t.c + t.d
    c0 = t.a + t.c
    n = t.n
    obs = chi2_by_cells(t.a, t.b, t.c, t.d)
    total = 0.0
    for a in range(max(0, c0 - r1), min(r0, c0) + 1):
        prob = comb(r0, a) * comb(r1, c0 - a) / comb(n, c0)
        if chi2_by_cells(a, r0 - a, c0 - a, r1 - c0 + a) >= obs - 1e-9:
            total += prob
    return total


class TestChi2:
    @pytest.mark.parametrize("cells,value", [((10, 10, 10, 10), 0.0), ((20, 0, 0, 20), 40.0), ((5, 0, 0, 5), 10.0)])
    def test_examples(self, cells, value):
        assert pearson_chi2(Table2x2(*cells)) == pytest.approx(value, abs=1e-12)

    @given(st.tuples(*[st.integers(1, 30)] * 4))
    def test_matches_cell_sum(self, cells):
        assert pearson_chi2(Table2x2(*cells)) == pytest.approx(chi2_by_cells(*cells), rel=1e-10)

    def test_degenerate(self):
        assert pearson_chi2(Table2x2(0, 5, 0, 5)) == 0.0
        assert simulate_null_pvalue(Table2x2(0, 5, 0, 5)) == 1.0


class TestSimulatedP:
    def test_independent_table_is_one(self):
        assert simulate_null_pvalue(Table2x2(10, 10, 10, 10), B=500, seed=3) == 1.0

    @pytest.mark.parametrize("cells", [(5, 0, 0, 5), (3, 2, 2, 3), (7, 2, 3, 8)])
    def test_against_exact_enumeration(self, cells):
        t = Table2x2(*cells)
        exact = exact_conditional_p(t)
        if cells == (5, 0, 0, 5):
            assert exact == pytest.approx(2 / 252)
        B = 10_000
        got = simulate_null_pvalue(t, B=B, seed=11)
        se = sqrt(max(exact * (1 - exact), 1e-12) / B)
        assert abs(got - exact) <= 3 * se + 1 / (B + 1)

    @given(st.tuples(*[st.integers(0, 15)] * 4), st.integers(1, 200), st.integers(0, 2**32))
    @settings(max_examples=60, deadline=None)
    def test_bounds_and_symmetry(self, cells, B, seed):
        t = Table2x2(*cells)
        p = simulate_null_pvalue(t, B=B, seed=seed)
        assert 1 / (B + 1) <= p <= 1
        # X^2 is symmetric under swapping labels, so the same draws give the same count
        assert simulate_null_pvalue(t.swap_labels(), B=B, seed=seed) == p

    def test_rejects_bad_B(self):
        with pytest.raises(ValueError):
            simulate_null_pvalue(Table2x2(1, 1, 1, 1), B=0)

    def test_table_for(self):
        x = np.array([0, 1, 1, 0, 1])
        y = np.array([0, 0, 1, 1, 1])
        assert table_for(x, y) == Table2x2(1, 1, 1, 2)


def _matrix(columns, labels):
    songs = [Song(f"s{i}", "t", Author.MCCARTNEY if y else Author.LENNON,
                  (Segment(Key(PitchClass(0)), (Chord(PitchClass(0)),), ()),)) for i, y in enumerate(labels)]
    m = build_matrix(songs)
    cells = np.array(columns, dtype=np.int8).T
    return replace(m, features=m.features[:cells.shape[1]], cells=cells)


class TestScreen:
    labels = [0] * 10 + [1] * 10
    cols = [labels, [0, 1] * 10, [1] * 20, [0] * 5 + [1] * 5 + [0] * 4 + [1] * 6]

    def test_threshold_one_keeps_all_nondegenerate(self):
        res = screen(_matrix(self.cols, self.labels), threshold=1.0, B=200, seed=1)
        assert [r.retained for r in res] == [True, True, False, True]
        assert res[2].p_value == 1.0

    def test_strong_and_null_columns(self):
        res = screen(_matrix(self.cols, self.labels), threshold=0.10, B=2000, seed=1)
        assert res[0].retained and res[0].p_value < 0.001
        assert not res[1].retained and res[1].p_value == 1.0
        assert res[1].statistic == 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 1), min_size=20, max_size=20), min_size=1, max_size=6),
           st.integers(0, 1000), st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_monotone_and_order_free(self, cols, seed, t1, t2):
        m = _matrix(cols, self.labels)
        lo, hi = sorted((t1, t2))
        a = screen(m, lo, B=300, seed=seed)
        b = screen(m, hi, B=300, seed=seed)
        assert all(r.retained <= s.retained for r, s in zip(a, b))
        for j, r in enumerate(a):
            degenerate = table_for(m.cells[:, j], m.labels).degenerate
            assert r.retained == (not degenerate and r.p_value <= lo)
        # reversing column order yields the same per-feature results
        rev = replace(m, features=m.features[::-1], cells=m.cells[:, ::-1])
        assert screen(rev, lo, B=300, seed=seed) == a[::-1]

    def test_errors(self):
        m = _matrix(self.cols, self.labels)
        with pytest.raises(ValueError):
            screen(m, threshold=0.0)
        with pytest.raises(ValueError):
            screen(replace(m, labels=np.full(20, -1, dtype=np.int8)))
