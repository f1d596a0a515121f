"""Sure independence screening with Monte-Carlo chi-squared p-values.

For each binary feature a 2x2 table against authorship is formed and its
Pearson statistic is referred to a null distribution simulated with both
margins fixed. Features whose p-value is at most the threshold are kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .features import FeatureId, FeatureMatrix
from .seeding import derive_seed

__all__ = ["Table2x2", "ScreeningResult", "pearson_chi2", "simulate_null_pvalue", "screen", "table_for"]

# simulated statistics within this relative distance of the observed one count as ties
_ALMOST_ONE = 1.0 - 64 * np.finfo(float).eps


@dataclass(frozen=True)
class Table2x2:
    """Counts with rows y = 0, 1 and columns x = 0, 1::

        a b
        c d
    """

    a: int
    b: int
    c: int
    d: int

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def rows(self) -> tuple[int, int]:
        return self.a + self.b, self.c + self.d

    @property
    def cols(self) -> tuple[int, int]:
        return self.a + self.c, self.b + self.d

    @property
    def degenerate(self) -> bool:
        return 0 in self.rows or 0 in self.cols

    def swap_labels(self) -> Table2x2:
        return Table2x2(self.c, self.d, self.a, self.b)


@dataclass(frozen=True)
class ScreeningResult:
    feature: FeatureId
    statistic: float
    p_value: float
    retained: bool


def _chi2_from_a(a, r0: int, c0: int, n: int):
    """Pearson X^2 of the table with margins (r0, n-r0) x (c0, n-c0) and top-left cell ``a``."""
    r1, c1 = n - r0, n - c0
    # all four (O - E)^2 share |a - r0*c0/n|
    dev2 = (np.asarray(a, dtype=float) - r0 * c0 / n) ** 2
    return dev2 * n * (1.0 / (r0 * c0) + 1.0 / (r0 * c1) + 1.0 / (r1 * c0) + 1.0 / (r1 * c1))


def pearson_chi2(t: Table2x2) -> float:
    """Pearson statistic without continuity correction; 0 for a degenerate table."""
    if t.degenerate:
        return 0.0
    return float(_chi2_from_a(t.a, t.rows[0], t.cols[0], t.n))


@lru_cache(maxsize=1 << 16)
def _simulated_p(a: int, b: int, c: int, d: int, B: int, seed: int) -> float:
    t = Table2x2(a, b, c, d)
    r0, r1 = t.rows
    c0 = t.cols[0]
    n = t.n
    observed = _chi2_from_a(a, r0, c0, n)
    rng = np.random.default_rng(seed)
    sims = rng.hypergeometric(r0, r1, c0, size=B)
    lo = max(0, c0 - r1)
    support = np.arange(lo, min(r0, c0) + 1)
    extreme = _chi2_from_a(support, r0, c0, n) >= _ALMOST_ONE * observed
    hits = int(np.count_nonzero(extreme[sims - lo]))
    return (1 + hits) / (B + 1)


def simulate_null_pvalue(t: Table2x2, B: int = 10_000, seed: int = 0) -> float:
    """Add-one Monte-Carlo p-value ``(1 + #{X2_sim >= X2_obs}) / (B + 1)``.

    Null tables are drawn with both margins fixed, i.e. the top-left cell is
    hypergeometric. A table with an empty row or column returns 1.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    if t.degenerate:
        return 1.0
    # X^2 and its null law are unchanged by swapping labels; fix one orientation
    # so the estimate is too
    cells = min((t.a, t.b, t.c, t.d), (t.c, t.d, t.a, t.b))
    return _simulated_p(*cells, int(B), int(seed))


def table_for(x: np.ndarray, y: np.ndarray) -> Table2x2:
    x = np.asarray(x).astype(bool)
    y = np.asarray(y).astype(bool)
    return Table2x2(
        int(np.sum(~y & ~x)), int(np.sum(~y & x)), int(np.sum(y & ~x)), int(np.sum(y & x))
    )


def screen(m: FeatureMatrix, threshold: float = 1.0, B: int = 10_000, seed: int = 0) -> list[ScreeningResult]:
    """Screen every column of ``m`` against its labels (labeled rows only).

    Each feature draws from its own stream seeded by ``(seed, feature code)``.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    rows = m.labeled_rows
    if rows.size == 0:
        raise ValueError("screening needs labeled rows")
    y = m.labels[rows].astype(bool)
    X = m.cells[rows].astype(bool)
    # column counts of the four cells, for every feature at once
    d = np.count_nonzero(X[y], axis=0)
    b = np.count_nonzero(X[~y], axis=0)
    c = int(y.sum()) - d
    a = int((~y).sum()) - b
    out = []
    for j, feat in enumerate(m.features):
        t = Table2x2(int(a[j]), int(b[j]), int(c[j]), int(d[j]))
        p = simulate_null_pvalue(t, B, _feature_seed(seed, feat.code))
        out.append(ScreeningResult(feat, pearson_chi2(t), p, (not t.degenerate) and p <= threshold))
    return out


@lru_cache(maxsize=4096)
def _feature_seed(seed: int, code: str) -> int:
    return derive_seed(seed, "screen", code)
