"""Calibration summaries for out-of-sample probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde, rankdata

from .enet import PROB_EPS

__all__ = [
    "RocCurve",
    "accuracy_at",
    "negative_log_likelihood",
    "roc",
    "auc",
    "histogram_by_class",
    "kde_silverman",
]


def _unpack(records):
    records = list(records)
    if not records:
        raise ValueError("no records")
    y = np.array([r[0] for r in records], dtype=float)
    p = np.array([r[1] for r in records], dtype=float)
    return y, p


def accuracy_at(records, cut: float = 0.5) -> tuple[float, dict[int, float]]:
    """Overall and per-class correct-classification rates; ``p >= cut`` predicts class 1.

    ``records`` is an iterable of ``(label, p_hat)``. A class with no records
    gets rate ``nan``.
    """
    y, p = _unpack(records)
    correct = (p >= cut) == (y == 1)
    per_class = {}
    for cls in (0, 1):
        mask = y == cls
        per_class[cls] = float(correct[mask].mean()) if mask.any() else float("nan")
    return float(correct.mean()), per_class


def negative_log_likelihood(records) -> float:
    y, p = _unpack(records)
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def auc(labels, scores) -> float:
    """Concordance probability of class-1 over class-0 scores, ties counted one half.

    Computed from mid-ranks (Mann-Whitney), which equals the all-pairs count.
    """
    y = np.asarray(labels, dtype=float)
    s = np.asarray(scores, dtype=float)
    n1 = int(np.sum(y == 1))
    n0 = int(np.sum(y == 0))
    if n1 == 0 or n0 == 0:
        raise ValueError("ROC analysis needs both classes")
    ranks = rankdata(s)
    # twice the U statistic is an exact integer, so the division is the only rounding
    u2 = 2.0 * ranks[y == 1].sum() - n1 * (n1 + 1)
    return float(u2 / (2.0 * n1 * n0))


def roc(records) -> RocCurve:
    """Empirical ROC curve swept over the distinct scores, from (0, 0) to (1, 1)."""
    y, p = _unpack(records)
    area = auc(y, p)
    n1 = np.sum(y == 1)
    n0 = np.sum(y == 0)
    cuts = np.unique(p)[::-1]
    tpr = [0.0]
    fpr = [0.0]
    for c in cuts:
        hit = p >= c
        tpr.append(float(np.sum(hit & (y == 1)) / n1))
        fpr.append(float(np.sum(hit & (y == 0)) / n0))
    return RocCurve(np.array(fpr), np.array(tpr), np.r_[np.inf, cuts], area)


def histogram_by_class(records, bins: int = 10) -> list[tuple[float, float, int, int]]:
    """Back-to-back histogram data: ``(bin_lo, bin_hi, count_class0, count_class1)`` on [0, 1]."""
    y, p = _unpack(records)
    edges = np.linspace(0.0, 1.0, bins + 1)
    c0, _ = np.histogram(p[y == 0], edges)
    c1, _ = np.histogram(p[y == 1], edges)
    return [(float(edges[i]), float(edges[i + 1]), int(c0[i]), int(c1[i])) for i in range(bins)]


def kde_silverman(values, grid=None) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian kernel density with Silverman's bandwidth, evaluated on ``grid`` (default 201 points on [0, 1])."""
    values = np.asarray(values, dtype=float)
    grid = np.linspace(0.0, 1.0, 201) if grid is None else np.asarray(grid, dtype=float)
    if values.size < 2 or np.ptp(values) == 0:
        # a point mass has no bandwidth; reported as an all-zero density
        return grid, np.zeros_like(grid)
    return grid, gaussian_kde(values, bw_method="silverman")(grid)
