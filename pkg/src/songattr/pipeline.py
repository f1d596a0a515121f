"""Two-stage attribution: screening threshold chosen by leave-one-out, then
elastic-net logistic regression tuned by stratified k-fold CV.

Every model fitted anywhere in the procedure is a pure function of the set of
training songs (and the screening threshold). Seeds are derived from the
training song ids, so the same subset reached through different nesting paths
gives the same model and is fitted once per engine.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import Corpus, Song
from .enet import PROB_EPS, TuningPair, cv_select
from .features import FeatureMatrix, build_matrix, extract_features, prevalence_filter, vector_for
from .metrics import auc
from .screening import ScreeningResult, screen
from .seeding import derive_seed

__all__ = [
    "PipelineConfig",
    "SubsetModel",
    "ThresholdSelection",
    "FinalFit",
    "LooRecord",
    "PredictionReport",
    "prepare_matrix",
    "select_threshold",
    "fit_final",
    "final_details",
    "loo_calibration",
    "predict_with_ci",
    "calibrate_and_predict",
    "variable_importance",
]

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (1.0, 0.75, 0.50, 0.25, 0.10)
DEFAULT_ALPHAS = tuple(round(0.1 * i, 1) for i in range(11))


@dataclass(frozen=True)
class PipelineConfig:
    threshold_grid: tuple[float, ...] = DEFAULT_THRESHOLDS
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHAS
    n_lambda: int = 100
    min_ratio: float = 0.01
    k_folds: int = 5
    mc_iterations: int = 10_000
    min_count: int = 5
    max_count: int = 66
    seed: int = 0
    one_se: bool = False

    def __post_init__(self):
        grid = tuple(sorted({float(t) for t in self.threshold_grid}, reverse=True))
        if not grid or any(not 0 < t <= 1 for t in grid):
            raise ValueError(f"threshold grid must be non-empty with values in (0, 1]: {self.threshold_grid}")
        alphas = tuple(float(a) for a in self.alpha_grid)
        if not alphas or any(not 0 <= a <= 1 for a in alphas):
            raise ValueError(f"alpha grid must be non-empty with values in [0, 1]: {self.alpha_grid}")
        if self.n_lambda < 2:
            raise ValueError("n_lambda must be at least 2")
        if not 0 < self.min_ratio < 1:
            raise ValueError("min_ratio must be in (0, 1)")
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")
        if self.mc_iterations < 1:
            raise ValueError("mc_iterations must be at least 1")
        if not 0 <= self.min_count < self.max_count:
            raise ValueError("need 0 <= min_count < max_count")
        object.__setattr__(self, "threshold_grid", grid)
        object.__setattr__(self, "alpha_grid", alphas)

    def to_dict(self) -> dict:
        return asdict(self)


def prepare_matrix(corpus: Corpus, cfg: PipelineConfig) -> FeatureMatrix:
    """Feature matrix of a corpus after prevalence filtering on its labeled songs."""
    return prevalence_filter(build_matrix(corpus), cfg.min_count, cfg.max_count)


# ---------------------------------------------------------------- results


@dataclass(frozen=True)
class SubsetModel:
    """A fitted predictor over a subset of matrix columns.

    ``fallback`` is empty for an elastic-net fit, otherwise it names why an
    intercept-only model was used.
    """

    columns: tuple[int, ...]
    codes: tuple[str, ...]
    beta0: float
    beta: np.ndarray
    tuning: TuningPair | None
    fallback: str = ""

    def predict(self, cells) -> np.ndarray:
        cells = np.atleast_2d(np.asarray(cells, dtype=float))
        eta = self.beta0 + cells[:, list(self.columns)] @ self.beta
        return np.clip(1.0 / (1.0 + np.exp(-eta)), PROB_EPS, 1.0 - PROB_EPS)

    @property
    def nonzero(self) -> int:
        return int(np.count_nonzero(self.beta))

    def coefficients(self) -> dict[str, float]:
        return {c: float(b) for c, b in zip(self.codes, self.beta)}


@dataclass(frozen=True)
class ThresholdSelection:
    threshold: float
    ll: dict[float, float]
    # out-of-sample probability per (training song, threshold)
    song_ids: tuple[str, ...]
    predictions: np.ndarray
    fallbacks: tuple[str, ...] = ()


@dataclass(frozen=True)
class FinalFit:
    threshold: float
    selection: ThresholdSelection
    screening: tuple[ScreeningResult, ...]
    model: SubsetModel
    train_ids: tuple[str, ...]

    @property
    def retained_count(self) -> int:
        return sum(r.retained for r in self.screening)


@dataclass(frozen=True)
class LooRecord:
    song_id: str
    true_label: int
    p_hat: float
    threshold_used: float
    retained_feature_count: int
    nonzero_count: int
    ll_by_threshold: dict[float, float] = field(default_factory=dict)
    fallback: str = ""


@dataclass(frozen=True)
class PredictionReport:
    song_id: str
    p_hat: float
    ci_low: float
    ci_high: float
    loo_prediction_set: tuple[float, ...]


# ---------------------------------------------------------------- engine


class _Engine:
    """Memoized fits over row subsets of one feature matrix."""

    def __init__(self, m: FeatureMatrix, cfg: PipelineConfig):
        self.m = m
        self.cfg = cfg
        self.X = m.cells.astype(float)
        self.y = m.labels.astype(float)
        self.rows = tuple(int(r) for r in m.labeled_rows)
        self._screens: dict[tuple, list[ScreeningResult]] = {}
        self._models: dict[tuple, SubsetModel] = {}
        self._selections: dict[tuple, ThresholdSelection] = {}
        self._finals: dict[tuple, FinalFit] = {}

    def screening(self, rows: tuple[int, ...]) -> list[ScreeningResult]:
        if rows not in self._screens:
            sub = self.m.select_rows(rows)
            self._screens[rows] = screen(sub, 1.0, self.cfg.mc_iterations, derive_seed(self.cfg.seed, "screen"))
        return self._screens[rows]

    def retained(self, rows, threshold: float) -> tuple[int, ...]:
        return tuple(j for j, r in enumerate(self.screening(rows)) if r.retained and r.p_value <= threshold)

    def _intercept_only(self, rows, reason: str) -> SubsetModel:
        ybar = float(self.y[list(rows)].mean()) if rows else 0.5
        p = min(max(ybar, PROB_EPS), 1.0 - PROB_EPS)
        return SubsetModel((), (), float(np.log(p / (1.0 - p))), np.zeros(0), None, reason)

    def model(self, rows: tuple[int, ...], threshold: float) -> SubsetModel:
        cols = self.retained(rows, threshold) if rows else ()
        key = (rows, cols)
        if key in self._models:
            return self._models[key]
        y = self.y[list(rows)]
        counts = np.bincount(y.astype(int), minlength=2) if rows else np.zeros(2, dtype=int)
        if not cols:
            result = self._intercept_only(rows, "no features retained")
        elif counts.min() < self.cfg.k_folds:
            result = self._intercept_only(rows, f"a class has fewer than {self.cfg.k_folds} songs")
        else:
            try:
                tuning, _, fitted = self.cv(rows, cols)
                result = SubsetModel(cols, fitted.features, fitted.beta0, fitted.beta, tuning)
            except ValueError as exc:
                result = self._intercept_only(rows, f"elastic net unavailable: {exc}")
        self._models[key] = result
        return result

    def cv(self, rows, cols):
        ids = [self.m.song_ids[r] for r in rows]
        return cv_select(
            self.X[np.ix_(rows, cols)],
            self.y[list(rows)],
            alpha_grid=self.cfg.alpha_grid,
            n_lambda=self.cfg.n_lambda,
            min_ratio=self.cfg.min_ratio,
            k_folds=self.cfg.k_folds,
            seed=derive_seed(self.cfg.seed, "cv", *ids),
            one_se=self.cfg.one_se,
            features=tuple(self.m.features[j].code for j in cols),
        )

    def select_threshold(self, rows: tuple[int, ...]) -> ThresholdSelection:
        if rows in self._selections:
            return self._selections[rows]
        grid = self.cfg.threshold_grid
        preds = np.empty((len(rows), len(grid)))
        fallbacks = []
        for a, i in enumerate(rows):
            sub = tuple(r for r in rows if r != i)
            for b, t in enumerate(grid):
                mdl = self.model(sub, t)
                preds[a, b] = mdl.predict(self.X[i])[0]
                if mdl.fallback:
                    fallbacks.append(f"{self.m.song_ids[i]}@{t}: {mdl.fallback}")
        y = self.y[list(rows)][:, None]
        ll_cols = -(y * np.log(preds) + (1.0 - y) * np.log(1.0 - preds)).sum(axis=0)
        ll = {t: float(v) for t, v in zip(grid, ll_cols)}
        best = grid[0]
        for t in grid[1:]:
            if ll[t] < ll[best]:
                best = t
        sel = ThresholdSelection(best, ll, tuple(self.m.song_ids[r] for r in rows), preds, tuple(fallbacks))
        self._selections[rows] = sel
        return sel

    def fit_final(self, rows: tuple[int, ...]) -> FinalFit:
        if rows in self._finals:
            return self._finals[rows]
        sel = self.select_threshold(rows)
        screening = tuple(
            ScreeningResult(r.feature, r.statistic, r.p_value, r.retained and r.p_value <= sel.threshold)
            for r in self.screening(rows)
        )
        final = FinalFit(sel.threshold, sel, screening, self.model(rows, sel.threshold),
                         tuple(self.m.song_ids[r] for r in rows))
        self._finals[rows] = final
        return final

    def without(self, i: int) -> tuple[int, ...]:
        return tuple(r for r in self.rows if r != i)

    def loo_record(self, i: int) -> LooRecord:
        final = self.fit_final(self.without(i))
        p = float(final.model.predict(self.X[i])[0])
        return LooRecord(
            self.m.song_ids[i],
            int(self.m.labels[i]),
            p,
            final.threshold,
            final.retained_count,
            final.model.nonzero,
            final.selection.ll,
            final.model.fallback,
        )


def _check_labeled(m: FeatureMatrix, minimum: int = 2):
    y = m.labels[m.labeled_rows]
    if y.size < minimum or set(y.tolist()) != {0, 1}:
        raise ValueError("the pipeline needs labeled songs of both classes")


def _chunks(items, n):
    n = max(1, min(n, len(items)))
    size = -(-len(items) // n)
    return [items[k:k + size] for k in range(0, len(items), size)]


def _run_chunks(m, cfg, rows, task, threads: int, engine: _Engine | None = None):
    """Apply ``task(engine, row)`` to every row; one engine per worker chunk.

    A serial run uses ``engine`` when given, so its caches outlive the call.
    """
    def work(chunk):
        eng = _Engine(m, cfg)
        return [task(eng, r) for r in chunk]

    if threads <= 1 or len(rows) < 2:
        eng = engine if engine is not None else _Engine(m, cfg)
        return [task(eng, r) for r in rows]
    from joblib import Parallel, delayed

    parts = Parallel(n_jobs=threads)(delayed(work)(c) for c in _chunks(list(rows), threads))
    return [x for part in parts for x in part]


# ---------------------------------------------------------------- public operations


def select_threshold(m: FeatureMatrix, cfg: PipelineConfig) -> ThresholdSelection:
    """Pick the screening threshold minimizing the leave-one-out negative log-likelihood.

    Ties go to the larger threshold.
    """
    _check_labeled(m)
    eng = _Engine(m, cfg)
    return eng.select_threshold(eng.rows)


def fit_final(m: FeatureMatrix, cfg: PipelineConfig) -> FinalFit:
    _check_labeled(m)
    eng = _Engine(m, cfg)
    return eng.fit_final(eng.rows)


def final_details(m: FeatureMatrix, cfg: PipelineConfig, final: FinalFit):
    """CV curve and full fit object behind ``final.model``; ``None`` for an intercept-only fallback."""
    if final.model.fallback:
        return None
    eng = _Engine(m, cfg)
    rows = tuple(m.row_of(s) for s in final.train_ids)
    _, curve, fitted = eng.cv(rows, final.model.columns)
    return curve, fitted


def loo_calibration(m: FeatureMatrix, cfg: PipelineConfig, threads: int = 1) -> list[LooRecord]:
    """Out-of-sample probability for every labeled song, re-running the whole
    procedure (threshold selection included) without it."""
    _check_labeled(m)
    rows = tuple(int(r) for r in m.labeled_rows)
    return _run_chunks(m, cfg, rows, lambda eng, i: eng.loo_record(i), threads)


def _target_cells(m: FeatureMatrix, targets) -> tuple[list[str], np.ndarray]:
    ids, cells = [], []
    for t in targets:
        if isinstance(t, Song):
            ids.append(t.id)
            cells.append(vector_for(extract_features(t), m.features))
        else:
            ids.append(str(t))
            cells.append(m.cells[m.row_of(str(t))])
    return ids, np.array(cells, dtype=float).reshape(len(ids), len(m.features))


def _reports(ids, point, loo) -> list[PredictionReport]:
    out = []
    for k, sid in enumerate(ids):
        lo, hi = np.percentile(loo[:, k], [2.5, 97.5])
        out.append(PredictionReport(sid, float(point[k]), float(lo), float(hi), tuple(float(v) for v in loo[:, k])))
    return out


def predict_with_ci(m: FeatureMatrix, targets, cfg: PipelineConfig, threads: int = 1) -> list[PredictionReport]:
    """Point predictions from the all-songs fit, with 2.5/97.5 percentile
    intervals over the refits that each leave one training song out.

    ``targets`` are song ids present in ``m`` or :class:`Song` objects.
    """
    return calibrate_and_predict(m, targets, cfg, threads)[1]


def calibrate_and_predict(m: FeatureMatrix, targets, cfg: PipelineConfig,
                          threads: int = 1) -> tuple[list[LooRecord], list[PredictionReport]]:
    """:func:`loo_calibration` and :func:`predict_with_ci` together.

    Both rest on the same n leave-one-out procedures, which are run once.
    """
    _check_labeled(m)
    ids, cells = _target_cells(m, targets)

    def task(eng, j):
        rec = eng.loo_record(j)
        return rec, eng.fit_final(eng.without(j)).model.predict(cells)

    eng = _Engine(m, cfg)
    rows = eng.rows
    done = _run_chunks(m, cfg, rows, task, threads, eng)
    records = [d[0] for d in done]
    if not ids:
        return records, []
    point = eng.fit_final(rows).model.predict(cells)
    loo = np.array([d[1] for d in done]).reshape(len(rows), len(ids))
    return records, _reports(ids, point, loo)


def variable_importance(m: FeatureMatrix, features, cfg: PipelineConfig, threads: int = 1,
                        baseline: list[LooRecord] | None = None) -> list[tuple[str, float]]:
    """c-statistic of the leave-one-out probabilities with each feature removed.

    Lower values mean the feature mattered more. Features not among the
    matrix columns leave the procedure unchanged and get the baseline value.
    """
    _check_labeled(m)
    codes = [getattr(f, "code", f) for f in features]
    base = None
    out = []
    for code in codes:
        if code not in m.codes:
            if base is None:
                recs = baseline if baseline is not None else loo_calibration(m, cfg, threads)
                base = auc([r.true_label for r in recs], [r.p_hat for r in recs])
            out.append((code, base))
            continue
        recs = loo_calibration(m.drop_features([code]), cfg, threads)
        out.append((code, auc([r.true_label for r in recs], [r.p_hat for r in recs])))
    return out
