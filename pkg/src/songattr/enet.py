"""Elastic-net penalized logistic regression.

Minimizes::

    -(1/n) * loglik(b0, beta) + lam * ((1 - alpha) * ||beta||^2 / 2 + alpha * ||beta||_1)

by iteratively reweighted least squares with cyclic coordinate descent on
internally standardized predictors (unit population variance). The penalty
acts on the standardized coefficients, the intercept is never penalized, and
coefficients are reported back on the original 0/1 scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .seeding import rng_for

__all__ = [
    "PROB_EPS",
    "TuningPair",
    "ElasticNetFit",
    "CvCurve",
    "ConvergenceWarning",
    "objective",
    "smooth_gradient",
    "lambda_path",
    "fit",
    "fit_path",
    "cv_select",
    "stratified_folds",
    "predict_prob",
    "kkt_residuals",
    "standardize",
]

PROB_EPS = 1e-12
TOL = 1e-7
MAX_OUTER = 10_000
MAX_INNER = 100_000
DIVERGENCE = 1e6


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TuningPair:
    alpha: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class ElasticNetFit:
    beta0: float
    beta: np.ndarray
    tuning: TuningPair
    center: np.ndarray
    scale: np.ndarray
    iterations: int = 0
    converged: bool = True
    max_change: float = 0.0
    objective_trace: tuple[float, ...] = ()
    features: tuple[str, ...] = ()

    @property
    def std_beta(self) -> np.ndarray:
        """Coefficients on the standardized scale the penalty acts on."""
        return self.beta * self.scale

    @property
    def std_beta0(self) -> float:
        return self.beta0 + float(self.beta @ self.center)

    def coefficients(self) -> dict[str, float]:
        return {f: float(b) for f, b in zip(self.features, self.beta)}

    def linear_predictor(self, X) -> np.ndarray:
        return self.beta0 + np.asarray(X, dtype=float) @ self.beta


@dataclass(frozen=True)
class CvCurve:
    """Mean held-out negative log-likelihood per observation on a tuning grid."""

    alphas: np.ndarray        # (A,)
    lambdas: np.ndarray       # (A, L)
    mean_nll: np.ndarray      # (A, L)
    se_nll: np.ndarray        # (A, L), standard error across folds
    k_folds: int
    folds: np.ndarray = field(repr=False)  # fold index per observation

    def rows(self):
        for a, alpha in enumerate(self.alphas):
            for l in range(self.lambdas.shape[1]):
                yield float(alpha), float(self.lambdas[a, l]), float(self.mean_nll[a, l]), float(self.se_nll[a, l])


# ---------------------------------------------------------------- primitives


def _sigmoid(eta):
    return 1.0 / (1.0 + np.exp(-eta))


def _clamp(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def _nll_terms(eta, y):
    p = _clamp(_sigmoid(eta))
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def objective(beta0, beta, X, y, alpha: float, lam: float) -> float:
    """Penalized objective on the design ``X`` as given (no standardization)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[1] != beta.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape}, y {y.shape}, beta {beta.shape}")
    loss = float(np.mean(_nll_terms(beta0 + X @ beta, y)))
    penalty = lam * ((1.0 - alpha) * float(beta @ beta) / 2.0 + alpha * float(np.abs(beta).sum()))
    return loss + penalty


def smooth_gradient(beta0, beta, X, y) -> tuple[float, np.ndarray]:
    """Gradient of -(1/n) loglik with respect to (beta0, beta)."""
    X = np.asarray(X, dtype=float)
    resid = _sigmoid(beta0 + X @ np.asarray(beta, dtype=float)) - np.asarray(y, dtype=float)
    n = X.shape[0]
    return float(resid.sum() / n), X.T @ resid / n


def standardize(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns to unit population variance; constant columns get scale 0."""
    X = np.asarray(X, dtype=float)
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    Z = (X - center) / safe
    Z[:, scale == 0] = 0.0
    return np.ascontiguousarray(Z), center, scale


def _null_gradient(Z, y):
    return Z.T @ (y - y.mean()) / Z.shape[0]


def lambda_path(X, y, alpha: float, n_lambda: int = 100, min_ratio: float = 0.01) -> np.ndarray:
    """Log-spaced penalty grid from the smallest all-zero penalty down to ``min_ratio`` of it."""
    Z, _, _ = standardize(X)
    return _lambda_path_std(Z, np.asarray(y, dtype=float), alpha, n_lambda, min_ratio)


def _lambda_path_std(Z, y, alpha, n_lambda, min_ratio):
    if n_lambda < 2:
        raise ValueError("n_lambda must be at least 2")
    lam_max = float(np.max(np.abs(_null_gradient(Z, y)), initial=0.0)) / max(alpha, 1e-3)
    if lam_max <= 0:
        raise ValueError("lambda_max is zero: every column is constant or uncorrelated with y")
    return np.geomspace(lam_max, min_ratio * lam_max, n_lambda)


# ---------------------------------------------------------------- numba kernel


# Kernels take the design transposed (K x n, C order) so that every
# per-column loop walks contiguous memory.


@njit(cache=True, fastmath=True)
def _std_objective(Zt, y, b0, beta, alpha, lam):
    k, n = Zt.shape
    eta = np.full(n, b0)
    for j in range(k):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                eta[i] += Zt[j, i] * bj
    loss = 0.0
    for i in range(n):
        p = 1.0 / (1.0 + math.exp(-eta[i]))
        p = min(max(p, 1e-12), 1.0 - 1e-12)
        loss -= y[i] * math.log(p) + (1.0 - y[i]) * math.log(1.0 - p)
    l1 = 0.0
    l2 = 0.0
    for j in range(k):
        l1 += abs(beta[j])
        l2 += beta[j] * beta[j]
    return loss / n + lam * ((1.0 - alpha) * l2 / 2.0 + alpha * l1)


@njit(cache=True, fastmath=True)
def _solve_one(Zt, y, alpha, lam, b0, beta, tol, max_outer, max_inner, trace):
    """IRLS outer loop with a backtracked proximal-Newton step.

    Updates ``beta`` in place; returns (b0, iterations, converged, max_change).
    """
    k, n = Zt.shape
    l1 = lam * alpha
    l2 = lam * (1.0 - alpha)
    eta = np.empty(n)
    w = np.empty(n)
    r = np.empty(n)
    wz = np.empty(n)
    xwx = np.empty(k)
    cand = np.empty(k)
    tbeta = np.empty(k)
    f_old = _std_objective(Zt, y, b0, beta, alpha, lam)
    n_trace = 0
    if trace.shape[0] > 0:
        trace[0] = f_old
        n_trace = 1
    max_change = np.inf
    it = 0
    converged = False
    while it < max_outer:
        it += 1
        for i in range(n):
            eta[i] = b0
        for j in range(k):
            bj = beta[j]
            if bj != 0.0:
                for i in range(n):
                    eta[i] += Zt[j, i] * bj
        sw = 0.0
        for i in range(n):
            p = 1.0 / (1.0 + math.exp(-eta[i]))
            wi = p * (1.0 - p)
            if wi < 1e-12:
                wi = 1e-12
            w[i] = wi
            sw += wi
            # residual of the working response against the current fit
            r[i] = (y[i] - p) / wi
        for j in range(k):
            s = 0.0
            for i in range(n):
                s += w[i] * Zt[j, i] * Zt[j, i]
            xwx[j] = s / n
            cand[j] = beta[j]
        c0 = b0
        # coordinate descent on the weighted penalized least-squares problem
        inner = 0
        full_sweep = True
        while inner < max_inner:
            inner += 1
            dmax = 0.0
            s = 0.0
            for i in range(n):
                s += w[i] * r[i]
            d = s / sw
            if d != 0.0:
                c0 += d
                for i in range(n):
                    r[i] -= d
                dmax = abs(d)
            for i in range(n):
                wz[i] = w[i] * r[i]
            for j in range(k):
                if xwx[j] == 0.0:
                    continue
                if not full_sweep and cand[j] == 0.0:
                    continue
                s = 0.0
                for i in range(n):
                    s += Zt[j, i] * wz[i]
                u = s / n + xwx[j] * cand[j]
                if u > l1:
                    new = (u - l1) / (xwx[j] + l2)
                elif u < -l1:
                    new = (u + l1) / (xwx[j] + l2)
                else:
                    new = 0.0
                delta = new - cand[j]
                if delta != 0.0:
                    for i in range(n):
                        r[i] -= Zt[j, i] * delta
                        wz[i] = w[i] * r[i]
                    cand[j] = new
                    ad = abs(delta) * math.sqrt(xwx[j])
                    if ad > dmax:
                        dmax = ad
            if dmax < tol * 0.3:
                if full_sweep:
                    break
                full_sweep = True
            else:
                full_sweep = False
        # backtrack so the penalized objective never increases
        step = 1.0
        tb0 = c0
        for j in range(k):
            tbeta[j] = cand[j]
        f_new = _std_objective(Zt, y, tb0, tbeta, alpha, lam)
        halvings = 0
        while f_new > f_old + 1e-15 * (1.0 + abs(f_old)) and halvings < 60:
            step *= 0.5
            halvings += 1
            tb0 = b0 + step * (c0 - b0)
            for j in range(k):
                tbeta[j] = beta[j] + step * (cand[j] - beta[j])
            f_new = _std_objective(Zt, y, tb0, tbeta, alpha, lam)
        if halvings == 60:
            tb0 = b0
            for j in range(k):
                tbeta[j] = beta[j]
            f_new = f_old
        max_change = abs(tb0 - b0)
        bmax = 0.0
        for j in range(k):
            ch = abs(tbeta[j] - beta[j])
            if ch > max_change:
                max_change = ch
            beta[j] = tbeta[j]
            if abs(beta[j]) > bmax:
                bmax = abs(beta[j])
        b0 = tb0
        if n_trace < trace.shape[0]:
            trace[n_trace] = f_new
            n_trace += 1
        f_old = f_new
        if max_change < tol:
            converged = True
            break
        if bmax > DIVERGENCE or abs(b0) > DIVERGENCE:
            break
    return b0, it, converged, max_change


@njit(cache=True)
def _path_kernel(Zt, y, alpha, lambdas, b0, beta, tol, max_outer, max_inner):
    L = lambdas.shape[0]
    k = Zt.shape[0]
    B0 = np.empty(L)
    BETA = np.empty((L, k))
    iters = np.empty(L, dtype=np.int64)
    conv = np.empty(L, dtype=np.bool_)
    change = np.empty(L)
    trace = np.empty(0)
    beta = beta.copy()
    for l in range(L):
        b0, it, ok, ch = _solve_one(Zt, y, alpha, lambdas[l], b0, beta, tol, max_outer, max_inner, trace)
        B0[l] = b0
        BETA[l, :] = beta
        iters[l] = it
        conv[l] = ok
        change[l] = ch
    return B0, BETA, iters, conv, change


@njit(cache=True)
def _cv_kernel(X, y, folds, k_folds, alpha, lambdas, tol, max_outer, max_inner):
    """Summed held-out negative log-likelihood per (fold, penalty) for one alpha."""
    n, k = X.shape
    L = lambdas.shape[0]
    out = np.zeros((k_folds, L))
    for f in range(k_folds):
        n_tr = 0
        for i in range(n):
            if folds[i] != f:
                n_tr += 1
        ytr = np.empty(n_tr)
        center = np.zeros(k)
        scale = np.zeros(k)
        t = 0
        for i in range(n):
            if folds[i] != f:
                ytr[t] = y[i]
                t += 1
                for j in range(k):
                    center[j] += X[i, j]
        for j in range(k):
            center[j] /= n_tr
        for i in range(n):
            if folds[i] != f:
                for j in range(k):
                    d = X[i, j] - center[j]
                    scale[j] += d * d
        n_live = 0
        for j in range(k):
            scale[j] = math.sqrt(scale[j] / n_tr)
            if scale[j] > 0:
                n_live += 1
        live = np.empty(n_live, dtype=np.int64)
        t = 0
        for j in range(k):
            if scale[j] > 0:
                live[t] = j
                t += 1
        Zt = np.empty((n_live, n_tr))
        for a in range(n_live):
            j = live[a]
            t = 0
            for i in range(n):
                if folds[i] != f:
                    Zt[a, t] = (X[i, j] - center[j]) / scale[j]
                    t += 1
        ybar = ytr.mean()
        b0_null = math.log(ybar / (1.0 - ybar))
        g_null = 0.0
        for a in range(n_live):
            s = 0.0
            for i in range(n_tr):
                s += Zt[a, i] * (ytr[i] - ybar)
            g_null = max(g_null, abs(s / n_tr))
        start = 0
        if alpha > 0:
            while start < L and lambdas[start] * alpha >= g_null:
                start += 1
        B0 = np.full(L, b0_null)
        BETA = np.zeros((L, n_live))
        if n_live > 0 and start < L:
            b0s, betas, _, _, _ = _path_kernel(Zt, ytr, alpha, lambdas[start:], b0_null, np.zeros(n_live),
                                               tol, max_outer, max_inner)
            B0[start:] = b0s
            BETA[start:, :] = betas
        for i in range(n):
            if folds[i] != f:
                continue
            for l in range(L):
                eta = B0[l]
                for a in range(n_live):
                    j = live[a]
                    eta += (X[i, j] - center[j]) / scale[j] * BETA[l, a]
                p = 1.0 / (1.0 + math.exp(-eta))
                p = min(max(p, 1e-12), 1.0 - 1e-12)
                out[f, l] -= y[i] * math.log(p) + (1.0 - y[i]) * math.log(1.0 - p)
    return out


# ---------------------------------------------------------------- fitting


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"dimension mismatch: X {X.shape}, y {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be 0/1")
    if y.min() == y.max():
        raise ValueError("fitting requires both classes in y")
    return X, y


def _logit(p):
    return math.log(p / (1.0 - p))


def fit_path(X, y, alpha: float, lambdas, tol: float = TOL, max_outer: int = MAX_OUTER):
    """Warm-started fits along a decreasing penalty sequence, on the standardized scale.

    Returns ``(b0, beta, iterations, converged, max_change, center, scale)`` with
    ``b0`` of shape (L,) and ``beta`` of shape (L, K), both standardized.
    """
    X, y = _check_xy(X, y)
    Z, center, scale = standardize(X)
    return _fit_path_std(Z, center, scale, y, alpha, lambdas, tol, max_outer)


def _fit_path_std(Z, center, scale, y, alpha, lambdas, tol, max_outer):
    lambdas = np.asarray(lambdas, dtype=float)
    L, K = lambdas.shape[0], Z.shape[1]
    b0_null = _logit(y.mean())
    B0 = np.full(L, b0_null)
    BETA = np.zeros((L, K))
    iters = np.zeros(L, dtype=np.int64)
    conv = np.ones(L, dtype=bool)
    change = np.zeros(L)
    live = scale > 0
    # penalties at or above this keep every coefficient at exactly zero
    g_null = np.max(np.abs(_null_gradient(Z, y)), initial=0.0)
    active = lambdas * alpha < g_null if alpha > 0 else np.ones(L, dtype=bool)
    if live.any() and active.any():
        start = int(np.argmax(active))
        Zl = np.ascontiguousarray(Z[:, live].T)
        b0s, betas, it, ok, ch = _path_kernel(
            Zl, y, float(alpha), lambdas[start:], b0_null, np.zeros(Zl.shape[0]), tol, max_outer, MAX_INNER
        )
        B0[start:] = b0s
        BETA[start:, live] = betas
        iters[start:], conv[start:], change[start:] = it, ok, ch
    return B0, BETA, iters, conv, change, center, scale


def _to_fit(b0s, betas, center, scale, tuning, it, ok, ch, features, trace=()):
    safe = np.where(scale > 0, scale, 1.0)
    beta = np.where(scale > 0, betas / safe, 0.0)
    beta0 = float(b0s - beta @ center)
    return ElasticNetFit(beta0, beta, tuning, center, scale, int(it), bool(ok), float(ch), tuple(trace), tuple(features))


def fit(X, y, tuning: TuningPair, features=(), tol: float = TOL, max_outer: int = MAX_OUTER,
        warm_path=None) -> ElasticNetFit:
    """Fit at one tuning pair.

    With ``warm_path`` (a decreasing sequence of penalties ending at
    ``tuning.lam``) the solution is reached through warm starts along it,
    otherwise it is computed cold from the intercept-only model.
    """
    X, y = _check_xy(X, y)
    if warm_path is not None:
        lambdas = np.append(np.asarray(warm_path, dtype=float)[:-1], tuning.lam)
        B0, BETA, it, ok, ch, center, scale = fit_path(X, y, tuning.alpha, lambdas, tol, max_outer)
        result = _to_fit(B0[-1], BETA[-1], center, scale, tuning, it.sum(), ok[-1], ch[-1], features)
    else:
        Z, center, scale = standardize(X)
        live = scale > 0
        b0 = _logit(y.mean())
        beta = np.zeros(Z.shape[1])
        trace = np.zeros(0)
        it, ok, ch = 0, True, 0.0
        g_null = np.max(np.abs(_null_gradient(Z, y)), initial=0.0)
        if live.any() and not (tuning.alpha > 0 and tuning.lam * tuning.alpha >= g_null):
            Zl = np.ascontiguousarray(Z[:, live].T)
            bl = np.zeros(Zl.shape[0])
            trace = np.full(max_outer + 1, np.nan)
            b0, it, ok, ch = _solve_one(Zl, y, float(tuning.alpha), float(tuning.lam), b0, bl, tol,
                                        max_outer, MAX_INNER, trace)
            beta[live] = bl
            trace = trace[~np.isnan(trace)]
        result = _to_fit(b0, beta, center, scale, tuning, it, ok, ch, features, trace)
    if not result.converged:
        _warn_unconverged(result)
    return result


def _warn_unconverged(result: ElasticNetFit):
    warnings.warn(
        f"elastic net did not converge at alpha={result.tuning.alpha}, lambda={result.tuning.lam:.4g} "
        f"(max change {result.max_change:.3g}); returning the last iterate",
        ConvergenceWarning,
        stacklevel=3,
    )


def predict_prob(fitted: ElasticNetFit, x) -> np.ndarray | float:
    """Logistic probability for one feature vector or a matrix of rows.

    ``x`` may also be a mapping from feature code to 0/1, in which case it is
    aligned by code and missing features count as absent.
    """
    if isinstance(x, dict):
        x = np.array([float(x.get(f, 0)) for f in fitted.features])
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != fitted.beta.shape[0]:
        raise ValueError(f"expected {fitted.beta.shape[0]} features, got {x.shape[-1]}")
    p = _sigmoid(fitted.beta0 + x @ fitted.beta)
    return float(p) if np.ndim(p) == 0 else p


def kkt_residuals(fitted: ElasticNetFit, X, y) -> np.ndarray:
    """Per-coefficient violation of the optimality conditions on the standardized scale.

    Constant columns are reported as 0 (they carry no information and are
    fixed at zero).
    """
    X, y = _check_xy(X, y)
    Z, _, scale = standardize(X)
    b = fitted.std_beta
    b0 = fitted.std_beta0
    _, g = smooth_gradient(b0, b, Z, y)
    a, lam = fitted.tuning.alpha, fitted.tuning.lam
    out = np.zeros_like(g)
    nz = b != 0
    out[nz] = np.abs(g[nz] + lam * (1 - a) * b[nz] + lam * a * np.sign(b[nz]))
    out[~nz] = np.maximum(np.abs(g[~nz]) - lam * a, 0.0)
    out[scale == 0] = 0.0
    return out


# ---------------------------------------------------------------- cross-validation


def stratified_folds(y, k: int, seed: int) -> np.ndarray:
    """Assign each observation a fold in 0..k-1, dealing each class round-robin after a shuffle."""
    y = np.asarray(y)
    folds = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise ValueError(f"class {cls} has {idx.size} members, fewer than {k} folds")
        perm = rng_for(seed, "folds", cls).permutation(idx)
        folds[perm] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    return folds


def _select(mean, se, lambdas, alphas, one_se=False) -> tuple[int, int]:
    """Grid index of the minimum mean loss; ties to larger lambda, then smaller alpha.

    With ``one_se`` the largest lambda within one standard error of the
    minimum is chosen instead.
    """
    limit = None
    if one_se:
        a_min, l_min = np.unravel_index(np.argmin(mean), mean.shape)
        limit = mean[a_min, l_min] + se[a_min, l_min]
    best = best_key = None
    for a in range(mean.shape[0]):
        for l in range(mean.shape[1]):
            if limit is not None:
                if mean[a, l] > limit:
                    continue
                key = (-lambdas[a, l], alphas[a])
            else:
                key = (mean[a, l], -lambdas[a, l], alphas[a])
            if best_key is None or key < best_key:
                best_key, best = key, (a, l)
    return best


def cv_select(X, y, alpha_grid=tuple(np.round(np.linspace(0, 1, 11), 1)), n_lambda: int = 100,
              min_ratio: float = 0.01, k_folds: int = 5, seed: int = 0, one_se: bool = False,
              features=(), tol: float = TOL):
    """Pick (alpha, lambda) by stratified k-fold CV on held-out negative log-likelihood.

    Ties go to the larger lambda, then the smaller alpha. The returned fit is
    refitted on all rows at the chosen pair, warm-started down its lambda path.
    """
    X, y = _check_xy(X, y)
    alphas = np.asarray(alpha_grid, dtype=float)
    folds = stratified_folds(y, k_folds, seed)
    n = y.shape[0]
    A = alphas.shape[0]
    lambdas = np.empty((A, n_lambda))
    fold_nll = np.zeros((A, k_folds, n_lambda))
    fold_n = np.bincount(folds, minlength=k_folds)
    Z, center, scale = standardize(X)
    for a, alpha in enumerate(alphas):
        lambdas[a] = _lambda_path_std(Z, y, alpha, n_lambda, min_ratio)
        for f in range(k_folds):
            if np.ptp(y[folds != f]) == 0:
                raise ValueError(f"fold {f} leaves a single class in training")
        fold_nll[a] = _cv_kernel(X, y, folds, k_folds, float(alpha), lambdas[a], tol, MAX_OUTER, MAX_INNER)
    mean = fold_nll.sum(axis=1) / n
    per_fold = fold_nll / fold_n[None, :, None]
    se = per_fold.std(axis=1, ddof=1) / np.sqrt(k_folds) if k_folds > 1 else np.zeros_like(mean)
    curve = CvCurve(alphas, lambdas, mean, se, k_folds, folds)

    a, l = _select(mean, se, lambdas, alphas, one_se)
    tuning = TuningPair(float(alphas[a]), float(lambdas[a, l]))
    path = lambdas[a, : l + 1]
    B0, BETA, it, ok, ch, _, _ = _fit_path_std(Z, center, scale, y, tuning.alpha, path, tol, MAX_OUTER)
    final = _to_fit(B0[-1], BETA[-1], center, scale, tuning, it.sum(), ok[-1], ch[-1], features)
    if not final.converged:
        _warn_unconverged(final)
    return tuning, curve, final
