"""Active-factor identification from screening designs.

Two selectors are provided: bidirectional stepwise search under BIC, and a
coordinate-descent Lasso tuned by k-fold cross-validation with the
one-standard-error rule. Factors judged inactive can be assigned randomized
natural values (clamped normal draws) for the later optimization stages.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._rng import DOMAIN_CVFOLDS, DOMAIN_INACTIVE, normal_box_muller, substream
from .designs import Design, Factor
from .modelfit import information_criteria_from_rss

LAMBDA_GRID_SIZE = 100
LAMBDA_MIN_RATIO = 1e-4


@dataclass
class ScreeningResult:
    method: str                      # "stepwise" | "lasso"
    selected: list                   # ordered factor names
    estimates: dict                  # term -> coefficient (coded units), incl. intercept
    full_path: list                  # stepwise: accepted moves; lasso: lambda path
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"method": self.method, "selected": list(self.selected),
                "estimates": {k: float(v) for k, v in self.estimates.items()},
                "details": {k: (float(v) if isinstance(v, (int, float)) else v)
                            for k, v in self.details.items()}}


@dataclass(frozen=True)
class InactiveFactorPolicy:
    """Per-factor normal sampling policy for factors dropped at screening."""

    factor: Factor
    mean: float
    sd: float

    def __post_init__(self):
        if self.sd < 0:
            raise ValueError("sd must be >= 0")


def _ls_rss(X: np.ndarray, y: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ beta
    return float(r @ r)


def rss_floor(y: np.ndarray) -> float:
    """Numerical floor for RSS in BIC comparisons: fits that agree to within
    floating-point noise tie, letting the parameter penalty decide."""
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return max(1e-12 * ss_tot, 1e-300)


def _bic_for(X: np.ndarray, y: np.ndarray, floor: float) -> float:
    rss = max(_ls_rss(X, y), floor)
    return information_criteria_from_rss(len(y), X.shape[1], rss)[1]


def stepwise_bic(design: Design, y, scope=None) -> ScreeningResult:
    """Bidirectional stepwise selection minimizing BIC.

    Starts from the intercept-only model and repeatedly applies the single
    add-or-drop move that most decreases BIC; stops when no move decreases it.
    Ties break lexicographically on the term name, add before drop.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    if n != len(design):
        raise ValueError("y length must match design")
    if n <= 2:
        raise ValueError("need n > 2 observations")
    coded = design.coded_matrix()
    names = list(design.factor_names)
    if scope is None:
        scope = names
    cols = {name: coded[:, names.index(name)] for name in scope}

    def matrix(terms):
        return np.column_stack([np.ones(n)] + [cols[t] for t in terms])

    floor = rss_floor(y)
    current: list = []
    current_bic = _bic_for(matrix(current), y, floor)
    trace = [("start", None, current_bic)]

    while True:
        moves = []
        for t in sorted(set(scope) - set(current)):
            moves.append(("add", t, _bic_for(matrix(current + [t]), y, floor)))
        for t in sorted(current):
            rest = [u for u in current if u != t]
            moves.append(("drop", t, _bic_for(matrix(rest), y, floor)))
        if not moves:
            break
        moves.sort(key=lambda m: (m[2], m[0] != "add", m[1]))
        kind, term, bic = moves[0]
        if bic >= current_bic - 1e-12:
            break
        if kind == "add":
            current.append(term)
        else:
            current.remove(term)
        current_bic = bic
        trace.append((kind, term, bic))

    X = matrix(current)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    estimates = {"intercept": float(beta[0])}
    estimates.update({t: float(b) for t, b in zip(current, beta[1:])})
    ordered = sorted(current, key=lambda t: -abs(estimates[t]))
    return ScreeningResult(method="stepwise", selected=ordered, estimates=estimates,
                           full_path=trace, details={"bic": current_bic})


def _soft_threshold(z: float, gamma: float) -> float:
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


def _lasso_cd(Xs: np.ndarray, yc: np.ndarray, lambdas: np.ndarray,
              tol: float = 1e-9, max_iter: int = 10_000) -> np.ndarray:
    """Coordinate descent over a decreasing lambda path with warm starts.

    Expects standardized columns (mean 0, mean square 1) and centered y;
    minimizes (1/2n)||y - Xb||^2 + lambda * ||b||_1.
    """
    n, p = Xs.shape
    col_sq = (Xs * Xs).sum(axis=0) / n  # ~1 after standardization
    betas = np.zeros((len(lambdas), p))
    b = np.zeros(p)
    r = yc.copy()
    for li, lam in enumerate(lambdas):
        for _ in range(max_iter):
            max_delta = 0.0
            for j in range(p):
                if col_sq[j] == 0.0:
                    continue
                old = b[j]
                rho = (Xs[:, j] @ r) / n + col_sq[j] * old
                new = _soft_threshold(rho, lam) / col_sq[j]
                if new != old:
                    r += Xs[:, j] * (old - new)
                    b[j] = new
                    max_delta = max(max_delta, abs(new - old))
            if max_delta < tol:
                break
        betas[li] = b
    return betas


def cv_fold_assignment(seed: int, n: int, nfolds: int) -> np.ndarray:
    """Deterministic fold labels in 0..nfolds-1 as a function of (seed, n, nfolds)."""
    gen = substream(seed, DOMAIN_CVFOLDS, n, nfolds)
    perm = gen.permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % nfolds
    return labels


def lasso_cv(design: Design, y, nfolds: int = 3, seed: int = 0) -> ScreeningResult:
    """Lasso screening with k-fold CV and the one-standard-error rule.

    Fits a 100-point logarithmic lambda path (ratio 1e-4 from
    lambda_max = max|X'y|/n on standardized predictors), picks the largest
    lambda whose CV error is within one standard error of the minimum, and
    reports nonzero coefficients rescaled to coded units.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    if n != len(design):
        raise ValueError("y length must match design")
    if not (2 <= nfolds <= n):
        raise ValueError("need n >= nfolds >= 2")
    X = design.coded_matrix()
    names = list(design.factor_names)

    def standardize(Xm, ym):
        mu = Xm.mean(axis=0)
        sd = np.sqrt(((Xm - mu) ** 2).mean(axis=0))
        sd = np.where(sd == 0, 1.0, sd)
        return (Xm - mu) / sd, ym - ym.mean(), mu, sd

    Xs, yc, mu_all, sd_all = standardize(X, y)
    lambda_max = np.max(np.abs(Xs.T @ yc)) / n
    if lambda_max <= 0:
        lambda_max = 1.0
    lambdas = np.geomspace(lambda_max, lambda_max * LAMBDA_MIN_RATIO, LAMBDA_GRID_SIZE)

    folds = cv_fold_assignment(seed, n, nfolds)
    sq_err = np.full((n, LAMBDA_GRID_SIZE), np.nan)  # per-observation errors
    for f in range(nfolds):
        test = folds == f
        train = ~test
        ytr = y[train]
        if np.all(ytr == ytr[0]):
            warnings.warn(f"fold {f}: constant response, excluded from CV")
            continue
        Xtr, ytr_c, mu, sd = standardize(X[train], ytr)
        betas = _lasso_cd(Xtr, ytr_c, lambdas)
        Xte = (X[test] - mu) / sd
        pred = Xte @ betas.T + ytr.mean()
        sq_err[test] = (y[test, None] - pred) ** 2

    used = ~np.isnan(sq_err[:, 0])
    n_used = int(used.sum())
    if n_used == 0:
        raise ValueError("all CV folds were excluded")
    # one-standard-error band over per-observation errors (lambda.1se semantics)
    mean_err = np.nanmean(sq_err, axis=0)
    se_err = np.nanstd(sq_err, axis=0, ddof=1) / math.sqrt(n_used)
    best = int(np.argmin(mean_err))
    threshold = mean_err[best] + se_err[best]
    lam_1se_idx = int(np.argmax(mean_err <= threshold))  # largest lambda within 1 SE
    lam = float(lambdas[lam_1se_idx])

    betas_full = _lasso_cd(Xs, yc, lambdas)
    b_std = betas_full[lam_1se_idx]
    b_coded = b_std / sd_all
    intercept = float(y.mean() - b_coded @ mu_all)

    estimates = {"intercept": intercept}
    selected = []
    for j, name in enumerate(names):
        if b_std[j] != 0.0:
            estimates[name] = float(b_coded[j])
            selected.append(name)
    selected.sort(key=lambda t: -abs(estimates[t]))
    path = [{"lambda": float(l), "cv_mean": float(m), "cv_se": float(s)}
            for l, m, s in zip(lambdas, mean_err, se_err)]
    return ScreeningResult(method="lasso", selected=selected, estimates=estimates,
                           full_path=path,
                           details={"lambda_1se": lam, "lambda_max": float(lambda_max),
                                    "cv_min": float(mean_err[best])})


def active_factors(stepwise_result: ScreeningResult, lasso_result: ScreeningResult) -> list:
    """Factors selected by BOTH methods (conservative intersection), ordered by
    the stepwise effect magnitude."""
    lasso_set = set(lasso_result.selected)
    return [t for t in stepwise_result.selected if t in lasso_set]


def assign_inactive(policies, seed: int) -> dict:
    """Randomized natural values for inactive factors, clamped to their bounds.

    Values are Box-Muller normal draws from a stream derived from ``seed``;
    the same seed always produces the same assignment. Policies are consumed
    in sorted factor-name order so the mapping does not depend on input order.
    """
    policies = sorted(policies, key=lambda p: p.factor.name)
    gen = substream(seed, DOMAIN_INACTIVE)
    z = normal_box_muller(gen, len(policies))
    out = {}
    for pol, zi in zip(policies, z):
        val = pol.mean + pol.sd * zi
        out[pol.factor.name] = float(min(max(val, pol.factor.low), pol.factor.high))
    return out
