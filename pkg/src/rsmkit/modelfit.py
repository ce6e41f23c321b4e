"""Least-squares fitting of first- and second-order response-surface models in
coded units, with ANOVA (group effects, lack of fit, pure error), information
criteria and Spearman rank correlation.

The model matrix for order "SO" is [1, linear, two-way interactions,
pure quadratics]; "FO" stops after the linear block. Solutions use a QR
decomposition; tests cross-check against plain normal equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special, stats

from .designs import Design


class RankDeficiencyError(ValueError):
    """Raised when the model matrix is rank deficient; names the collinear terms."""

    def __init__(self, terms):
        self.terms = list(terms)
        super().__init__(f"model matrix is rank deficient; collinear terms: {self.terms}")


def model_terms(k: int, order: str, names=None) -> list:
    """Term labels in model-matrix column order."""
    if names is None:
        names = [f"x{i + 1}" for i in range(k)]
    terms = ["intercept"] + list(names)
    if order == "SO":
        for i in range(k):
            for j in range(i + 1, k):
                terms.append(f"{names[i]}:{names[j]}")
        terms += [f"{n}^2" for n in names]
    return terms


def model_matrix(coded: np.ndarray, order: str) -> np.ndarray:
    coded = np.asarray(coded, dtype=float)
    n, k = coded.shape
    cols = [np.ones(n)]
    cols.extend(coded[:, i] for i in range(k))
    if order == "SO":
        for i in range(k):
            for j in range(i + 1, k):
                cols.append(coded[:, i] * coded[:, j])
        cols.extend(coded[:, i] ** 2 for i in range(k))
    elif order != "FO":
        raise ValueError(f"order must be 'FO' or 'SO', got {order!r}")
    return np.column_stack(cols)


def f_sf(f: float, df1: int, df2: int) -> float:
    """Upper tail of the F distribution via the regularized incomplete beta."""
    if not math.isfinite(f):
        return 0.0 if f > 0 else 1.0
    if f <= 0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return float(special.betainc(df2 / 2.0, df1 / 2.0, x))


def t_sf2(t: float, df: int) -> float:
    """Two-sided t tail probability via the regularized incomplete beta."""
    if not math.isfinite(t):
        return 0.0
    x = df / (df + t * t)
    return float(special.betainc(df / 2.0, 0.5, x))


@dataclass
class FittedModel:
    order: str
    terms: list
    coefficients: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    sigma2: float
    r_squared: float
    f_stat: float
    f_pvalue: float
    coef_se: np.ndarray
    coef_t: np.ndarray
    coef_pvalues: np.ndarray
    aic: float
    bic: float
    design: Design
    y: np.ndarray
    df_residual: int
    exact_fit: bool = False
    lof_pvalue: float | None = None  # filled in by anova() when replicates exist

    @property
    def k(self) -> int:
        return self.design.k

    def predict(self, coded) -> np.ndarray:
        coded = np.atleast_2d(np.asarray(coded, dtype=float))
        return model_matrix(coded, self.order) @ self.coefficients

    def linear_coefficients(self) -> np.ndarray:
        return self.coefficients[1 : 1 + self.k]

    def quadratic_matrix(self) -> np.ndarray:
        """Symmetric B with B_ii = beta_ii and B_ij = beta_ij / 2 (SO only)."""
        if self.order != "SO":
            raise ValueError("quadratic matrix is defined for SO models only")
        k = self.k
        B = np.zeros((k, k))
        idx = 1 + k
        for i in range(k):
            for j in range(i + 1, k):
                B[i, j] = B[j, i] = self.coefficients[idx] / 2.0
                idx += 1
        for i in range(k):
            B[i, i] = self.coefficients[idx]
            idx += 1
        return B

    def summary_dict(self) -> dict:
        """JSON-ready summary of coefficients and fit statistics."""
        out = {
            "order": self.order,
            "n": int(len(self.y)),
            "r_squared": self.r_squared,
            "f_stat": self.f_stat,
            "f_pvalue": self.f_pvalue,
            "sigma2": self.sigma2,
            "aic": self.aic,
            "bic": self.bic,
            "coefficients": {
                t: {"estimate": float(b), "se": float(se), "t": float(tv), "p": float(p)}
                for t, b, se, tv, p in zip(self.terms, self.coefficients, self.coef_se,
                                           self.coef_t, self.coef_pvalues)
            },
        }
        if self.lof_pvalue is not None:
            out["lof_pvalue"] = self.lof_pvalue
        return out


def solve_ls(X: np.ndarray, y: np.ndarray, terms=None) -> np.ndarray:
    """Least squares via QR; raises RankDeficiencyError naming collinear columns."""
    n, p = X.shape
    if n < p:
        raise ValueError(f"need at least {p} runs for {p} model terms, got {n}")
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * (diag.max() if diag.size else 1.0)
    if np.any(diag < tol):
        bad = np.nonzero(diag < tol)[0]
        names = [terms[i] if terms else f"col{i}" for i in bad]
        raise RankDeficiencyError(names)
    return linalg.solve_triangular(R, Q.T @ y)


def fit(design: Design, y, order: str = "FO") -> FittedModel:
    """Fit an FO or SO response-surface model on the design's coded matrix."""
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != len(design):
        raise ValueError(f"y has {len(y)} values for {len(design)} runs")
    coded = design.coded_matrix()
    X = model_matrix(coded, order)
    terms = model_terms(design.k, order, names=list(design.factor_names))
    beta = solve_ls(X, y, terms)

    fitted = X @ beta
    resid = y - fitted
    n, p = X.shape
    df_resid = n - p
    rss = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    exact = rss <= 1e-14 * max(ss_tot, 1.0)

    sigma2 = rss / df_resid if df_resid > 0 else math.nan
    r2 = 1.0 - rss / ss_tot if ss_tot > 0 else 1.0
    ss_reg = ss_tot - rss
    df_reg = p - 1
    if df_resid > 0 and sigma2 > 0 and df_reg > 0:
        f_stat = (ss_reg / df_reg) / sigma2
        f_p = f_sf(f_stat, df_reg, df_resid)
    else:
        f_stat = math.inf if ss_reg > 0 else 0.0
        f_p = 0.0 if ss_reg > 0 else 1.0

    XtX_inv = np.linalg.inv(X.T @ X)
    if df_resid > 0 and sigma2 > 0:
        se = np.sqrt(np.diag(XtX_inv) * sigma2)
        tvals = np.divide(beta, se, out=np.full_like(beta, np.inf), where=se > 0)
        pvals = np.array([t_sf2(t, df_resid) for t in tvals])
    else:
        se = np.zeros(p)
        tvals = np.where(np.abs(beta) > 0, np.inf, 0.0)
        pvals = np.where(np.abs(beta) > 0, 0.0, 1.0)

    aic, bic = information_criteria_from_rss(n, p, 0.0 if exact else rss)
    return FittedModel(order=order, terms=terms, coefficients=beta, residuals=resid,
                       fitted=fitted, sigma2=sigma2, r_squared=r2, f_stat=f_stat,
                       f_pvalue=f_p, coef_se=se, coef_t=tvals, coef_pvalues=pvals,
                       aic=aic, bic=bic, design=design, y=y, df_residual=df_resid,
                       exact_fit=exact)


def information_criteria_from_rss(n: int, n_coef: int, rss: float):
    """Gaussian-likelihood AIC/BIC counting the error variance as a parameter."""
    n_par = n_coef + 1
    if rss <= 0:
        return -math.inf, -math.inf
    base = n * math.log(2.0 * math.pi * rss / n) + n
    return base + 2.0 * n_par, base + math.log(n) * n_par


def information_criteria(model: FittedModel):
    """(aic, bic) for a fitted model; -inf sentinels flag an exact fit."""
    return model.aic, model.bic


@dataclass
class AnovaRow:
    source: str
    ss: float
    df: int
    ms: float | None
    f: float | None
    p: float | None


@dataclass
class AnovaTable:
    rows: list
    ss_total: float
    df_total: int
    lof_available: bool
    lof_degenerate: bool = False  # pure error exactly zero with misfit present

    def row(self, source: str) -> AnovaRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)

    @property
    def lof_pvalue(self) -> float | None:
        if not self.lof_available:
            return None
        return self.row("lack_of_fit").p

    def to_dict(self) -> dict:
        return {
            "rows": [vars(r) for r in self.rows],
            "ss_total": self.ss_total,
            "df_total": self.df_total,
            "lof_available": self.lof_available,
            "lof_degenerate": self.lof_degenerate,
        }

    def to_text(self) -> str:
        lines = [f"{'source':<14}{'SS':>14}{'df':>5}{'MS':>14}{'F':>12}{'p':>10}"]
        for r in self.rows:
            ms = f"{r.ms:14.6g}" if r.ms is not None else " " * 14
            fv = f"{r.f:12.4g}" if r.f is not None else " " * 12
            pv = f"{r.p:10.4g}" if r.p is not None else " " * 10
            lines.append(f"{r.source:<14}{r.ss:14.6g}{r.df:>5}{ms}{fv}{pv}")
        lines.append(f"{'total':<14}{self.ss_total:14.6g}{self.df_total:>5}")
        return "\n".join(lines)


def replicate_groups(coded: np.ndarray, tol: float = 1e-9) -> list:
    """Indices of runs grouped by (numerically) identical coded coordinates."""
    groups = []
    used = np.zeros(len(coded), dtype=bool)
    for i in range(len(coded)):
        if used[i]:
            continue
        same = np.nonzero(np.all(np.abs(coded - coded[i]) <= tol, axis=1) & ~used)[0]
        used[same] = True
        groups.append(list(same))
    return groups


def anova(model: FittedModel) -> AnovaTable:
    """Sequential ANOVA: FO block, then (for SO) TWI and PQ blocks, then the
    residual split into lack of fit and pure error when replicates exist."""
    design = model.design
    y = model.y
    coded = design.coded_matrix()
    n = len(y)
    k = design.k
    ss_tot = float(np.sum((y - y.mean()) ** 2))

    X_full = model_matrix(coded, model.order)

    def rss_of(cols):
        X = X_full[:, cols]
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        r = y - X @ beta
        return float(r @ r)

    n_lin = k
    n_twi = k * (k - 1) // 2
    blocks = [("FO", list(range(1, 1 + n_lin)))]
    if model.order == "SO":
        blocks.append(("TWI", list(range(1 + n_lin, 1 + n_lin + n_twi))))
        blocks.append(("PQ", list(range(1 + n_lin + n_twi, 1 + n_lin + n_twi + k))))

    rows = []
    cols = [0]
    prev_rss = ss_tot
    for name, block_cols in blocks:
        cols = cols + block_cols
        rss = rss_of(cols)
        rows.append((name, prev_rss - rss, len(block_cols)))
        prev_rss = rss

    rss_model = float(model.residuals @ model.residuals)
    df_resid = model.df_residual
    ms_resid = rss_model / df_resid if df_resid > 0 else math.nan

    groups = replicate_groups(coded)
    n_distinct = len(groups)
    df_pe = n - n_distinct
    lof_available = df_pe > 0
    lof_degenerate = False

    table_rows = []
    for name, ss, df in rows:
        ms = ss / df
        if df_resid > 0 and ms_resid > 0:
            fval = ms / ms_resid
            pval = f_sf(fval, df, df_resid)
        else:
            fval = math.inf if ss > 0 else 0.0
            pval = 0.0 if ss > 0 else 1.0
        table_rows.append(AnovaRow(name, ss, df, ms, fval, pval))

    table_rows.append(AnovaRow("residual", rss_model, df_resid,
                               ms_resid if df_resid > 0 else None, None, None))

    if lof_available:
        ss_pe = 0.0
        for g in groups:
            if len(g) > 1:
                yg = y[g]
                ss_pe += float(np.sum((yg - yg.mean()) ** 2))
        ss_lof = max(rss_model - ss_pe, 0.0)
        df_lof = df_resid - df_pe
        tol = 1e-12 * max(ss_tot, 1.0)
        if df_lof <= 0:
            # saturated in distinct points: no lack-of-fit degrees of freedom
            lof_available = False
        else:
            ms_lof = ss_lof / df_lof
            ms_pe = ss_pe / df_pe
            if ms_pe > tol:
                fval = ms_lof / ms_pe
                pval = f_sf(fval, df_lof, df_pe)
            elif ss_lof <= tol:
                fval, pval = 0.0, 1.0  # exact fit: no misfit, no noise
            else:
                # deterministic data: misfit present but zero pure error
                fval, pval = math.inf, 0.0
                lof_degenerate = True
            table_rows.append(AnovaRow("lack_of_fit", ss_lof, df_lof, ms_lof, fval, pval))
            table_rows.append(AnovaRow("pure_error", ss_pe, df_pe, ms_pe, None, None))
            model.lof_pvalue = pval

    return AnovaTable(rows=table_rows, ss_total=ss_tot, df_total=n - 1,
                      lof_available=lof_available, lof_degenerate=lof_degenerate)


def spearman(x, y):
    """Spearman rank correlation with average ranks for ties.

    Returns (rho, two-sided p) where p comes from the t approximation
    t = rho * sqrt((n-2) / (1-rho^2)).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d vectors of equal length")
    n = len(x)
    if n < 4:
        raise ValueError("spearman requires n >= 4")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("correlation undefined for a constant vector")
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    rho = float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))
    if abs(rho) >= 1.0:
        return float(np.sign(rho)), 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, t_sf2(t, n - 2)
