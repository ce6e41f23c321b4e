"""Residual-resampling bootstrap of a second-order fit, yielding percentile
confidence intervals for the stationary point in natural units.

Each replication adds resampled residuals to the fitted values, refits the
model on the same design, and recomputes the stationary point. Replications
draw from per-replication streams derived from (seed, replication index), so
any evaluation order -- including parallel -- yields identical samples.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import DOMAIN_BOOTSTRAP, substream
from .canonical import SINGULAR_CONDITION_LIMIT
from .designs import code_to_natural
from .modelfit import FittedModel, model_matrix

OUT_OF_BOUNDS_FACTOR = 3.0  # reject stationary points beyond 3x the design radius


@dataclass
class BootstrapResult:
    replications: int
    stationary_samples: np.ndarray  # (replications - n_failed) x k, natural units
    ci95: dict                      # factor name -> (low, high)
    n_failed: int
    seed: int

    def to_dict(self) -> dict:
        return {"replications": self.replications, "n_failed": self.n_failed,
                "seed": self.seed,
                "ci95": {k: [float(a), float(b)] for k, (a, b) in self.ci95.items()}}

    def ci_text(self) -> str:
        lines = [f"{'factor':<20}{'2.5%':>12}{'97.5%':>12}"]
        for name, (lo, hi) in self.ci95.items():
            lines.append(f"{name:<20}{lo:12.4f}{hi:12.4f}")
        lines.append(f"replications: {self.replications}  failed: {self.n_failed}")
        return "\n".join(lines)


def percentile_ci(samples, level: float = 0.95):
    """Empirical interval at (1-level)/2 and 1-(1-level)/2, with linear
    interpolation between order statistics."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("empty sample")
    if not 0 <= level < 1:
        raise ValueError("level must be in [0, 1)")
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(samples, lo, method="linear")),
            float(np.quantile(samples, 1.0 - lo, method="linear")))


def _stationary_from_beta(beta: np.ndarray, k: int):
    """Stationary point of an SO coefficient vector; None when B is singular
    or the point is unreasonably far out."""
    b = beta[1 : 1 + k]
    B = np.zeros((k, k))
    idx = 1 + k
    for i in range(k):
        for j in range(i + 1, k):
            B[i, j] = B[j, i] = beta[idx] / 2.0
            idx += 1
    for i in range(k):
        B[i, i] = beta[idx]
        idx += 1
    if np.linalg.cond(B) > SINGULAR_CONDITION_LIMIT:
        return None
    return np.linalg.solve(B, -0.5 * b)


def bootstrap_stationary(model: FittedModel, B: int = 1000, seed: int = 123,
                         workers: int = 1) -> BootstrapResult:
    """B residual-resampling replications of the stationary point.

    Replications with a singular quadratic matrix or a stationary point beyond
    OUT_OF_BOUNDS_FACTOR times the design's coded radius are excluded from the
    quantiles but counted in ``n_failed``.
    """
    if model.order != "SO":
        raise ValueError("bootstrap_stationary requires a second-order model")
    if B < 1:
        raise ValueError("need B >= 1 replications")
    if model.df_residual < 1:
        raise ValueError("model has no residual degrees of freedom")

    design = model.design
    k = design.k
    coded = design.coded_matrix()
    X = model_matrix(coded, "SO")
    solver = np.linalg.pinv(X)           # same LS solution, precomputed once
    fitted = model.fitted
    resid = model.residuals
    n = len(resid)
    radius = float(np.max(np.linalg.norm(coded, axis=1)))
    limit = OUT_OF_BOUNDS_FACTOR * radius

    def one(r: int):
        gen = substream(seed, DOMAIN_BOOTSTRAP, r)
        idx = gen.integers(0, n, size=n)
        y_star = fitted + resid[idx]
        beta = solver @ y_star
        xs = _stationary_from_beta(beta, k)
        if xs is None or np.linalg.norm(xs) > limit:
            return None
        return code_to_natural(design.factors, xs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(r) for r in range(B)]

    kept = [r for r in results if r is not None]
    n_failed = B - len(kept)
    if not kept:
        raise RuntimeError("all bootstrap replications failed (degenerate bootstrap)")
    samples = np.array(kept)
    ci95 = {}
    for j, f in enumerate(design.factors):
        ci95[f.name] = percentile_ci(samples[:, j], 0.95)
    return BootstrapResult(replications=B, stationary_samples=samples,
                           ci95=ci95, n_failed=n_failed, seed=seed)
