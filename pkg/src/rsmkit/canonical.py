"""Canonical analysis of a fitted second-order surface: stationary point,
eigenstructure of the quadratic form, surface classification and the canonical
path along the flattest direction.

The quadratic part is written y = b0 + x'b + x'Bx with B symmetric
(B_ii = beta_ii, B_ij = beta_ij/2), so the stationary point solves
B x_s = -b/2 and the canonical eigenvalues are the eigenvalues of B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .designs import Design, DesignPoint, code_to_natural
from .modelfit import FittedModel

RIDGE_EIGENVALUE_FRACTION = 1e-3   # |lambda| <= fraction * max|lambda| -> ridge
SINGULAR_CONDITION_LIMIT = 1e12

CLASSIFICATIONS = ("maximum", "minimum", "saddle", "stationary_ridge", "rising_ridge")


class SingularSurfaceError(ValueError):
    """B is numerically singular; carries the near-null eigendirection."""

    def __init__(self, direction):
        self.direction = np.asarray(direction)
        super().__init__("quadratic coefficient matrix is numerically singular "
                         "(ridge suspected); near-null direction attached")


def jacobi_eigh(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted descending and
    eigenvectors as orthonormal columns. Intended for the small matrices of a
    canonical analysis (k <= 10 or so).
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, atol=1e-12):
        raise ValueError("jacobi_eigh requires a symmetric square matrix")
    V = np.eye(n)
    scale = max(np.max(np.abs(A)), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(A[i, j] ** 2 for i in range(n) for j in range(i + 1, n)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    lam = np.diag(A).copy()
    order = np.argsort(-lam)
    lam = lam[order]
    V = V[:, order]
    # sign convention: largest-magnitude component of each eigenvector positive
    for j in range(n):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return lam, V


@dataclass(frozen=True)
class CanonicalAnalysis:
    stationary_coded: tuple
    stationary_natural: tuple
    y_hat_s: float
    eigenvalues: tuple        # sorted descending
    eigenvectors: np.ndarray  # orthonormal columns, aligned with eigenvalues
    classification: str
    in_region: bool
    region_radius: float

    def to_dict(self) -> dict:
        return {
            "stationary_coded": [float(v) for v in self.stationary_coded],
            "stationary_natural": [float(v) for v in self.stationary_natural],
            "y_hat_s": float(self.y_hat_s),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eigenvectors": self.eigenvectors.tolist(),
            "classification": self.classification,
            "in_region": bool(self.in_region),
            "region_radius": float(self.region_radius),
        }


def classify(eigenvalues, x_s, region_radius: float) -> str:
    """Surface type from eigenvalue signs with a relative near-zero threshold.

    Any eigenvalue within RIDGE_EIGENVALUE_FRACTION of the largest magnitude
    counts as ~0: a ridge, stationary if x_s lies inside the exploration
    region and rising otherwise.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if not np.all(np.isfinite(lam)):
        raise ValueError("eigenvalues must be finite")
    tau = RIDGE_EIGENVALUE_FRACTION * np.max(np.abs(lam)) if np.any(lam != 0) else 0.0
    x_s = np.asarray(x_s, dtype=float)
    inside = float(np.linalg.norm(x_s)) <= region_radius
    if np.any(np.abs(lam) <= tau):
        return "stationary_ridge" if inside else "rising_ridge"
    if np.all(lam < 0):
        return "maximum"
    if np.all(lam > 0):
        return "minimum"
    return "saddle"


def stationary_point(model: FittedModel, region_radius: float | None = None) -> CanonicalAnalysis:
    """Locate and classify the stationary point of a second-order model.

    ``region_radius`` defaults to the largest coded distance in the design
    (the CCD axial distance for a CCD).
    """
    if model.order != "SO":
        raise ValueError("canonical analysis requires a second-order model")
    B = model.quadratic_matrix()
    b = model.linear_coefficients()
    lam, V = jacobi_eigh(B)
    abs_lam = np.abs(lam)
    if abs_lam.max() == 0 or abs_lam.min() / abs_lam.max() < 1.0 / SINGULAR_CONDITION_LIMIT:
        null_dir = V[:, int(np.argmin(abs_lam))]
        raise SingularSurfaceError(null_dir)
    x_s = np.linalg.solve(B, -0.5 * b)
    y_s = float(model.predict(x_s)[0])
    if region_radius is None:
        coded = model.design.coded_matrix()
        region_radius = float(np.max(np.linalg.norm(coded, axis=1)))
    cls = classify(lam, x_s, region_radius)
    nat = code_to_natural(model.design.factors, x_s)
    return CanonicalAnalysis(stationary_coded=tuple(x_s), stationary_natural=tuple(nat),
                             y_hat_s=y_s, eigenvalues=tuple(lam), eigenvectors=V,
                             classification=cls, in_region=bool(np.linalg.norm(x_s) <= region_radius),
                             region_radius=float(region_radius))


def canonical_path(analysis: CanonicalAnalysis, model: FittedModel,
                   distances=(0.25, 0.5, 0.75, 1.0)) -> list:
    """Points x_s +/- t*v along the flattest canonical direction (the
    eigenvector with the smallest |lambda|; first such index on ties)."""
    lam = np.asarray(analysis.eigenvalues)
    flat = int(np.argmin(np.abs(lam)))
    v = analysis.eigenvectors[:, flat]
    x_s = np.array(analysis.stationary_coded)
    factors = model.design.factors
    points = []
    run_id = 1
    for t in distances:
        for sign in (1.0, -1.0):
            coded = x_s + sign * float(t) * v
            nat = code_to_natural(factors, coded)
            points.append(DesignPoint(run_id=run_id, coded=tuple(coded),
                                      natural=tuple(nat), point_type="path"))
            run_id += 1
    return points
