"""Path of steepest ascent from a first-order fit, and re-centering on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .designs import Design, DesignPoint, code_to_natural
from .modelfit import FittedModel

DEFAULT_DISTANCES = tuple(round(0.5 * i, 1) for i in range(1, 13))  # 0.5 .. 6.0


@dataclass(frozen=True)
class AscentPath:
    origin: tuple          # coded center, all zeros
    direction: tuple       # unit vector along the FO gradient
    distances: tuple
    points: tuple          # DesignPoint with point_type="path"
    factors: tuple

    def natural_matrix(self) -> np.ndarray:
        return np.array([p.natural for p in self.points])

    def to_frame(self, responses: dict | None = None, D=None) -> pd.DataFrame:
        """Path table: distance, factor naturals, then any responses and D."""
        df = pd.DataFrame(self.natural_matrix(),
                          columns=[f.name for f in self.factors])
        df.insert(0, "distance", list(self.distances))
        if responses:
            for name, vals in responses.items():
                df[name] = np.asarray(vals, dtype=float)
        if D is not None:
            df["D"] = np.asarray(D, dtype=float)
        return df


def steepest_path(model: FittedModel, distances=DEFAULT_DISTANCES) -> AscentPath:
    """Evaluation points along the normalized FO-coefficient direction.

    The point at distance t is t * direction in coded units (the path passes
    through the design center); natural units come from the design's factors.
    """
    if model.order != "FO":
        raise ValueError("steepest ascent requires a first-order model")
    g = model.linear_coefficients()
    norm = float(np.linalg.norm(g))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(model.coefficients))))
    if norm <= tol:
        raise ValueError("all linear coefficients are zero: no ascent direction")
    direction = g / norm
    factors = model.design.factors
    k = len(factors)
    points = []
    for i, t in enumerate(distances):
        coded = float(t) * direction
        nat = code_to_natural(factors, coded)
        points.append(DesignPoint(run_id=i + 1, coded=tuple(coded),
                                  natural=tuple(nat), point_type="path"))
    return AscentPath(origin=(0.0,) * k, direction=tuple(direction),
                      distances=tuple(float(t) for t in distances),
                      points=tuple(points), factors=tuple(factors))


def select_recenter(path: AscentPath, D_values):
    """Distance along the path with the highest D (earliest on ties) and the
    natural-unit coordinates there, which become the next design center."""
    D_values = np.asarray(D_values, dtype=float)
    if len(D_values) != len(path.points):
        raise ValueError("D_values must align with path points")
    if len(D_values) == 0:
        raise ValueError("empty path")
    order = np.lexsort((path.distances, -D_values))
    best = int(order[0])
    return path.distances[best], np.array(path.points[best].natural)
