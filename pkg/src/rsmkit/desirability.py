"""Derringer-Suich desirability transforms and their geometric-mean composition.

Each response is mapped onto [0, 1] relative to its goal; the overall
desirability D is the m-th root of the product of the m individual values, so
any fully undesirable response (d_i = 0) forces D = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DesirabilitySpec:
    """Goal specification for one response.

    goal="minimize": desirability 1 at/below target T, 0 at/above upper limit U.
    goal="maximize": desirability 0 at/below lower limit L, 1 at/above target T.
    goal="target":   ramps up on [L, T] with exponent r_low and down on [T, U]
                     with exponent r_high; 0 outside [L, U].

    The weight r (r=1 default) bends the ramp: r=1 is linear.
    """

    goal: str
    T: float
    U: float | None = None
    L: float | None = None
    r: float = 1.0
    r_low: float | None = None
    r_high: float | None = None

    def __post_init__(self):
        if self.goal not in ("minimize", "maximize", "target"):
            raise ValueError(f"unknown goal {self.goal!r}")
        if self.r <= 0:
            raise ValueError("weight r must be > 0")
        if self.goal == "minimize":
            if self.U is None or not self.T < self.U:
                raise ValueError("minimize requires T < U")
        elif self.goal == "maximize":
            if self.L is None or not self.L < self.T:
                raise ValueError("maximize requires L < T")
        else:
            if self.L is None or self.U is None or not (self.L < self.T < self.U):
                raise ValueError("target requires L < T < U")
            for name, val in (("r_low", self.r_low), ("r_high", self.r_high)):
                if val is not None and val <= 0:
                    raise ValueError(f"{name} must be > 0")


def d_min(y: float, spec: DesirabilitySpec) -> float:
    """Smaller-is-better desirability: 1 below T, 0 above U, power ramp between."""
    if spec.goal != "minimize":
        raise ValueError("d_min requires a minimize spec")
    if y < spec.T:
        return 1.0
    if y > spec.U:
        return 0.0
    return float(((spec.U - y) / (spec.U - spec.T)) ** spec.r)


def d_max(y: float, spec: DesirabilitySpec) -> float:
    """Larger-is-better desirability: 0 below L, 1 above T, power ramp between."""
    if spec.goal != "maximize":
        raise ValueError("d_max requires a maximize spec")
    if y < spec.L:
        return 0.0
    if y > spec.T:
        return 1.0
    return float(((y - spec.L) / (spec.T - spec.L)) ** spec.r)


def d_target(y: float, spec: DesirabilitySpec) -> float:
    """Two-sided desirability: 1 at T, ramping to 0 at both L and U."""
    if spec.goal != "target":
        raise ValueError("d_target requires a target spec")
    r_low = spec.r_low if spec.r_low is not None else spec.r
    r_high = spec.r_high if spec.r_high is not None else spec.r
    if y < spec.L or y > spec.U:
        return 0.0
    if y <= spec.T:
        return float(((y - spec.L) / (spec.T - spec.L)) ** r_low)
    return float(((spec.U - y) / (spec.U - spec.T)) ** r_high)


def desirability(y: float, spec: DesirabilitySpec) -> float:
    """Dispatch on the spec's goal."""
    if spec.goal == "minimize":
        return d_min(y, spec)
    if spec.goal == "maximize":
        return d_max(y, spec)
    return d_target(y, spec)


def overall(d) -> float:
    """Geometric mean of individual desirabilities; empty input is an error."""
    d = np.asarray(d, dtype=float)
    if d.size == 0:
        raise ValueError("overall desirability of an empty vector is undefined")
    if np.any((d < 0) | (d > 1)):
        raise ValueError("individual desirabilities must lie in [0, 1]")
    if np.any(d == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(d))))
