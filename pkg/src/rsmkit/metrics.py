"""Comfort and daylight response metrics from hourly series.

Thermal side: indoor overheating hours (IOH) against the adaptive upper
comfort limit driven by the prevailing mean outdoor temperature. Daylight
side: annual UDI, DA, cDA and sDA over an illuminance sensor grid restricted
to a daily analysis window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

HOURS_PER_YEAR = 8760
DAYS_PER_YEAR = 365

ANALYSIS_START_HOUR = 6   # daily daylight window 06:00-19:00, 13 hours
ANALYSIS_END_HOUR = 19

WEIGHT_CUTOFF = 1e-6      # drop exponential-history terms below this weight


@dataclass(frozen=True)
class AdaptiveComfortParams:
    """Exponential weight for the prevailing mean and the acceptability offset
    added to the neutral comfort temperature (3.5 C for the 80% limit)."""

    alpha: float = 0.9
    acceptability_offset: float = 3.5

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")


@dataclass(frozen=True)
class OutdoorSeries:
    t_out: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_out, dtype=float)
        if t.shape != (HOURS_PER_YEAR,):
            raise ValueError(f"t_out must have {HOURS_PER_YEAR} hourly values")
        object.__setattr__(self, "t_out", t)


@dataclass(frozen=True)
class HourlyZoneSeries:
    zone: str
    area: float
    t_op: np.ndarray
    occupied: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_op, dtype=float)
        occ = np.asarray(self.occupied, dtype=bool)
        if t.shape != (HOURS_PER_YEAR,) or occ.shape != (HOURS_PER_YEAR,):
            raise ValueError(f"zone series must have {HOURS_PER_YEAR} hourly values")
        if self.area <= 0:
            raise ValueError("zone area must be positive")
        object.__setattr__(self, "t_op", t)
        object.__setattr__(self, "occupied", occ)


def default_analysis_hours(n_hours: int) -> np.ndarray:
    """Boolean mask marking the daily 06:00-19:00 window (13 hours per day)."""
    hod = np.arange(n_hours) % 24
    return (hod >= ANALYSIS_START_HOUR) & (hod < ANALYSIS_END_HOUR)


@dataclass(frozen=True)
class IlluminanceGrid:
    """Sensor illuminance matrix (hours x sensors) with an analysis window."""

    sensors: tuple                 # sensor ids
    E: np.ndarray                  # lux, hours x sensors
    analysis_hours: np.ndarray | None = None
    zones: tuple = ()              # optional zone membership, aligned with sensors

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        if E.ndim != 2 or E.shape[1] != len(self.sensors):
            raise ValueError("E must be hours x sensors")
        if np.any(E < 0):
            raise ValueError("illuminance must be nonnegative")
        mask = self.analysis_hours
        if mask is None:
            mask = default_analysis_hours(E.shape[0])
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (E.shape[0],):
            raise ValueError("analysis_hours length must match E rows")
        if not mask.any():
            raise ValueError("analysis window is empty")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "analysis_hours", mask)


def daily_means(t_out: OutdoorSeries) -> np.ndarray:
    t = t_out.t_out
    if np.any(~np.isfinite(t)):
        raise ValueError("outdoor series contains missing values")
    return t.reshape(DAYS_PER_YEAR, 24).mean(axis=1)


def prevailing_mean(t_out: OutdoorSeries,
                    params: AdaptiveComfortParams = AdaptiveComfortParams()) -> np.ndarray:
    """Prevailing mean outdoor temperature per day (length 365).

    Exponentially weighted mean of previous daily means with weight alpha,
    truncated once a term's weight drops below WEIGHT_CUTOFF and always
    renormalized to weight sum 1 so a constant year is a fixed point. The
    first day, having no history, falls back to its own daily mean.
    """
    te = daily_means(t_out)
    alpha = params.alpha
    if alpha == 0.0:
        n_terms = 1
    else:
        n_terms = min(int(math.floor(math.log(WEIGHT_CUTOFF) / math.log(alpha))) + 1,
                      DAYS_PER_YEAR)
    weights = alpha ** np.arange(n_terms)
    tpm = np.empty(DAYS_PER_YEAR)
    tpm[0] = te[0]
    for d in range(1, DAYS_PER_YEAR):
        m = min(d, n_terms)
        w = weights[:m]
        hist = te[d - 1::-1][:m]
        tpm[d] = float(w @ hist / w.sum())
    return tpm


def adaptive_upper_limit(t_pm,
                         params: AdaptiveComfortParams = AdaptiveComfortParams()):
    """Upper acceptability limit: 0.31 * t_pm + 17.8 + offset (29.732 C at 27.2 C)."""
    t_pm = np.asarray(t_pm, dtype=float)
    out = 0.31 * t_pm + 17.8 + params.acceptability_offset
    return float(out) if out.ndim == 0 else out


def ioh(zones, t_out: OutdoorSeries,
        params: AdaptiveComfortParams = AdaptiveComfortParams()) -> float:
    """Area-weighted indoor overheating hours, in percent.

    An hour counts for a zone when it is occupied and the operative
    temperature exceeds that day's adaptive upper limit. Zone exceedance and
    occupied hours are both weighted by the zone's share of the total floor
    area: IOH = sum_z(a_z * h_z) / sum_z(a_z * H_z) * 100 with areas
    normalized to fractions of the total.
    """
    zones = list(zones)
    if not zones:
        raise ValueError("at least one zone is required")
    limits_daily = adaptive_upper_limit(prevailing_mean(t_out, params), params)
    limits_hourly = np.repeat(limits_daily, 24)
    total_area = sum(z.area for z in zones)
    num = 0.0
    den = 0.0
    for z in zones:
        w = z.area / total_area
        exceed = (z.t_op > limits_hourly) & z.occupied
        num += w * float(exceed.sum())
        den += w * float(z.occupied.sum())
    if den == 0:
        raise ValueError("no occupied hours in any zone")
    return 100.0 * num / den


def udi(grid: IlluminanceGrid, low: float = 100.0, high: float = 3000.0) -> float:
    """Useful daylight illuminance: percent of analysis hours within [low, high],
    averaged over sensors."""
    E = grid.E[grid.analysis_hours]
    ok = (E >= low) & (E <= high)
    return 100.0 * float(ok.mean(axis=0).mean())


def da(grid: IlluminanceGrid, threshold: float = 300.0) -> float:
    """Daylight autonomy: percent of analysis hours at or above the threshold,
    averaged over sensors."""
    E = grid.E[grid.analysis_hours]
    return 100.0 * float((E >= threshold).mean(axis=0).mean())


def cda(grid: IlluminanceGrid, threshold: float = 300.0) -> float:
    """Continuous daylight autonomy: hours below the threshold earn partial
    credit E/threshold instead of zero."""
    E = grid.E[grid.analysis_hours]
    credit = np.minimum(E / threshold, 1.0)
    return 100.0 * float(credit.mean(axis=0).mean())


def sda(grid: IlluminanceGrid, threshold: float = 300.0,
        time_fraction: float = 0.5) -> float:
    """Spatial daylight autonomy: percent of sensors whose per-sensor daylight
    autonomy reaches ``time_fraction`` of analysis hours."""
    E = grid.E[grid.analysis_hours]
    per_sensor = (E >= threshold).mean(axis=0)
    return 100.0 * float((per_sensor >= time_fraction).mean())


# ---------------------------------------------------------------------------
# CSV loaders (schemas: hour,zone,t_op,occupied / hour,t_out / hour,sensor,lux)

def load_zone_series(path, areas: dict | None = None) -> list:
    """Read a long-format `hour,zone,t_op,occupied[,area]` CSV into zone series.

    Areas come from an optional `area` column, or the ``areas`` mapping;
    zones without either default to area 1 (equal weighting).
    """
    df = pd.read_csv(path)
    required = {"hour", "zone", "t_op", "occupied"}
    if not required <= set(df.columns):
        raise ValueError(f"zone CSV needs columns {sorted(required)}")
    out = []
    for zone, sub in df.groupby("zone", sort=True):
        sub = sub.sort_values("hour")
        area = 1.0
        if "area" in sub.columns:
            area = float(sub["area"].iloc[0])
        if areas and str(zone) in areas:
            area = float(areas[str(zone)])
        out.append(HourlyZoneSeries(zone=str(zone), area=area,
                                    t_op=sub["t_op"].to_numpy(dtype=float),
                                    occupied=sub["occupied"].to_numpy(dtype=float) > 0))
    return out


def load_outdoor_series(path) -> OutdoorSeries:
    df = pd.read_csv(path)
    if not {"hour", "t_out"} <= set(df.columns):
        raise ValueError("outdoor CSV needs columns ['hour', 't_out']")
    df = df.sort_values("hour")
    return OutdoorSeries(t_out=df["t_out"].to_numpy(dtype=float))


def load_illuminance_grid(path, sensor_zone_path=None) -> IlluminanceGrid:
    """Read a long-format `hour,sensor,lux` CSV (plus optional sensor,zone map)."""
    df = pd.read_csv(path)
    if not {"hour", "sensor", "lux"} <= set(df.columns):
        raise ValueError("illuminance CSV needs columns ['hour', 'sensor', 'lux']")
    wide = df.pivot_table(index="hour", columns="sensor", values="lux").sort_index()
    if wide.isna().any().any():
        raise ValueError("illuminance CSV has missing hour/sensor combinations")
    sensors = tuple(str(s) for s in wide.columns)
    zones: tuple = ()
    if sensor_zone_path is not None:
        zmap = pd.read_csv(sensor_zone_path)
        if not {"sensor", "zone"} <= set(zmap.columns):
            raise ValueError("sensor map CSV needs columns ['sensor', 'zone']")
        lookup = dict(zip(zmap["sensor"].astype(str), zmap["zone"].astype(str)))
        zones = tuple(lookup.get(s, "") for s in sensors)
    return IlluminanceGrid(sensors=sensors, E=wide.to_numpy(dtype=float), zones=zones)
