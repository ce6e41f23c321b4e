"""Response evaluation backends.

``surrogate_eval`` computes deterministic synthetic IOH/UDI responses from an
analytic quadratic surrogate, standing in for the expensive building
simulations so a whole optimization campaign runs in seconds. The surrogate's
overall-desirability maximum sits at overhang 3.78 m, west WWR 3.76 %, south
WWR 29.34 % by construction, giving the campaign a known ground truth.

``csv_batch_eval`` mirrors a simulator hand-off: it writes ``requests.csv``,
waits for ``responses.csv`` and validates the returned rows.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ._rng import DOMAIN_NOISE, substream
from .designs import Design

RESPONSES = ("IOH", "UDI")


class EvaluationTimeout(RuntimeError):
    pass


class MalformedResponseError(ValueError):
    pass


class RejectedRunError(ValueError):
    def __init__(self, reasons: dict):
        self.reasons = reasons
        detail = "; ".join(f"run {rid}: {msg}" for rid, msg in sorted(reasons.items()))
        super().__init__(f"rejected runs: {detail}")


@dataclass
class EvaluationResult:
    """Per-run response values keyed by run_id, in run_id order."""

    responses: tuple
    values: dict                      # run_id -> {response: value}

    def __post_init__(self):
        self.values = {int(k): dict(v) for k, v in sorted(self.values.items())}

    def column(self, response: str) -> np.ndarray:
        return np.array([self.values[rid][response] for rid in sorted(self.values)])

    def to_frame(self) -> pd.DataFrame:
        rows = [{"run_id": rid, **vals} for rid, vals in sorted(self.values.items())]
        return pd.DataFrame(rows)


# Factor-name aliases for each surrogate input; a run's input is the mean of
# whichever aliased factors its design carries.
DEFAULT_SURROGATE_INPUTS = {
    "x1": ("x1", "overhang_south", "overhang_west"),
    "x2": ("x2", "wwr_west"),
    "x3": ("x3", "wwr_south"),
}

DEFAULT_SURROGATE_BOUNDS = {
    "x1": (0.0, 8.0),      # overhang depth, meters
    "x2": (0.0, 100.0),    # WWR, percent
    "x3": (0.0, 100.0),
}


@dataclass(frozen=True)
class SurrogateSpec:
    """Analytic-surrogate configuration.

    ``bounds`` is optional: steepest-ascent paths legitimately probe beyond
    the design box, so runs are only rejected when explicit bounds are given.
    """

    inputs: dict = field(default_factory=lambda: dict(DEFAULT_SURROGATE_INPUTS))
    bounds: dict | None = None
    noise_sd: float = 0.0
    seed: int = 0


def surrogate_ioh(x1: float, x2: float, x3: float) -> float:
    u1 = (x1 - 3.78) / 1.5
    u2 = (x2 - 3.76) / 10.0
    u3 = (x3 - 29.34) / 12.0
    return 8.3 + 0.9 * u1 * u1 + 0.6 * u2 * u2 + 0.5 * u3 * u3 + 0.15 * u1 * u3


def surrogate_udi(x1: float, x2: float, x3: float) -> float:
    u1 = (x1 - 3.78) / 1.5
    u2 = (x2 - 3.76) / 10.0
    u3 = (x3 - 29.34) / 12.0
    return 79.7 - 1.2 * u1 * u1 - 1.0 * u2 * u2 - 0.8 * u3 * u3


SURROGATE_OPTIMUM = (3.78, 3.76, 29.34)


def _resolve_inputs(spec: SurrogateSpec, factor_names) -> dict:
    """Column indices feeding each surrogate input (mean over alias matches)."""
    resolved = {}
    for inp, aliases in spec.inputs.items():
        idx = [i for i, n in enumerate(factor_names) if n in aliases]
        if not idx:
            raise ValueError(f"no factor maps to surrogate input {inp!r}; "
                             f"expected one of {aliases}")
        resolved[inp] = idx
    return resolved


def surrogate_eval(points: Design, spec: SurrogateSpec = SurrogateSpec()) -> EvaluationResult:
    """Evaluate the analytic surrogate on every design run.

    Runs whose resolved inputs fall outside the spec's bounds are rejected
    (collected into a single RejectedRunError).
    """
    resolved = _resolve_inputs(spec, points.factor_names)
    nat = points.natural_matrix()
    values = {}
    reasons = {}
    for p, row in zip(points.points, nat):
        x = {inp: float(np.mean(row[idx])) for inp, idx in resolved.items()}
        if spec.bounds:
            bad = []
            for inp, (lo, hi) in spec.bounds.items():
                if not lo <= x[inp] <= hi:
                    bad.append(f"{inp}={x[inp]:.4g} outside [{lo}, {hi}]")
            if bad:
                reasons[p.run_id] = ", ".join(bad)
                continue
        ioh = surrogate_ioh(x["x1"], x["x2"], x["x3"])
        udi = surrogate_udi(x["x1"], x["x2"], x["x3"])
        if spec.noise_sd > 0:
            z = substream(spec.seed, DOMAIN_NOISE, p.run_id).normal(0.0, spec.noise_sd, 2)
            ioh += z[0]
            udi += z[1]
        values[p.run_id] = {"IOH": ioh, "UDI": udi}
    if reasons:
        raise RejectedRunError(reasons)
    return EvaluationResult(responses=RESPONSES, values=values)


def csv_batch_eval(points: Design, workdir, responses=RESPONSES,
                   timeout_s: float = 60.0, poll_s: float = 0.1) -> EvaluationResult:
    """File-based evaluation round trip.

    Writes the design to ``workdir/requests.csv`` and polls until
    ``workdir/responses.csv`` exists, then validates that it holds one numeric
    row per run_id with the requested response columns.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    points.to_csv(workdir / "requests.csv")
    responses_path = workdir / "responses.csv"
    deadline = time.monotonic() + timeout_s
    while not responses_path.exists():
        if time.monotonic() > deadline:
            raise EvaluationTimeout(f"no {responses_path} after {timeout_s:.1f}s")
        time.sleep(poll_s)
    df = pd.read_csv(responses_path)
    missing_cols = [c for c in ("run_id", *responses) if c not in df.columns]
    if missing_cols:
        raise MalformedResponseError(f"responses.csv missing columns {missing_cols}")
    expected = {p.run_id for p in points.points}
    got = df["run_id"].tolist()
    if sorted(got) != sorted(set(got)):
        dupes = sorted({g for g in got if got.count(g) > 1})
        raise MalformedResponseError(f"duplicate run_id rows: {dupes}")
    missing = sorted(expected - set(got))
    if missing:
        raise MalformedResponseError(f"responses.csv missing run_id(s): {missing}")
    values = {}
    for _, row in df.iterrows():
        rid = int(row["run_id"])
        if rid not in expected:
            continue
        vals = {}
        for r in responses:
            v = pd.to_numeric(pd.Series([row[r]]), errors="coerce").iloc[0]
            if pd.isna(v):
                raise MalformedResponseError(
                    f"non-numeric {r!r} value {row[r]!r} for run_id {rid}")
            vals[r] = float(v)
        values[rid] = vals
    return EvaluationResult(responses=tuple(responses), values=values)
