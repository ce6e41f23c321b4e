"""Sequential optimization campaign driver.

Runs the full multi-stage procedure over a pluggable evaluator:

    screening (fractional factorial + stepwise/Lasso on overall desirability)
    -> repeat: first-order design -> adequacy check -> steepest ascent
    -> central composite design -> second-order fit -> canonical analysis
    -> confirmation run at the stationary point -> residual bootstrap

State is persisted to ``workdir/state.json`` after every stage, so an
interrupted campaign resumes at the first unfinished stage and reproduces the
uninterrupted result exactly (all randomness is keyed off the master seed and
global evaluation indices).
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import ascent as ascent_mod
from . import bootstrap as bootstrap_mod
from . import canonical as canonical_mod
from . import desirability as desir_mod
from . import evaluator as eval_mod
from . import modelfit, screening
from .designs import (CCDSpec, Design, DesignPoint, Factor, central_composite,
                      first_order_design, fractional_factorial, natural_to_code)

STATE_SCHEMA = "rsmkit-campaign-state-v1"

STAGE_GRAMMAR_HINT = "screening? (fo ascent)* fo ccd canonical bootstrap"


class CampaignConfigError(ValueError):
    """Invalid campaign configuration (CLI exit code 2)."""


class CampaignEvaluationError(RuntimeError):
    """Evaluator failure; the stage is recorded as failed and can be resumed
    (CLI exit code 3)."""


DEFAULT_FO_ALPHA = 0.05
DEFAULT_LOF_ALPHA = 0.05
DEFAULT_MAX_ASCENT_CYCLES = 5
ASCENT_GRID_LIMIT = 12.0


def default_config() -> dict:
    """Paper-shaped default: 8 screening factors, surrogate evaluator, three
    campaign factors after tying the south and west overhangs together."""
    overhang = {"low": 0.5, "high": 2.5, "units": "m"}
    wwr = {"low": 5.0, "high": 40.0, "units": "%"}
    return {
        "seed": 123,
        "factors": [
            {"name": "overhang_north", **overhang},
            {"name": "overhang_south", **overhang},
            {"name": "overhang_east", **overhang},
            {"name": "overhang_west", **overhang},
            {"name": "wwr_north", **wwr},
            {"name": "wwr_south", **wwr},
            {"name": "wwr_east", **wwr},
            {"name": "wwr_west", **wwr},
        ],
        "responses": [
            {"name": "IOH", "goal": "minimize", "target": 0.0, "limit": None, "weight": 1.0},
            {"name": "UDI", "goal": "maximize", "target": 100.0, "limit": None, "weight": 1.0},
        ],
        "evaluator": {"kind": "surrogate", "noise_sd": 0.0, "seed": 0},
        "screening": {"p": 2, "generators": ["G=ABCD", "H=ABEF"], "nfolds": 3},
        "ties": [{"name": "x1", "members": ["overhang_south", "overhang_west"]}],
        "inactive": {
            "overhang_north": {"mean": 0.5, "sd": 2.0},
            "overhang_east": {"mean": 0.5, "sd": 2.0},
            "wwr_north": {"mean": 15.0, "sd": 2.0},
            "wwr_east": {"mean": 15.0, "sd": 2.0},
        },
        "rsm": {
            "center": {"x1": 2.5, "wwr_west": 15.0, "wwr_south": 40.0},
            "half_range": {"x1": 0.4, "wwr_west": 4.0, "wwr_south": 4.0},
            "n_center": 3,
            "ccd_n_center": 3,
            "alpha_mode": "rotatable",
            "max_ascent_cycles": DEFAULT_MAX_ASCENT_CYCLES,
            "fo_alpha": DEFAULT_FO_ALPHA,
            "lof_alpha": DEFAULT_LOF_ALPHA,
            "ascent_distances": None,
            "bootstrap_B": 1000,
        },
    }


def _validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise CampaignConfigError("config must be a JSON object")
    for key in ("factors", "responses", "rsm"):
        if key not in cfg:
            raise CampaignConfigError(f"config is missing required section {key!r}")
    if len(cfg["responses"]) < 1:
        raise CampaignConfigError("at least one response is required")
    names = [f["name"] for f in cfg["factors"]]
    if len(set(names)) != len(names):
        raise CampaignConfigError("duplicate factor names")
    for f in cfg["factors"]:
        if not f["low"] < f["high"]:
            raise CampaignConfigError(f"factor {f['name']}: low must be < high")
    for r in cfg["responses"]:
        if r["goal"] not in ("minimize", "maximize"):
            raise CampaignConfigError(f"response {r['name']}: goal must be "
                                      "minimize or maximize")
    rsm = cfg["rsm"]
    if set(rsm["center"]) != set(rsm["half_range"]):
        raise CampaignConfigError("rsm.center and rsm.half_range must list the "
                                  "same factors")
    if cfg.get("screening") is None:
        for r in cfg["responses"]:
            if r.get("limit") is None:
                raise CampaignConfigError(
                    f"response {r['name']}: explicit limit required when the "
                    "screening stage is skipped")
    ties = cfg.get("ties") or []
    tied_members = [m for t in ties for m in t["members"]]
    if len(set(tied_members)) != len(tied_members):
        raise CampaignConfigError("a factor may appear in at most one tie group")
    for m in tied_members:
        if m not in names:
            raise CampaignConfigError(f"tie member {m!r} is not a factor")
    return cfg


class CampaignState:
    """Persisted campaign state: stage records plus the driver's cursor."""

    def __init__(self, config: dict):
        self.config = _validate_config(config)
        self.phase = "screening" if config.get("screening") else "fo"
        self.cycle = 0
        self.eval_count = 0
        self.stages: list = []
        self.failures: list = []
        self.limits: dict = {}           # response name -> resolved {T, U/L, r}
        self.campaign_factors: list = [] # [{"name", "members": [...]}]
        self.inactive: list = []         # [{"name", "mean", "sd"}]
        self.center: dict = {}
        self.timestamps: dict = {"created": time.strftime("%Y-%m-%dT%H:%M:%S")}

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": STATE_SCHEMA,
            "config": self.config,
            "phase": self.phase,
            "cycle": self.cycle,
            "eval_count": self.eval_count,
            "limits": self.limits,
            "campaign_factors": self.campaign_factors,
            "inactive": self.inactive,
            "center": self.center,
            "stages": self.stages,
            "failures": self.failures,
            "timestamps": self.timestamps,
        }

    def save(self, workdir) -> None:
        self.timestamps["updated"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        path = Path(workdir) / "state.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))
        tmp.replace(path)

    @classmethod
    def load(cls, workdir) -> "CampaignState":
        data = json.loads((Path(workdir) / "state.json").read_text())
        if data.get("schema") != STATE_SCHEMA:
            raise CampaignConfigError(f"unrecognized state schema in {workdir}")
        state = cls(data["config"])
        for key in ("phase", "cycle", "eval_count", "limits", "campaign_factors",
                    "inactive", "center", "stages", "failures", "timestamps"):
            setattr(state, key, data[key])
        return state

    # -- convenience accessors -----------------------------------------------

    def stage_of_kind(self, kind: str, which: int = -1) -> dict:
        matches = [s for s in self.stages if s["kind"] == kind]
        if not matches:
            raise KeyError(f"no {kind} stage in state")
        return matches[which]

    @property
    def total_evaluations(self) -> int:
        return self.eval_count

    @property
    def classification(self) -> str:
        return self.stage_of_kind("canonical")["analysis"]["classification"]

    @property
    def stationary_natural(self) -> dict:
        stage = self.stage_of_kind("canonical")
        names = [f["name"] for f in self.campaign_factors]
        return dict(zip(names, stage["analysis"]["stationary_natural"]))

    @property
    def confirmation(self) -> dict:
        return self.stage_of_kind("canonical")["confirmation"]

    @property
    def ci95(self) -> dict:
        return self.stage_of_kind("bootstrap")["ci95"]


# -- helpers -----------------------------------------------------------------


def _base_factors(cfg: dict) -> list:
    return [Factor(name=f["name"], low=float(f["low"]), high=float(f["high"]),
                   units=f.get("units", "")) for f in cfg["factors"]]


def _desirability_specs(state: CampaignState) -> dict:
    specs = {}
    for r in state.config["responses"]:
        name = r["name"]
        lim = state.limits.get(name, {}).get("limit", r.get("limit"))
        if lim is None:
            raise CampaignConfigError(f"response {name}: no desirability limit "
                                      "available (run screening or set one)")
        weight = float(r.get("weight", 1.0))
        if r["goal"] == "minimize":
            specs[name] = desir_mod.DesirabilitySpec(goal="minimize",
                                                     T=float(r["target"]),
                                                     U=float(lim), r=weight)
        else:
            specs[name] = desir_mod.DesirabilitySpec(goal="maximize",
                                                     T=float(r["target"]),
                                                     L=float(lim), r=weight)
    return specs


def _overall_d(state: CampaignState, per_run: list) -> list:
    specs = _desirability_specs(state)
    out = []
    for vals in per_run:
        d = [desir_mod.desirability(vals[name], specs[name]) for name in specs]
        out.append(desir_mod.overall(d))
    return out


def _stage_factors(state: CampaignState) -> list:
    cfg = state.config
    base = {f.name: f for f in _base_factors(cfg)}
    hr = cfg["rsm"]["half_range"]
    factors = []
    for cf in state.campaign_factors:
        name = cf["name"]
        center = float(state.center[name])
        h = float(hr[name])
        units = base[cf["members"][0]].units
        factors.append(Factor(name=name, low=center - h, high=center + h, units=units))
    return factors


def _inactive_policies(state: CampaignState) -> list:
    base = {f.name: f for f in _base_factors(state.config)}
    return [screening.InactiveFactorPolicy(factor=base[p["name"]],
                                           mean=float(p["mean"]), sd=float(p["sd"]))
            for p in state.inactive]


def _make_evaluator(state: CampaignState, workdir, stage_tag: str):
    cfg = state.config.get("evaluator", {"kind": "surrogate"})
    kind = cfg.get("kind", "surrogate")
    if kind == "surrogate":
        spec_kwargs = {}
        if "inputs" in cfg:
            spec_kwargs["inputs"] = {k: tuple(v) for k, v in cfg["inputs"].items()}
        if "bounds" in cfg:
            spec_kwargs["bounds"] = {k: tuple(v) for k, v in cfg["bounds"].items()}
        spec = eval_mod.SurrogateSpec(noise_sd=float(cfg.get("noise_sd", 0.0)),
                                      seed=int(cfg.get("seed", 0)), **spec_kwargs)
        return lambda design: eval_mod.surrogate_eval(design, spec)
    if kind == "csv":
        eval_dir = Path(workdir) / "eval" / stage_tag
        timeout = float(cfg.get("timeout_s", 3600.0))
        poll = float(cfg.get("poll_s", 0.5))
        names = tuple(r["name"] for r in state.config["responses"])
        return lambda design: eval_mod.csv_batch_eval(design, eval_dir,
                                                      responses=names,
                                                      timeout_s=timeout, poll_s=poll)
    raise CampaignConfigError(f"unknown evaluator kind {kind!r}")


def _expand_to_base(state: CampaignState, stage_design: Design) -> Design:
    """Full-input evaluation design over the base factors.

    Tied campaign factors broadcast their value to every member; inactive
    factors get per-run randomized values keyed to the global evaluation
    index, mimicking re-randomization of non-significant simulator inputs.
    """
    base = _base_factors(state.config)
    members = {cf["name"]: cf["members"] for cf in state.campaign_factors}
    policies = _inactive_policies(state)
    seed = int(state.config.get("seed", 123))
    rows = []
    for i, point in enumerate(stage_design.points):
        values = {}
        for fname, val in zip(stage_design.factor_names, point.natural):
            for m in members.get(fname, [fname]):
                values[m] = float(val)
        if policies:
            drawn = screening.assign_inactive(policies, seed=seed + state.eval_count + i)
            values.update(drawn)
        rows.append([values[f.name] for f in base])
    points = []
    for i, (row, p) in enumerate(zip(rows, stage_design.points)):
        coded = natural_to_code(base, row)
        points.append(DesignPoint(run_id=i + 1, coded=tuple(coded),
                                  natural=tuple(row), point_type=p.point_type))
    return Design(factors=tuple(base), points=tuple(points))


def _evaluate(state: CampaignState, stage_design: Design, workdir, stage_tag: str):
    """Evaluate a stage design, returning (per-run response dicts, D values)."""
    if state.campaign_factors and stage_design.factor_names != tuple(
            f["name"] for f in state.config["factors"]):
        eval_design = _expand_to_base(state, stage_design)
    else:
        eval_design = stage_design
    evaluate = _make_evaluator(state, workdir, stage_tag)
    try:
        result = evaluate(eval_design)
    except (eval_mod.EvaluationTimeout, eval_mod.MalformedResponseError,
            eval_mod.RejectedRunError) as exc:
        state.failures.append({"stage_tag": stage_tag, "error": str(exc),
                               "eval_count_before": state.eval_count})
        state.save(workdir)
        raise CampaignEvaluationError(f"stage {stage_tag}: {exc}") from exc
    per_run = [result.values[p.run_id] for p in stage_design.points]
    state.eval_count += len(stage_design)
    return per_run, eval_design


def _record_runs(stage_design: Design, per_run: list, D=None) -> list:
    rows = []
    for p, vals in zip(stage_design.points, per_run):
        row = {"run_id": p.run_id, "pt_type": p.point_type,
               "natural": [float(v) for v in p.natural],
               "coded": [float(v) for v in p.coded]}
        row.update({k: float(v) for k, v in vals.items()})
        if D is not None:
            row["D"] = float(D[p.run_id - 1])
        rows.append(row)
    return rows


def _design_record(design: Design) -> dict:
    return {"factors": [{"name": f.name, "low": f.low, "high": f.high,
                         "units": f.units} for f in design.factors],
            "n_runs": len(design)}


def _design_from_record(stage: dict) -> Design:
    factors = tuple(Factor(**f) for f in stage["design"]["factors"])
    points = tuple(DesignPoint(run_id=r["run_id"], coded=tuple(r["coded"]),
                               natural=tuple(r["natural"]), point_type=r["pt_type"])
                   for r in stage["runs"])
    return Design(factors=factors, points=points)


def _refit_from_stage(stage: dict, order: str) -> modelfit.FittedModel:
    design = _design_from_record(stage)
    y = np.array([r["D"] for r in stage["runs"]])
    return modelfit.fit(design, y, order=order)


def _write_stage_csv(workdir, tag: str, design: Design, per_run, D) -> None:
    df = design.to_frame(coded=False)
    for name in per_run[0]:
        df[name] = [v[name] for v in per_run]
    df["D"] = list(D)
    df.to_csv(Path(workdir) / f"{tag}.csv", index=False)


# -- stage executors ---------------------------------------------------------


def _run_screening(state: CampaignState, workdir) -> None:
    cfg = state.config
    scr = cfg["screening"]
    factors = _base_factors(cfg)
    design, ffspec = fractional_factorial(factors, p=int(scr.get("p", 2)),
                                          generators=scr.get("generators"))
    tag = f"stage_{len(state.stages):02d}_screening"
    per_run, _ = _evaluate(state, design, workdir, tag)

    # freeze desirability limits from the observed screening responses
    for r in cfg["responses"]:
        vals = [v[r["name"]] for v in per_run]
        lim = r.get("limit")
        if lim is None:
            lim = max(vals) if r["goal"] == "minimize" else min(vals)
        state.limits[r["name"]] = {"limit": float(lim), "goal": r["goal"]}
    D = _overall_d(state, per_run)

    seed = int(cfg.get("seed", 123))
    sw = screening.stepwise_bic(design, D)
    la = screening.lasso_cv(design, D, nfolds=int(scr.get("nfolds", 3)), seed=seed)
    active = screening.active_factors(sw, la)

    ties = cfg.get("ties") or []
    tied_members = {m for t in ties for m in t["members"]}
    campaign_factors = []
    order = list(cfg["rsm"]["center"])
    for t in ties:
        if any(m in active for m in t["members"]):
            campaign_factors.append({"name": t["name"], "members": list(t["members"])})
    for name in active:
        if name not in tied_members:
            campaign_factors.append({"name": name, "members": [name]})
    campaign_factors.sort(key=lambda cf: order.index(cf["name"])
                          if cf["name"] in order else len(order))
    if not campaign_factors:
        raise CampaignEvaluationError("screening selected no active factors")
    for cf in campaign_factors:
        if cf["name"] not in cfg["rsm"]["center"]:
            raise CampaignConfigError(
                f"rsm.center must provide a value for active factor {cf['name']!r}")
    state.campaign_factors = campaign_factors

    covered = {m for cf in campaign_factors for m in cf["members"]}
    inactive_cfg = cfg.get("inactive", {})
    state.inactive = []
    for f in factors:
        if f.name in covered:
            continue
        pol = inactive_cfg.get(f.name, {})
        state.inactive.append({"name": f.name,
                               "mean": float(pol.get("mean", f.center)),
                               "sd": float(pol.get("sd", 0.0))})
    state.center = {cf["name"]: float(cfg["rsm"]["center"][cf["name"]])
                    for cf in campaign_factors}

    stage = {
        "stage_id": len(state.stages), "kind": "screening",
        "design": {**_design_record(design),
                   "fraction": {"k": ffspec.k, "p": ffspec.p,
                                "generators": list(ffspec.generators),
                                "defining_relation": list(ffspec.defining_relation),
                                "resolution": ffspec.resolution}},
        "runs": _record_runs(design, per_run, D),
        "screening": {"stepwise": sw.to_dict(), "lasso": la.to_dict(),
                      "active": active,
                      "campaign_factors": campaign_factors},
        "decision": {"limits": state.limits},
    }
    state.stages.append(stage)
    _write_stage_csv(workdir, tag, design, per_run, D)
    (Path(workdir) / f"{tag}_report.json").write_text(
        json.dumps(stage["screening"], indent=1, sort_keys=True))
    state.phase = "fo"
    state.save(workdir)


def _init_direct(state: CampaignState) -> None:
    """No screening: all configured factors are campaign factors."""
    cfg = state.config
    ties = cfg.get("ties") or []
    tied_members = {m for t in ties for m in t["members"]}
    campaign_factors = [{"name": t["name"], "members": list(t["members"])} for t in ties]
    campaign_factors += [{"name": f["name"], "members": [f["name"]]}
                         for f in cfg["factors"] if f["name"] not in tied_members]
    keep = set(cfg["rsm"]["center"])
    campaign_factors = [cf for cf in campaign_factors if cf["name"] in keep]
    order = list(cfg["rsm"]["center"])
    campaign_factors.sort(key=lambda cf: order.index(cf["name"]))
    state.campaign_factors = campaign_factors
    covered = {m for cf in campaign_factors for m in cf["members"]}
    inactive_cfg = cfg.get("inactive", {})
    base = _base_factors(cfg)
    state.inactive = [{"name": f.name,
                       "mean": float(inactive_cfg.get(f.name, {}).get("mean", f.center)),
                       "sd": float(inactive_cfg.get(f.name, {}).get("sd", 0.0))}
                      for f in base if f.name not in covered]
    for r in cfg["responses"]:
        state.limits[r["name"]] = {"limit": float(r["limit"]), "goal": r["goal"]}
    state.center = {cf["name"]: float(cfg["rsm"]["center"][cf["name"]])
                    for cf in campaign_factors}


def _run_fo(state: CampaignState, workdir) -> None:
    cfg = state.config["rsm"]
    factors = _stage_factors(state)
    design = first_order_design(factors, n_c=int(cfg.get("n_center", 3)))
    tag = f"stage_{len(state.stages):02d}_fo"
    per_run, _ = _evaluate(state, design, workdir, tag)
    D = _overall_d(state, per_run)
    model = modelfit.fit(design, D, order="FO")
    table = modelfit.anova(model)

    fo_alpha = float(cfg.get("fo_alpha", DEFAULT_FO_ALPHA))
    lof_alpha = float(cfg.get("lof_alpha", DEFAULT_LOF_ALPHA))
    lof_used = table.lof_available and not table.lof_degenerate
    lof_ok = (not lof_used) or table.lof_pvalue > lof_alpha
    max_cycles = int(cfg.get("max_ascent_cycles", DEFAULT_MAX_ASCENT_CYCLES))
    adequate = model.f_pvalue <= fo_alpha and lof_ok and state.cycle < max_cycles

    stage = {
        "stage_id": len(state.stages), "kind": "fo",
        "center": dict(state.center),
        "design": _design_record(design),
        "runs": _record_runs(design, per_run, D),
        "model": model.summary_dict(),
        "anova": table.to_dict(),
        "decision": {"adequate": bool(adequate), "f_pvalue": model.f_pvalue,
                     "lof_pvalue": table.lof_pvalue if table.lof_available else None,
                     "lof_used": bool(lof_used), "r_squared": model.r_squared,
                     "cycle": state.cycle,
                     "next": "ascent" if adequate else "ccd"},
    }
    state.stages.append(stage)
    _write_stage_csv(workdir, tag, design, per_run, D)
    state.phase = "ascent" if adequate else "ccd"
    state.save(workdir)


def _run_ascent(state: CampaignState, workdir) -> None:
    cfg = state.config["rsm"]
    fo_stage = state.stage_of_kind("fo")
    model = _refit_from_stage(fo_stage, "FO")
    distances = cfg.get("ascent_distances") or list(ascent_mod.DEFAULT_DISTANCES)
    path = ascent_mod.steepest_path(model, distances)
    tag = f"stage_{len(state.stages):02d}_ascent"

    path_design = Design(factors=model.design.factors, points=path.points)
    per_run, _ = _evaluate(state, path_design, workdir, tag)
    D = _overall_d(state, per_run)
    distance, new_center = ascent_mod.select_recenter(path, D)

    extended = False
    if distance == max(path.distances) and max(path.distances) < ASCENT_GRID_LIMIT:
        # rising path truncated by the grid: extend once before committing
        extended = True
        step = path.distances[1] - path.distances[0] if len(path.distances) > 1 else 0.5
        extra = []
        t = max(path.distances) + step
        while t <= ASCENT_GRID_LIMIT + 1e-9:
            extra.append(round(t, 10))
            t += step
        path2 = ascent_mod.steepest_path(model, list(path.distances) + extra)
        tail = Design(factors=model.design.factors,
                      points=tuple(DesignPoint(run_id=i + 1, coded=p.coded,
                                               natural=p.natural, point_type=p.point_type)
                                   for i, p in enumerate(path2.points[len(path.points):])))
        per_run2, _ = _evaluate(state, tail, workdir, tag + "_ext")
        D2 = _overall_d(state, per_run2)
        path_design = Design(factors=model.design.factors, points=path2.points)
        per_run = per_run + per_run2
        D = list(D) + list(D2)
        path = path2
        distance, new_center = ascent_mod.select_recenter(path, D)

    names = [f.name for f in model.design.factors]
    stage = {
        "stage_id": len(state.stages), "kind": "ascent",
        "design": _design_record(path_design),
        "runs": _record_runs(path_design, per_run, D),
        "path": {"direction": [float(v) for v in path.direction],
                 "distances": [float(t) for t in path.distances],
                 "extended": extended},
        "decision": {"selected_distance": float(distance),
                     "new_center": dict(zip(names, map(float, new_center)))},
    }
    state.stages.append(stage)
    df = path.to_frame(responses={k: [v[k] for v in per_run] for k in per_run[0]}, D=D)
    df.to_csv(Path(workdir) / f"{tag}.csv", index=False)
    state.center = stage["decision"]["new_center"]
    state.cycle += 1
    state.phase = "fo"
    state.save(workdir)


def _run_ccd(state: CampaignState, workdir) -> None:
    cfg = state.config["rsm"]
    factors = _stage_factors(state)
    design, spec = central_composite(factors, n_c=int(cfg.get("ccd_n_center", 3)),
                                     alpha_mode=cfg.get("alpha_mode", "rotatable"))
    tag = f"stage_{len(state.stages):02d}_ccd"
    per_run, _ = _evaluate(state, design, workdir, tag)
    D = _overall_d(state, per_run)
    model = modelfit.fit(design, D, order="SO")
    table = modelfit.anova(model)

    fo_stage = state.stage_of_kind("fo")
    fo_model = _refit_from_stage(fo_stage, "FO")
    comparison = {
        "fo": {"aic": fo_model.aic, "bic": fo_model.bic, "stage_id": fo_stage["stage_id"]},
        "so": {"aic": model.aic, "bic": model.bic},
        "so_preferred": bool(model.aic < fo_model.aic and model.bic < fo_model.bic),
    }

    stage = {
        "stage_id": len(state.stages), "kind": "ccd",
        "center": dict(state.center),
        "design": {**_design_record(design),
                   "ccd": {"k": spec.k, "n_c": spec.n_c, "alpha": spec.alpha,
                           "alpha_mode": spec.alpha_mode}},
        "runs": _record_runs(design, per_run, D),
        "model": model.summary_dict(),
        "anova": table.to_dict(),
        "decision": {"information_criteria": comparison},
    }
    state.stages.append(stage)
    _write_stage_csv(workdir, tag, design, per_run, D)
    (Path(workdir) / f"{tag}_model.json").write_text(
        json.dumps({"model": model.summary_dict(), "anova": table.to_dict()},
                   indent=1, sort_keys=True))
    state.phase = "canonical"
    state.save(workdir)


def _contour_grids(model: modelfit.FittedModel, analysis, workdir, radius: float,
                   n: int = 21) -> None:
    """y-hat over every coded 2-factor slice through the stationary point."""
    factors = model.design.factors
    x_s = np.array(analysis.stationary_coded)
    grid = np.linspace(-radius, radius, n)
    for i in range(len(factors)):
        for j in range(i + 1, len(factors)):
            rows = []
            for gi in grid:
                for gj in grid:
                    x = x_s.copy()
                    x[i], x[j] = gi, gj
                    nat_i = factors[i].center + gi * factors[i].half_range
                    nat_j = factors[j].center + gj * factors[j].half_range
                    rows.append({f"{factors[i].name}_coded": gi,
                                 f"{factors[j].name}_coded": gj,
                                 factors[i].name: nat_i, factors[j].name: nat_j,
                                 "y_hat": float(model.predict(x)[0])})
            pd.DataFrame(rows).to_csv(
                Path(workdir) / f"contour_{factors[i].name}_{factors[j].name}.csv",
                index=False)


def _run_canonical(state: CampaignState, workdir) -> None:
    ccd_stage = state.stage_of_kind("ccd")
    model = _refit_from_stage(ccd_stage, "SO")
    alpha = float(ccd_stage["design"]["ccd"]["alpha"])
    analysis = canonical_mod.stationary_point(model, region_radius=alpha)
    tag = f"stage_{len(state.stages):02d}_canonical"

    # confirmation run at the stationary point
    factors = model.design.factors
    conf_design = Design(factors=factors, points=(
        DesignPoint(run_id=1, coded=tuple(analysis.stationary_coded),
                    natural=tuple(analysis.stationary_natural), point_type="path"),))
    per_run, _ = _evaluate(state, conf_design, workdir, tag)
    D_conf = _overall_d(state, per_run)[0]

    path_points = canonical_mod.canonical_path(analysis, model)
    names = [f.name for f in factors]
    pd.DataFrame([{"run_id": p.run_id, **dict(zip(names, map(float, p.natural)))}
                  for p in path_points]).to_csv(
        Path(workdir) / f"{tag}_path.csv", index=False)
    _contour_grids(model, analysis, workdir, radius=alpha)

    stage = {
        "stage_id": len(state.stages), "kind": "canonical",
        "design": _design_record(conf_design),
        "runs": _record_runs(conf_design, per_run, [D_conf]),
        "analysis": analysis.to_dict(),
        "confirmation": {"responses": {k: float(v) for k, v in per_run[0].items()},
                         "D": float(D_conf),
                         "predicted_D": analysis.y_hat_s},
        "decision": {"classification": analysis.classification},
    }
    state.stages.append(stage)
    (Path(workdir) / f"{tag}_report.json").write_text(
        json.dumps(stage, indent=1, sort_keys=True))
    state.phase = "bootstrap"
    state.save(workdir)


def _run_bootstrap(state: CampaignState, workdir) -> None:
    ccd_stage = state.stage_of_kind("ccd")
    model = _refit_from_stage(ccd_stage, "SO")
    seed = int(state.config.get("seed", 123))
    B = int(state.config["rsm"].get("bootstrap_B", 1000))
    result = bootstrap_mod.bootstrap_stationary(model, B=B, seed=seed)
    tag = f"stage_{len(state.stages):02d}_bootstrap"

    names = [f.name for f in model.design.factors]
    pd.DataFrame(result.stationary_samples, columns=names).to_csv(
        Path(workdir) / f"{tag}_samples.csv", index=False)
    (Path(workdir) / f"{tag}_ci.json").write_text(
        json.dumps(result.to_dict(), indent=1, sort_keys=True))

    stage = {
        "stage_id": len(state.stages), "kind": "bootstrap",
        "replications": result.replications, "n_failed": result.n_failed,
        "seed": seed,
        "ci95": {k: [float(a), float(b)] for k, (a, b) in result.ci95.items()},
        "decision": {},
    }
    state.stages.append(stage)
    state.phase = "done"
    state.save(workdir)


_EXECUTORS = {
    "screening": _run_screening,
    "fo": _run_fo,
    "ascent": _run_ascent,
    "ccd": _run_ccd,
    "canonical": _run_canonical,
    "bootstrap": _run_bootstrap,
}


def _check_grammar(kinds: list) -> None:
    allowed_next = {
        None: {"screening", "fo"},
        "screening": {"fo"},
        "fo": {"ascent", "ccd"},
        "ascent": {"fo"},
        "ccd": {"canonical"},
        "canonical": {"bootstrap"},
        "bootstrap": set(),
    }
    prev = None
    for k in kinds:
        if k not in allowed_next[prev]:
            raise RuntimeError(f"internal error: stage {k!r} after {prev!r} "
                               f"violates grammar {STAGE_GRAMMAR_HINT}")
        prev = k


def run_campaign(config, workdir, resume: bool = False) -> CampaignState:
    """Execute (or resume) a campaign; returns the final state.

    ``config`` may be a dict or a path to a JSON config file.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    if not isinstance(config, dict):
        config = json.loads(Path(config).read_text())

    state_path = workdir / "state.json"
    if resume and state_path.exists():
        state = CampaignState.load(workdir)
    else:
        state = CampaignState(config)
        if state.phase == "fo":
            _init_direct(state)
        state.save(workdir)

    while state.phase != "done":
        _EXECUTORS[state.phase](state, workdir)
        _check_grammar([s["kind"] for s in state.stages])
    return state
