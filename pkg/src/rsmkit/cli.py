"""Command-line interface.

Every pipeline step is independently invocable so external simulator results
can be spliced in at any point: design generation emits run CSVs, ``fit``
turns a filled-in CSV into a model JSON, and ``ascend``/``canonical``/
``bootstrap`` consume that JSON. ``run`` drives the whole sequential campaign.

Exit codes: 0 success, 2 validation/config error, 3 evaluation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import ascent as ascent_mod
from . import bootstrap as bootstrap_mod
from . import canonical as canonical_mod
from . import metrics as metrics_mod
from . import modelfit, screening
from .campaign import (CampaignConfigError, CampaignEvaluationError,
                       default_config, run_campaign)
from .designs import (Design, Factor, central_composite, design_from_frame,
                      first_order_design, fractional_factorial, full_factorial,
                      alias_structure)
from .evaluator import EvaluationTimeout, MalformedResponseError, RejectedRunError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_EVALUATION = 3


def _load_factors(path, k: int | None = None) -> list:
    """Factors from a JSON list; default to unit-coded x1..xk when absent."""
    if path:
        data = json.loads(Path(path).read_text())
        return [Factor(name=f["name"], low=float(f["low"]), high=float(f["high"]),
                       units=f.get("units", "")) for f in data]
    if k is None:
        raise ValueError("either --factors or -k is required")
    return [Factor(name=f"x{i + 1}", low=-1.0, high=1.0) for i in range(k)]


def _emit_design(design: Design, out: str | None) -> None:
    if out:
        design.to_csv(out)
        print(f"wrote {out} ({len(design)} runs)")
    else:
        print(design.to_frame().to_csv(index=False), end="")


def _cmd_design(args) -> int:
    factors = _load_factors(args.factors, args.k)
    if args.design_kind == "full":
        design = full_factorial(factors)
    elif args.design_kind == "frac":
        design, spec = fractional_factorial(factors, p=args.p,
                                            generators=args.generators)
        print(f"2^({spec.k}-{spec.p}) design, resolution {spec.resolution}, "
              f"defining relation I = {' = '.join(spec.defining_relation)}",
              file=sys.stderr)
        if args.aliases:
            amap = alias_structure(spec, max_order=2)
            for eff in sorted(amap, key=lambda w: (len(w), w)):
                if amap[eff]:
                    print(f"  {eff} = {' = '.join(sorted(amap[eff]))}", file=sys.stderr)
    elif args.design_kind == "fo":
        design = first_order_design(factors, n_c=args.nc)
    else:
        mode = args.alpha
        if mode in ("rotatable", "face_centered"):
            design, spec = central_composite(factors, n_c=args.nc, alpha_mode=mode)
        else:
            design, spec = central_composite(factors, n_c=args.nc,
                                             alpha_mode="custom", alpha=float(mode))
        print(f"CCD k={spec.k}, alpha={spec.alpha:.4f} ({spec.alpha_mode}), "
              f"{spec.n_runs} runs", file=sys.stderr)
    _emit_design(design, args.out)
    return EXIT_OK


def _read_runs(args):
    """(design, y) from a runs CSV with a response column."""
    df = pd.read_csv(args.infile)
    if args.response not in df.columns:
        raise ValueError(f"response column {args.response!r} not in {args.infile}")
    known = {"run_id", "pt_type", args.response}
    factor_cols = [c for c in df.columns if c not in known]
    if args.factors:
        factors = _load_factors(args.factors)
    else:
        # without bounds, treat columns as already coded
        factors = [Factor(name=c, low=-1.0, high=1.0) for c in factor_cols]
    design = design_from_frame(df, factors, coded=args.coded or not args.factors)
    return design, df[args.response].to_numpy(dtype=float)


def _model_to_json(model: modelfit.FittedModel, table=None) -> dict:
    design = model.design
    doc = {
        "order": model.order,
        "summary": model.summary_dict(),
        "design": {
            "factors": [{"name": f.name, "low": f.low, "high": f.high,
                         "units": f.units} for f in design.factors],
            "coded": design.coded_matrix().tolist(),
            "pt_types": design.point_types(),
        },
        "y": [float(v) for v in model.y],
    }
    if table is not None:
        doc["anova"] = table.to_dict()
    return doc


def model_from_json(doc: dict) -> modelfit.FittedModel:
    factors = tuple(Factor(**f) for f in doc["design"]["factors"])
    coded = np.array(doc["design"]["coded"], dtype=float)
    pt_types = doc["design"]["pt_types"]
    from .designs import DesignPoint, code_to_natural
    points = tuple(
        DesignPoint(run_id=i + 1, coded=tuple(row),
                    natural=tuple(code_to_natural(factors, row)), point_type=pt)
        for i, (row, pt) in enumerate(zip(coded, pt_types)))
    design = Design(factors=factors, points=points)
    return modelfit.fit(design, np.array(doc["y"]), order=doc["order"])


def _cmd_fit(args) -> int:
    design, y = _read_runs(args)
    model = modelfit.fit(design, y, order=args.order.upper())
    table = modelfit.anova(model)
    doc = _model_to_json(model, table)
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    print(table.to_text(), file=sys.stderr)
    return EXIT_OK


def _cmd_screen(args) -> int:
    design, y = _read_runs(args)
    sw = screening.stepwise_bic(design, y)
    la = screening.lasso_cv(design, y, nfolds=args.nfolds, seed=args.seed)
    active = screening.active_factors(sw, la)
    doc = {"stepwise": sw.to_dict(), "lasso": la.to_dict(), "active": active}
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    # Table 6-style layout: per-method estimates side by side
    rows = ["model term          stepwise      lasso"]
    terms = ["intercept"] + sorted(set(sw.estimates) | set(la.estimates) - {"intercept"})
    for t in dict.fromkeys(terms):
        s = sw.estimates.get(t)
        l = la.estimates.get(t)
        rows.append(f"{t:<18}{s if s is None else f'{s:10.5f}':>10}"
                    f"{l if l is None else f'{l:10.5f}':>12}")
    print("\n".join(rows), file=sys.stderr)
    return EXIT_OK


def _parse_distances(text: str):
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        out = []
        t = lo
        while t <= hi + 1e-9:
            out.append(round(t, 10))
            t += step
        return out
    return [float(v) for v in text.split(",")]


def _cmd_ascend(args) -> int:
    model = model_from_json(json.loads(Path(args.model).read_text()))
    if args.path:
        df = pd.read_csv(args.path)
        factors = model.design.factors
        from .designs import DesignPoint, natural_to_code
        pts = []
        for i, row in df.iterrows():
            nat = [row[f.name] for f in factors]
            coded = natural_to_code(factors, nat)
            pts.append(DesignPoint(run_id=i + 1, coded=tuple(coded),
                                   natural=tuple(nat), point_type="path"))
        path = ascent_mod.AscentPath(origin=(0.0,) * model.k,
                                     direction=tuple(np.zeros(model.k)),
                                     distances=tuple(df["distance"]),
                                     points=tuple(pts), factors=model.design.factors)
        dist, center = ascent_mod.select_recenter(path, df[args.d_col].to_numpy())
        print(json.dumps({"distance": float(dist),
                          "center": {f.name: float(v) for f, v in
                                     zip(model.design.factors, center)}}, indent=1))
        return EXIT_OK
    distances = _parse_distances(args.distances)
    path = ascent_mod.steepest_path(model, distances)
    df = path.to_frame()
    if args.out:
        df.to_csv(args.out, index=False)
        print(f"wrote {args.out} ({len(df)} path points)")
    else:
        print(df.to_csv(index=False), end="")
    return EXIT_OK


def _cmd_canonical(args) -> int:
    model = model_from_json(json.loads(Path(args.model).read_text()))
    analysis = canonical_mod.stationary_point(model)
    doc = analysis.to_dict()
    text = json.dumps(doc, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    if args.path_csv:
        pts = canonical_mod.canonical_path(analysis, model)
        names = [f.name for f in model.design.factors]
        pd.DataFrame([{"run_id": p.run_id, **dict(zip(names, map(float, p.natural)))}
                      for p in pts]).to_csv(args.path_csv, index=False)
        print(f"wrote {args.path_csv}")
    return EXIT_OK


def _cmd_bootstrap(args) -> int:
    model = model_from_json(json.loads(Path(args.model).read_text()))
    result = bootstrap_mod.bootstrap_stationary(model, B=args.B, seed=args.seed,
                                                workers=args.workers)
    if args.samples:
        names = [f.name for f in model.design.factors]
        pd.DataFrame(result.stationary_samples, columns=names).to_csv(
            args.samples, index=False)
    text = json.dumps(result.to_dict(), indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    print(result.ci_text(), file=sys.stderr)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    if args.metric == "ioh":
        areas = None
        if args.areas:
            adf = pd.read_csv(args.areas)
            areas = dict(zip(adf["zone"].astype(str), adf["area"].astype(float)))
        zones = metrics_mod.load_zone_series(args.zones, areas=areas)
        outdoor = metrics_mod.load_outdoor_series(args.outdoor)
        value = metrics_mod.ioh(zones, outdoor)
    else:
        grid = metrics_mod.load_illuminance_grid(args.grid, args.sensor_map)
        if args.metric == "udi":
            value = metrics_mod.udi(grid, low=args.low, high=args.high)
        elif args.metric == "da":
            value = metrics_mod.da(grid, threshold=args.threshold)
        elif args.metric == "cda":
            value = metrics_mod.cda(grid, threshold=args.threshold)
        else:
            value = metrics_mod.sda(grid, threshold=args.threshold,
                                    time_fraction=args.time_fraction)
    print(f"{value:.6f}")
    return EXIT_OK


def _cmd_run(args) -> int:
    if args.config:
        config = json.loads(Path(args.config).read_text())
    else:
        config = default_config()
    if args.seed is not None:
        config["seed"] = args.seed
    if args.evaluator:
        config.setdefault("evaluator", {})["kind"] = args.evaluator
    state = run_campaign(config, args.workdir, resume=args.resume)
    summary = {
        "stages": [{"stage_id": s["stage_id"], "kind": s["kind"],
                    "runs": len(s.get("runs", []))} for s in state.stages],
        "total_evaluations": state.total_evaluations,
        "classification": state.classification,
        "stationary_natural": state.stationary_natural,
        "confirmation": state.confirmation,
        "ci95": state.ci95,
    }
    print(json.dumps(summary, indent=1, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rsmkit",
                                 description="Sequential response-surface "
                                             "optimization toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="generate experimental designs")
    dsub = d.add_subparsers(dest="design_kind", required=True)
    for kind, helptext in (("full", "2^k full factorial"),
                           ("frac", "2^(k-p) fractional factorial"),
                           ("fo", "orthogonal first-order design"),
                           ("ccd", "central composite design")):
        p = dsub.add_parser(kind, help=helptext)
        p.add_argument("-k", type=int, default=None, help="number of factors")
        p.add_argument("--factors", help="JSON file with factor bounds")
        p.add_argument("-o", "--out", help="output CSV (plus .coded.csv variant)")
        if kind == "frac":
            p.add_argument("-p", type=int, required=True, help="fractionation degree")
            p.add_argument("--generators", nargs="*", default=None,
                           help="generator words, e.g. G=ABCD H=ABEF")
            p.add_argument("--aliases", action="store_true",
                           help="print the order-2 alias structure")
        if kind in ("fo", "ccd"):
            p.add_argument("--nc", type=int, default=3, help="center points")
        if kind == "ccd":
            p.add_argument("--alpha", default="rotatable",
                           help="rotatable | face_centered | numeric value")
        p.set_defaults(func=_cmd_design)

    f = sub.add_parser("fit", help="fit an FO/SO model from a runs CSV")
    f.add_argument("--in", dest="infile", required=True)
    f.add_argument("--order", choices=["fo", "so"], required=True)
    f.add_argument("--response", default="D", help="response column (default D)")
    f.add_argument("--factors", help="factor bounds JSON (columns are natural units)")
    f.add_argument("--coded", action="store_true",
                   help="factor columns are already coded")
    f.add_argument("-o", "--out", help="model JSON output path")
    f.set_defaults(func=_cmd_fit)

    s = sub.add_parser("screen", help="stepwise + lasso factor screening")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--response", default="D")
    s.add_argument("--factors")
    s.add_argument("--coded", action="store_true")
    s.add_argument("--nfolds", type=int, default=3)
    s.add_argument("--seed", type=int, default=123)
    s.add_argument("-o", "--out")
    s.set_defaults(func=_cmd_screen)

    a = sub.add_parser("ascend", help="steepest ascent path / recenter selection")
    a.add_argument("--model", required=True, help="FO model JSON from `fit`")
    a.add_argument("--distances", default="0.5:6.0:0.5",
                   help="lo:hi:step or comma list (coded units)")
    a.add_argument("--path", help="evaluated path CSV: select recenter instead")
    a.add_argument("--d-col", default="D", help="desirability column in --path")
    a.add_argument("-o", "--out", help="path CSV output")
    a.set_defaults(func=_cmd_ascend)

    c = sub.add_parser("canonical", help="stationary point and classification")
    c.add_argument("--model", required=True, help="SO model JSON from `fit`")
    c.add_argument("--path-csv", help="also write canonical path points CSV")
    c.add_argument("-o", "--out")
    c.set_defaults(func=_cmd_canonical)

    b = sub.add_parser("bootstrap", help="residual bootstrap of the stationary point")
    b.add_argument("--model", required=True, help="SO model JSON from `fit`")
    b.add_argument("-B", type=int, default=1000)
    b.add_argument("--seed", type=int, default=123)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--samples", help="CSV output for the bootstrap sample matrix")
    b.add_argument("-o", "--out")
    b.set_defaults(func=_cmd_bootstrap)

    m = sub.add_parser("metrics", help="comfort/daylight metrics from hourly CSVs")
    msub = m.add_subparsers(dest="metric", required=True)
    mi = msub.add_parser("ioh", help="indoor overheating hours %")
    mi.add_argument("--zones", required=True, help="hour,zone,t_op,occupied CSV")
    mi.add_argument("--outdoor", required=True, help="hour,t_out CSV")
    mi.add_argument("--areas", help="zone,area CSV (default: equal areas)")
    mi.set_defaults(func=_cmd_metrics)
    for name, helptext in (("udi", "useful daylight illuminance %"),
                           ("da", "daylight autonomy %"),
                           ("cda", "continuous daylight autonomy %"),
                           ("sda", "spatial daylight autonomy %")):
        mp = msub.add_parser(name, help=helptext)
        mp.add_argument("--grid", required=True, help="hour,sensor,lux CSV")
        mp.add_argument("--sensor-map", help="sensor,zone CSV")
        if name == "udi":
            mp.add_argument("--low", type=float, default=100.0)
            mp.add_argument("--high", type=float, default=3000.0)
        else:
            mp.add_argument("--threshold", type=float, default=300.0)
        if name == "sda":
            mp.add_argument("--time-fraction", type=float, default=0.5)
        mp.set_defaults(func=_cmd_metrics)

    r = sub.add_parser("run", help="run the full sequential campaign")
    r.add_argument("--config", help="campaign config JSON (default: built-in "
                                    "surrogate campaign)")
    r.add_argument("--workdir", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--evaluator", choices=["surrogate", "csv"])
    r.add_argument("--resume", action="store_true")
    r.set_defaults(func=_cmd_run)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (CampaignConfigError, MalformedResponseError, RejectedRunError,
            ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CampaignEvaluationError, EvaluationTimeout) as exc:
        print(f"evaluation failure: {exc}", file=sys.stderr)
        return EXIT_EVALUATION


if __name__ == "__main__":
    sys.exit(main())
