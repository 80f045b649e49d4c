"""Command-line entry point: ``wpcnplan <verb> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .harness import (SOLVERS, MissingInputError, RunConfig, StageError, emit_plots,
                      load_result, revalidate, run_pipeline, run_study, table_csv)
from .objectives import HoverPlan, ObjectiveVector
from .scenario import (GenerationParams, ScenarioFormatError, bundled_scenario,
                       generate_scenario, load_scenario, save_scenario)
from .upaop import Individual, MoeaConfig, evolve, select_solution
from .uttop import PsoConfig, run_psongdp, run_vanilla_pso, validate_trajectory

FRONT_SCHEMA = "wpcnplan.front/1"
TRAJECTORY_SCHEMA = "wpcnplan.trajectory/1"
OUTPUT_ENV = "WPCNPLAN_OUTPUT_DIR"

EXIT_INPUT = 3
EXIT_STAGE = 4
EXIT_INVALID = 5

_SCALARS = {"int": int, "float": float, "float | None": float, "bool": None}


def _dataclass_flags(parser, cls, prefix: str):
    group = parser.add_argument_group(f"{prefix} options")
    for f in fields(cls):
        if str(f.type) not in _SCALARS:
            continue
        kind = _SCALARS[str(f.type)]
        flag = f"--{prefix}-{f.name.replace('_', '-')}"
        dest = f"{prefix}_{f.name}"
        if kind is None:
            group.add_argument(flag, dest=dest, action=argparse.BooleanOptionalAction, default=None)
        else:
            group.add_argument(flag, dest=dest, type=kind, default=None, metavar=kind.__name__.upper())


def _from_flags(args, cls, prefix: str, **extra):
    kw = {f.name: getattr(args, f"{prefix}_{f.name}") for f in fields(cls)
          if getattr(args, f"{prefix}_{f.name}", None) is not None}
    kw.update(extra)
    return cls(**kw)


def _output_dir(args) -> Path:
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    return Path(os.environ.get(OUTPUT_ENV, "wpcnplan-out"))


def _scenario(args):
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario)
    return bundled_scenario()


def _plan_to_json(ind: Individual) -> dict:
    return {"genome": ind.genome.to_vector().tolist(),
            "objectives": list(ind.objectives.values),
            "feasible": ind.objectives.feasible,
            "violation": ind.objectives.violation,
            "rank": ind.rank, "crowding": ind.crowding if np.isfinite(ind.crowding) else None}


def _plan_from_json(d: dict, M: int) -> Individual:
    crowd = d.get("crowding")
    return Individual(HoverPlan.from_vector(d["genome"], M),
                      ObjectiveVector(tuple(d["objectives"]), d["feasible"], d["violation"]),
                      int(d.get("rank", 1)), float("inf") if crowd is None else float(crowd))


def _read_json(path, schema):
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no such file: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if d.get("schema") != schema:
        raise ScenarioFormatError(f"{path}: expected schema {schema!r}, got {d.get('schema')!r}")
    return d


def _write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")
    return path


# -- verbs --------------------------------------------------------------------

def cmd_generate(args):
    p = _from_flags(args, GenerationParams, "gen")
    sc = generate_scenario(p)
    out = Path(args.out) if args.out else _output_dir(args) / "scenario.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, out)
    print(f"wrote {out} ({sc.n_devices} devices, {len(sc.obstacles)} obstacles)")


def cmd_upaop(args):
    sc = _scenario(args)
    cfg = _from_flags(args, MoeaConfig, "moea")
    try:
        res = evolve(sc, cfg)
    except Exception as exc:
        raise StageError("upaop", str(exc)) from exc
    out = _output_dir(args) / "front.json"
    _write_json(out, {"schema": FRONT_SCHEMA, "n_points": cfg.n_points, "seed": cfg.seed,
                      "front": [_plan_to_json(ind) for ind in res.front]})
    pick = select_solution(res.front, args.strategy)
    print(f"front size {len(res.front)}; {args.strategy} pick f1={pick.f1} f2={pick.f2:.2f}")
    print(f"wrote {out}")


def _hover_points(args):
    if args.front:
        d = _read_json(args.front, FRONT_SCHEMA)
        front = [_plan_from_json(x, d["n_points"]) for x in d["front"]]
        return select_solution(front, args.strategy).genome.points
    if args.points:
        pts = np.asarray(json.loads(Path(args.points).read_text()), dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ScenarioFormatError(f"{args.points}: expected a list of [x, y, z] points")
        return pts
    raise MissingInputError("uttop needs --front or --points")


def cmd_uttop(args):
    sc = _scenario(args)
    points = _hover_points(args)
    cfg = _from_flags(args, PsoConfig, "pso")
    run = run_psongdp if args.solver == "psongdp" else run_vanilla_pso
    try:
        res = run(points, sc, cfg)
    except Exception as exc:
        raise StageError("uttop", str(exc)) from exc
    rep = validate_trajectory(res.waypoints, points, sc.obstacle_array, args.step, sc.bounds)
    out = _output_dir(args) / "trajectory.json"
    _write_json(out, {"schema": TRAJECTORY_SCHEMA, "solver": args.solver, "seed": cfg.seed,
                      "hover_points": points.tolist(), "waypoints": res.waypoints.tolist(),
                      "f3": res.f3, "valid": rep.ok, "trace": [float(v) for v in res.trace]})
    print(f"f3={res.f3:.2f} valid={rep.ok}; wrote {out}")
    if not rep.ok:
        raise StageError("validate", f"collision on segment {rep.segment} at {rep.point}")


def _run_config(args) -> RunConfig:
    gen = None
    if args.generate:
        gen = _from_flags(args, GenerationParams, "gen")
    return RunConfig(
        scenario_path=args.scenario, generation=gen,
        moea=_from_flags(args, MoeaConfig, "moea"), pso=_from_flags(args, PsoConfig, "pso"),
        strategy=args.strategy, repetitions=getattr(args, "repetitions", 1),
        output_dir=str(_output_dir(args)), seed=args.seed, validate_step=args.step,
        solvers=tuple(getattr(args, "solvers", None) or SOLVERS),
        workers=getattr(args, "workers", 1),
    )


def cmd_pipeline(args):
    cfg = _run_config(args)
    res = run_pipeline(cfg, persist=True)
    print(f"f1={res.f1} f2={res.f2:.2f} f3={res.f3:.2f} flight_energy={res.flight_energy:.1f} J")
    for stage, t in res.timings.items():
        print(f"  {stage:<9s} {t:8.3f} s")
    print(f"wrote {Path(cfg.output_dir) / f'run_seed{cfg.seed}.json'}")


def cmd_study(args):
    cfg = _run_config(args)
    st = run_study(cfg)
    sys.stdout.write(table_csv(st.table))
    print(f"wrote {st.output_dir / 'study.csv'}")


def cmd_plot(args):
    out = Path(args.out) if args.out else None
    for p in emit_plots(args.input, out, render=args.render):
        print(p)


def cmd_validate(args):
    res = load_result(args.result)
    ok, why = revalidate(res)
    print(f"{args.result}: {why}")
    if not ok:
        return EXIT_INVALID
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wpcnplan", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, scenario=True):
        p.add_argument("--output-dir", default=None,
                       help=f"defaults to ${OUTPUT_ENV} or ./wpcnplan-out")
        if scenario:
            p.add_argument("--scenario", default=None, help="scenario file (default: bundled)")

    p = sub.add_parser("generate", help="generate a scenario file")
    common(p, scenario=False)
    p.add_argument("--out", default=None)
    _dataclass_flags(p, GenerationParams, "gen")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("upaop", help="evolve hover points and powers")
    common(p)
    p.add_argument("--strategy", default="CWMS", choices=("CWMS", "TEMS"))
    _dataclass_flags(p, MoeaConfig, "moea")
    p.set_defaults(func=cmd_upaop)

    p = sub.add_parser("uttop", help="plan a tour through given hover points")
    common(p)
    p.add_argument("--front", default=None, help="front file written by 'upaop'")
    p.add_argument("--points", default=None, help="JSON list of [x, y, z] hover points")
    p.add_argument("--strategy", default="CWMS", choices=("CWMS", "TEMS"))
    p.add_argument("--solver", default="psongdp", choices=("psongdp", "pso"))
    p.add_argument("--step", type=float, default=0.5, help="validation sampling step (m)")
    _dataclass_flags(p, PsoConfig, "pso")
    p.set_defaults(func=cmd_uttop)

    for verb, fn, hlp in (("pipeline", cmd_pipeline, "full two-stage run"),
                          ("study", cmd_study, "repeated seeded runs with statistics")):
        p = sub.add_parser(verb, help=hlp)
        common(p)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strategy", default="CWMS", choices=("CWMS", "TEMS"))
        p.add_argument("--step", type=float, default=0.5, help="validation sampling step (m)")
        p.add_argument("--generate", action="store_true",
                       help="generate the scenario from --gen-* flags instead of loading one")
        if verb == "study":
            p.add_argument("--repetitions", type=int, default=10)
            p.add_argument("--solvers", nargs="+", choices=SOLVERS, default=None)
            p.add_argument("--workers", type=int, default=1)
        _dataclass_flags(p, GenerationParams, "gen")
        _dataclass_flags(p, MoeaConfig, "moea")
        _dataclass_flags(p, PsoConfig, "pso")
        p.set_defaults(func=fn)

    p = sub.add_parser("plot", help="emit plot-data tables (and optional SVGs)")
    p.add_argument("input", help="result file or study directory")
    p.add_argument("--out", default=None)
    p.add_argument("--render", action="store_true", help="also render SVG figures")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate", help="re-check a persisted run result")
    p.add_argument("result")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except StageError as exc:
        print(f"wpcnplan: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (MissingInputError, ScenarioFormatError, FileNotFoundError) as exc:
        print(f"wpcnplan: [input] {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"wpcnplan: [config] {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
