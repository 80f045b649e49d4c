"""Pipeline orchestration, result persistence, repeated-run statistics and plot data."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .energy import flight_energy, hover_energy
from .objectives import HoverPlan, evaluate_plan, tour_polyline
from .scenario import (GenerationParams, Scenario, ScenarioFormatError, bundled_scenario,
                       generate_scenario, load_scenario, scenario_from_dict, scenario_to_dict)
from .upaop import (MoeaConfig, baseline_kmeans, baseline_rs, baseline_us, evolve,
                    select_solution)
from .uttop import PsoConfig, run_psongdp, run_vanilla_pso, validate_trajectory

log = logging.getLogger(__name__)

RESULT_SCHEMA = "wpcnplan.result/1"
STUDY_SCHEMA = "wpcnplan.study/1"

SOLVERS = ("NSGA-II-KV", "NSGA-II", "US", "RS", "K-means", "PSO-NGDP", "PSO")
HOVER_SOLVERS = SOLVERS[:5]
TOUR_SOLVERS = SOLVERS[5:]


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class MissingInputError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scenario_path: str | None = None
    generation: GenerationParams | None = None
    moea: MoeaConfig = field(default_factory=MoeaConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    strategy: str = "CWMS"
    repetitions: int = 1
    output_dir: str = "wpcnplan-out"
    seed: int = 0
    validate_step: float = 0.5
    solvers: tuple[str, ...] = SOLVERS
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.strategy.upper() not in ("CWMS", "TEMS"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        bad = set(self.solvers) - set(SOLVERS)
        if bad:
            raise ValueError(f"unknown solver(s) {sorted(bad)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def K(self) -> int:
        return self.pso.waypoints_per_leg

    def to_dict(self) -> dict:
        # round-trip through JSON so tuples compare equal to their reloaded lists
        return json.loads(json.dumps(asdict(self)))


def load_run_scenario(cfg: RunConfig) -> Scenario:
    if cfg.scenario_path:
        return load_scenario(cfg.scenario_path)
    if cfg.generation is not None:
        return generate_scenario(cfg.generation)
    return bundled_scenario()


# -- results ------------------------------------------------------------------

@dataclass
class RunResult:
    seed: int
    config: dict
    scenario: Scenario
    plan: HoverPlan
    f1: int
    f2: float
    feasible: bool
    violation: float
    hover_times: np.ndarray
    waypoints: np.ndarray
    f3: float
    trajectory_valid: bool
    flight_energy: float
    hover_energy: float
    front: np.ndarray
    front_history: list[np.ndarray]
    f1_trace: list[int]
    f3_trace: list[float]
    timings: dict[str, float]
    total_time: float

    def polyline(self) -> np.ndarray:
        return tour_polyline(self.plan.points, self.waypoints)

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "schema": RESULT_SCHEMA,
            "seed": self.seed,
            "config": self.config,
            "scenario": scenario_to_dict(self.scenario),
            "plan": {"points": self.plan.points.tolist(),
                     "charge_powers": self.plan.charge_powers.tolist(),
                     "device_powers": self.plan.device_powers.tolist()},
            "evaluation": {"f1": self.f1, "f2": self.f2, "feasible": self.feasible,
                           "violation": self.violation,
                           "hover_times": self.hover_times.tolist()},
            "trajectory": {"waypoints": self.waypoints.tolist(), "f3": self.f3,
                           "valid": self.trajectory_valid},
            "energy": {"flight": self.flight_energy, "hover": self.hover_energy},
            "front": self.front.tolist(),
            "front_history": [f.tolist() for f in self.front_history],
            "traces": {"f1": list(self.f1_trace), "f3": list(self.f3_trace)},
        }
        if timings:
            d["timings"] = dict(self.timings)
            d["total_time"] = self.total_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        if d.get("schema") != RESULT_SCHEMA:
            raise ScenarioFormatError(f"unsupported result schema {d.get('schema')!r}")
        try:
            ev, tr = d["evaluation"], d["trajectory"]
            p = d["plan"]
            return cls(
                seed=int(d["seed"]),
                config=d["config"],
                scenario=scenario_from_dict(d["scenario"]),
                plan=HoverPlan(p["points"], p["charge_powers"], p["device_powers"]),
                f1=int(ev["f1"]), f2=float(ev["f2"]), feasible=bool(ev["feasible"]),
                violation=float(ev["violation"]),
                hover_times=np.asarray(ev["hover_times"], dtype=np.float64),
                waypoints=np.asarray(tr["waypoints"], dtype=np.float64),
                f3=float(tr["f3"]), trajectory_valid=bool(tr["valid"]),
                flight_energy=float(d["energy"]["flight"]),
                hover_energy=float(d["energy"]["hover"]),
                front=np.asarray(d["front"], dtype=np.float64).reshape(-1, 2),
                front_history=[np.asarray(f, dtype=np.float64).reshape(-1, 2)
                               for f in d["front_history"]],
                f1_trace=[int(v) for v in d["traces"]["f1"]],
                f3_trace=[float(v) for v in d["traces"]["f3"]],
                timings={k: float(v) for k, v in d.get("timings", {}).items()},
                total_time=float(d.get("total_time", 0.0)),
            )
        except KeyError as exc:
            raise ScenarioFormatError(f"result: missing field {exc}") from None

    def __eq__(self, other):
        if not isinstance(other, RunResult):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def fingerprint(self) -> str:
        """Timing-free serialization; identical for identical seeds."""
        return json.dumps(self.to_dict(timings=False), sort_keys=True)


def revalidate(result: RunResult) -> tuple[bool, str]:
    ev = evaluate_plan(result.plan, result.scenario)
    if not ev.feasible:
        return False, f"hover plan infeasible (violation {ev.violation:.3g})"
    if ev.covered_count != result.f1:
        return False, f"stored f1 {result.f1} != recomputed {ev.covered_count}"
    step = float(result.config.get("validate_step", 0.5))
    rep = validate_trajectory(result.waypoints, result.plan.points,
                              result.scenario.obstacle_array, step, result.scenario.bounds)
    if not rep.ok:
        return False, f"trajectory collides on segment {rep.segment} at {rep.point}"
    return True, "ok"


def save_result(result: RunResult, path) -> Path:
    ok, why = revalidate(result)
    if not ok:
        raise StageError("persist", f"refusing to save invalid result: {why}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result.to_dict(), indent=1) + "\n")
    return path


def load_result(path) -> RunResult:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"no result file at {path}")
    try:
        return RunResult.from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


# -- pipeline -----------------------------------------------------------------

class _Clock:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self._t = time.perf_counter()

    def lap(self, stage: str):
        now = time.perf_counter()
        self.timings[stage] = self.timings.get(stage, 0.0) + now - self._t
        self._t = now


def _stage(stage: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (StageError, FileNotFoundError, ScenarioFormatError):
        raise  # bad inputs are reported as such, not as a stage failure
    except Exception as exc:
        raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc


def run_pipeline(cfg: RunConfig, scenario: Scenario | None = None,
                 persist: bool = False) -> RunResult:
    """Evolve hover plans, select one, plan its tour, validate and price it."""
    t0 = time.perf_counter()
    clock = _Clock()
    if scenario is None:
        scenario = _stage("scenario", load_run_scenario, cfg)
    clock.lap("scenario")

    moea = replace(cfg.moea, seed=cfg.seed)
    evo = _stage("upaop", evolve, scenario, moea)
    clock.lap("upaop")

    pick = _stage("select", select_solution, evo.front, cfg.strategy)
    ev = evaluate_plan(pick.genome, scenario, moea.objectives)
    if not ev.feasible:
        raise StageError("select", f"selected plan is infeasible (violation {ev.violation:.3g})")
    clock.lap("select")

    pso = replace(cfg.pso, seed=cfg.seed)
    traj = _stage("uttop", run_psongdp, pick.genome.points, scenario, pso)
    clock.lap("uttop")

    rep = validate_trajectory(traj.waypoints, pick.genome.points, scenario.obstacle_array,
                              cfg.validate_step, scenario.bounds)
    if not rep.ok:
        raise StageError("validate", f"trajectory collides on segment {rep.segment} at {rep.point}")
    clock.lap("validate")

    uav = scenario.physics.uav
    e_fly = _stage("energy", flight_energy, tour_polyline(pick.genome.points, traj.waypoints), uav)
    e_hover = hover_energy(ev.hover_times, uav)
    clock.lap("energy")

    result = RunResult(
        seed=cfg.seed, config=cfg.to_dict(), scenario=scenario, plan=pick.genome,
        f1=ev.covered_count, f2=ev.f2, feasible=ev.feasible, violation=ev.violation,
        hover_times=ev.hover_times, waypoints=traj.waypoints, f3=traj.f3,
        trajectory_valid=True, flight_energy=e_fly, hover_energy=e_hover,
        front=np.array([ind.objectives.values for ind in evo.front]).reshape(-1, 2),
        front_history=evo.front_history, f1_trace=list(evo.best_f1_trace),
        f3_trace=[float(v) for v in traj.trace], timings=clock.timings,
        total_time=time.perf_counter() - t0,
    )
    if persist:
        save_result(result, Path(cfg.output_dir) / f"run_seed{cfg.seed}.json")
    return result


# -- studies ------------------------------------------------------------------

def run_repetition(cfg: RunConfig, scenario: Scenario, seed: int) -> dict[str, dict[str, float]]:
    """One seeded repetition of every requested solver: {solver: {f1, f2, f3}}."""
    M = cfg.moea.n_points
    want = set(cfg.solvers)
    out: dict[str, dict[str, float]] = {}

    def hover_row(plan):
        ev = evaluate_plan(plan, scenario, cfg.moea.objectives)
        return {"f1": float(ev.covered_count), "f2": float(ev.f2), "feasible": bool(ev.feasible)}

    kv_points = None
    if want & {"NSGA-II-KV", "PSO-NGDP", "PSO"}:
        pick = select_solution(evolve(scenario, replace(cfg.moea, seed=seed)).front, cfg.strategy)
        kv_points = pick.genome.points
        if "NSGA-II-KV" in want:
            out["NSGA-II-KV"] = hover_row(pick.genome)
    if "NSGA-II" in want:
        plain = replace(cfg.moea, seed=seed, kmeans_init=False)
        out["NSGA-II"] = hover_row(select_solution(evolve(scenario, plain).front, cfg.strategy).genome)
    if "US" in want:
        out["US"] = hover_row(baseline_us(scenario, M))
    if "RS" in want:
        out["RS"] = hover_row(baseline_rs(scenario, M, np.random.default_rng(seed)))
    if "K-means" in want:
        out["K-means"] = hover_row(baseline_kmeans(scenario, M, np.random.default_rng(seed)))
    pso = replace(cfg.pso, seed=seed)
    for name, run in (("PSO-NGDP", run_psongdp), ("PSO", run_vanilla_pso)):
        if name in want:
            r = run(kv_points, scenario, pso)
            ok = validate_trajectory(r.waypoints, kv_points, scenario.obstacle_array,
                                     cfg.validate_step, scenario.bounds).ok
            out[name] = {"f3": float(r.f3), "valid": bool(ok)}
    return out


STAT_COLUMNS = ("solver", "metric", "n", "mean", "std", "min", "max")


def summarize(records: list[dict]) -> list[dict]:
    """Mean/std/min/max per (solver, metric), in fixed solver then metric order.

    Records are ``{"seed": s, "solvers": {name: {metric: value}}}``. Values
    are sorted before reduction so the table ignores run order.
    """
    rows = []
    for solver in SOLVERS:
        for metric in ("f1", "f2", "f3"):
            vals = [r["solvers"][solver][metric] for r in records
                    if solver in r["solvers"] and metric in r["solvers"][solver]]
            if not vals:
                continue
            v = np.sort(np.asarray(vals, dtype=np.float64))
            rows.append({"solver": solver, "metric": metric, "n": int(v.size),
                         "mean": float(np.mean(v)), "std": float(np.std(v)),
                         "min": float(v[0]), "max": float(v[-1])})
    return rows


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STAT_COLUMNS)
    for r in rows:
        w.writerow([r["solver"], r["metric"], r["n"]] + [repr(r[c]) for c in STAT_COLUMNS[3:]])
    return buf.getvalue()


@dataclass
class Study:
    records: list[dict]
    table: list[dict]
    output_dir: Path | None = None


def _rep_worker(args):
    cfg, scenario, seed = args
    return {"seed": seed, "solvers": run_repetition(cfg, scenario, seed)}


def run_study(cfg: RunConfig, scenario: Scenario | None = None, persist: bool = True) -> Study:
    if scenario is None:
        scenario = _stage("scenario", load_run_scenario, cfg)
    seeds = [cfg.seed + r for r in range(cfg.repetitions)]
    jobs = [(cfg, scenario, s) for s in seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_rep_worker, jobs))
    else:
        records = [_rep_worker(j) for j in jobs]
    table = summarize(records)
    out = None
    if persist:
        out = Path(cfg.output_dir)
        runs = out / "runs"
        runs.mkdir(parents=True, exist_ok=True)
        for rec in records:
            (runs / f"rep_seed{rec['seed']}.json").write_text(
                json.dumps({"schema": STUDY_SCHEMA, **rec}, indent=1, sort_keys=True) + "\n")
        (out / "study.csv").write_text(table_csv(table))
    return Study(records, table, out)


def load_study_records(directory) -> list[dict]:
    runs = Path(directory) / "runs"
    files = sorted(runs.glob("rep_seed*.json"))
    if not files:
        raise MissingInputError(f"no per-run study files under {runs}")
    recs = []
    for f in files:
        d = json.loads(f.read_text())
        if d.get("schema") != STUDY_SCHEMA:
            raise ScenarioFormatError(f"{f}: unsupported schema {d.get('schema')!r}")
        recs.append({"seed": d["seed"], "solvers": d["solvers"]})
    return recs


# -- plot data ----------------------------------------------------------------

def _write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())
    return path


def _terrain_rows(scenario: Scenario, n: int = 51):
    b = scenario.bounds
    xs = np.linspace(b.x_min, b.x_max, n)
    ys = np.linspace(b.y_min, b.y_max, n)
    gx, gy = np.meshgrid(xs, ys)
    h = scenario.height(gx, gy)
    return zip(gx.ravel(), gy.ravel(), np.asarray(h).ravel())


def emit_result_plots(result: RunResult, out_dir, render: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = result.scenario
    ev = evaluate_plan(result.plan, sc)
    written = [
        _write_csv(out / "front.csv", ("f1", "f2"), ((-f[0], f[1]) for f in result.front)),
        _write_csv(out / "front_history.csv", ("generation", "f1", "f2"),
                   ((g, -f[0], f[1]) for g, F in enumerate(result.front_history) for f in F)),
        _write_csv(out / "coverage.csv", ("x", "y", "covered", "hover_point"),
                   ((x, y, int(a >= 0), int(a)) for (x, y), a in zip(sc.device_xy, ev.assignment))),
        _write_csv(out / "hover_points.csv", ("x", "y", "z", "charge_power"),
                   ((*q, pc) for q, pc in zip(result.plan.points, result.plan.charge_powers))),
        _write_csv(out / "terrain.csv", ("x", "y", "height"), _terrain_rows(sc)),
        _write_csv(out / "trajectory.csv", ("x", "y", "z"), result.polyline()),
        _write_csv(out / "convergence_upaop.csv", ("generation", "best_f1"), enumerate(result.f1_trace)),
        _write_csv(out / "convergence_uttop.csv", ("iteration", "best_f3"), enumerate(result.f3_trace)),
    ]
    if render:
        written += _render_result(result, ev, out)
    return written


def emit_study_plots(study_dir, render: bool = False) -> list[Path]:
    study_dir = Path(study_dir)
    records = load_study_records(study_dir)
    rows = summarize(records)
    written = [study_dir / "study.csv"]
    written[0].write_text(table_csv(rows))
    for metric in ("f1", "f2", "f3"):
        data = [(r["seed"], s, m[metric]) for r in sorted(records, key=lambda r: r["seed"])
                for s, m in sorted(r["solvers"].items()) if metric in m]
        if data:
            written.append(_write_csv(study_dir / f"per_run_{metric}.csv",
                                      ("seed", "solver", metric), data))
    if render:
        written += _render_study(rows, study_dir)
    return written


def emit_plots(source, out_dir=None, render: bool = False) -> list[Path]:
    """Write plot-data tables for a RunResult, a result file, or a study directory."""
    if isinstance(source, RunResult):
        return emit_result_plots(source, out_dir or ".", render)
    path = Path(source)
    if path.is_dir():
        return emit_study_plots(path, render)
    if not path.exists():
        raise MissingInputError(f"nothing to plot at {path}")
    return emit_result_plots(load_result(path), out_dir or path.parent / (path.stem + "_plots"), render)


def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping rendering")
        return None
    plt.rcParams["svg.hashsalt"] = "wpcnplan"
    return plt


def _render_result(result: RunResult, ev, out: Path) -> list[Path]:
    plt = _pyplot()
    if plt is None:
        return []
    sc = result.scenario
    paths = []
    fig, ax = plt.subplots(figsize=(6, 6))
    b = sc.bounds
    gx, gy = np.meshgrid(np.linspace(b.x_min, b.x_max, 101), np.linspace(b.y_min, b.y_max, 101))
    if sc.obstacles:
        ax.contour(gx, gy, sc.height(gx, gy), levels=6, linewidths=0.6, colors="0.5")
    cov = ev.assignment >= 0
    ax.scatter(*sc.device_xy[~cov].T, s=4, c="0.7", label="uncovered")
    ax.scatter(*sc.device_xy[cov].T, s=4, c="tab:blue", label="covered")
    poly = result.polyline()
    ax.plot(poly[:, 0], poly[:, 1], lw=0.8, c="tab:red")
    ax.scatter(*result.plan.points[:, :2].T, marker="^", c="k", label="hover")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=7)
    paths.append(out / "coverage.svg")
    fig.savefig(paths[-1], metadata={"Date": None})
    plt.close(fig)

    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    a1.plot(result.f1_trace)
    a1.set_xlabel("generation")
    a1.set_ylabel("best f1")
    a2.plot(result.f3_trace)
    a2.set_xlabel("iteration")
    a2.set_ylabel("best f3 (m)")
    fig.tight_layout()
    paths.append(out / "convergence.svg")
    fig.savefig(paths[-1], metadata={"Date": None})
    plt.close(fig)
    return paths


def _render_study(rows, out: Path) -> list[Path]:
    plt = _pyplot()
    if plt is None:
        return []
    paths = []
    for metric in ("f1", "f3"):
        sel = [r for r in rows if r["metric"] == metric]
        if not sel:
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.bar([r["solver"] for r in sel], [r["mean"] for r in sel],
               yerr=[r["std"] for r in sel], capsize=3)
        ax.set_ylabel(f"mean {metric}")
        fig.tight_layout()
        paths.append(out / f"study_{metric}.svg")
        fig.savefig(paths[-1], metadata={"Date": None})
        plt.close(fig)
    return paths


def stage_total(result: RunResult) -> float:
    return math.fsum(result.timings.values())

