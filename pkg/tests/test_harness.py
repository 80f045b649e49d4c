import csv
import json

import numpy as np
import pytest

from wpcnplan.harness import (MissingInputError, RunConfig, StageError, emit_plots,
                              load_result, load_study_records, revalidate, run_pipeline,
                              run_study, save_result, stage_total, summarize, table_csv)
from wpcnplan.objectives import closed_perimeter
from wpcnplan.upaop import MoeaConfig, evolve, select_solution
from wpcnplan.uttop import PsoConfig

FAST = dict(moea=MoeaConfig(population_size=20, max_generations=20),
            pso=PsoConfig(population_size=20, max_generations=40))


@pytest.fixture(scope="module")
def short_run(bundled):
    return run_pipeline(RunConfig(seed=5, **FAST), scenario=bundled)


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))[1:]


def test_pipeline_reproducible(bundled, short_run):
    again = run_pipeline(RunConfig(seed=5, **FAST), scenario=bundled)
    assert again.fingerprint() == short_run.fingerprint()


def test_pipeline_outputs_valid(short_run):
    ok, why = revalidate(short_run)
    assert ok, why
    assert short_run.feasible and short_run.trajectory_valid
    assert short_run.flight_energy > 0


def test_stage_timings_cover_wall_time(short_run):
    assert abs(stage_total(short_run) - short_run.total_time) <= 0.05 * short_run.total_time


def test_strategies_on_same_front(bundled):
    res = evolve(bundled, MoeaConfig(population_size=20, max_generations=20, seed=1))
    c, t = select_solution(res.front, "CWMS"), select_solution(res.front, "TEMS")
    assert c.f1 >= t.f1 and t.f2 <= c.f2


def test_empty_field_pipeline_hits_perimeter(empty_field):
    cfg = RunConfig(seed=1, moea=MoeaConfig(max_generations=40))
    res = run_pipeline(cfg, scenario=empty_field)
    assert res.trajectory_valid
    assert res.f3 <= 1.02 * closed_perimeter(res.plan.points)


def test_result_round_trip(tmp_path, short_run):
    p = save_result(short_run, tmp_path / "r.json")
    back = load_result(p)
    assert back == short_run
    ok, _ = revalidate(back)
    assert ok


def test_refuses_invalid_trajectory(tmp_path, short_run):
    bad = load_result(save_result(short_run, tmp_path / "r.json"))
    hill = bad.scenario.obstacle_array[0]
    bad.waypoints[0, 0] = [hill[0], hill[1], 5.0]
    with pytest.raises(StageError, match="persist"):
        save_result(bad, tmp_path / "bad.json")


def test_load_missing_and_malformed(tmp_path):
    with pytest.raises(MissingInputError):
        load_result(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{\"schema\": ")
    with pytest.raises(ValueError, match="line"):
        load_result(tmp_path / "bad.json")


def test_persisting_pipeline_writes_file(tmp_path, bundled):
    cfg = RunConfig(seed=2, output_dir=str(tmp_path), **FAST)
    res = run_pipeline(cfg, scenario=bundled, persist=True)
    assert load_result(tmp_path / "run_seed2.json") == res


def test_study_single_repetition_zero_std(tmp_path, bundled):
    cfg = RunConfig(seed=0, repetitions=1, output_dir=str(tmp_path), **FAST)
    st = run_study(cfg, scenario=bundled)
    assert all(r["std"] == 0.0 and r["n"] == 1 for r in st.table)
    assert {r["solver"] for r in st.table} == {"NSGA-II-KV", "NSGA-II", "US", "RS", "K-means",
                                              "PSO-NGDP", "PSO"}


def test_study_recomputes_and_ignores_order(tmp_path, bundled):
    cfg = RunConfig(seed=0, repetitions=3, output_dir=str(tmp_path),
                    solvers=("NSGA-II-KV", "RS", "US"), **FAST)
    st = run_study(cfg, scenario=bundled)
    recs = load_study_records(tmp_path)
    assert summarize(recs) == st.table
    assert summarize(recs[::-1]) == st.table
    assert (tmp_path / "study.csv").read_text() == table_csv(st.table)
    mean = {(r["solver"], r["metric"]): r["mean"] for r in st.table}
    assert mean[("NSGA-II-KV", "f1")] > mean[("RS", "f1")]


def test_emit_result_plots(tmp_path, short_run):
    paths = emit_plots(short_run, tmp_path / "a")
    names = {p.name for p in paths}
    assert {"front.csv", "trajectory.csv", "coverage.csv", "convergence_uttop.csv"} <= names
    assert len(rows(tmp_path / "a" / "front.csv")) == len(short_run.front)
    M, K = short_run.waypoints.shape[:2]
    assert len(rows(tmp_path / "a" / "trajectory.csv")) == M * (K + 1) + 1
    assert len(rows(tmp_path / "a" / "coverage.csv")) == short_run.scenario.n_devices
    emit_plots(short_run, tmp_path / "b")
    for p in paths:
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_emit_plots_from_file_and_study(tmp_path, short_run, bundled):
    f = save_result(short_run, tmp_path / "run.json")
    out = emit_plots(f)
    assert all(p.exists() for p in out)
    with pytest.raises(MissingInputError):
        emit_plots(tmp_path / "missing.json")
    cfg = RunConfig(repetitions=2, output_dir=str(tmp_path / "st"), solvers=("US", "RS"), **FAST)
    run_study(cfg, scenario=bundled)
    written = emit_plots(tmp_path / "st")
    assert (tmp_path / "st" / "per_run_f1.csv") in written


def test_render_svg(tmp_path, short_run):
    pytest.importorskip("matplotlib")
    paths = emit_plots(short_run, tmp_path, render=True)
    svgs = [p for p in paths if p.suffix == ".svg"]
    assert svgs and all(p.stat().st_size > 0 for p in svgs)


def test_config_echo_is_json(short_run):
    assert json.loads(json.dumps(short_run.config)) == short_run.config
    assert short_run.config["seed"] == 5


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(repetitions=0)
    with pytest.raises(ValueError):
        RunConfig(strategy="best")
    with pytest.raises(ValueError):
        RunConfig(solvers=("GA",))
    assert RunConfig().K == 10
