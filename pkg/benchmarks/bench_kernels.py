"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py            # kernel table
    python benchmarks/bench_kernels.py --pipeline # also a short end-to-end run per backend

The numba column excludes first-call compilation (one warm-up call).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from wpcnplan.kernels import _numba, _numpy
from wpcnplan.objectives import tour_polylines
from wpcnplan.scenario import bundled_scenario


def best_of(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    sc = bundled_scenario()
    obs = sc.obstacle_array
    ch, cm = sc.physics.charging, sc.physics.comm
    P, M, N = 100, 10, sc.n_devices
    pts = np.empty((P, M, 3))
    pts[..., :2] = rng.uniform(0, 500, (P, M, 2))
    pts[..., 2] = rng.uniform(5, 20, (P, M))
    pc = rng.uniform(1, 3, (P, M))
    pt = rng.uniform(0.1, 1, (P, N))
    hover_args = (pts, pc, pt, sc.device_xy, sc.device_energy, sc.device_data,
                  ch.d_max, ch.gamma, ch.tau, cm.beta0, cm.alpha, cm.kappa, cm.C, cm.D,
                  cm.bandwidth, cm.noise_power, cm.rate_threshold)

    F = rng.random((100, 2))
    viol = np.where(rng.random(100) < 0.3, rng.random(100), 0.0)

    hover = pts[0]
    swarm = rng.uniform([0, 0, 5], [500, 500, 30], (50, M, 10, 3))
    tours = np.ascontiguousarray(tour_polylines(hover, swarm))

    n = 200
    w = np.column_stack([obs[rng.integers(0, len(obs), n), :2] + rng.normal(0, 5, (n, 2)),
                         np.full(n, 6.0)])
    g = np.column_stack([rng.uniform(0, 500, (n, 2)), np.full(n, 29.0)])
    lo, hi = sc.bounds.flight_lo, sc.bounds.flight_hi
    uni = rng.random((n, 130, 6))
    xg, yg = rng.uniform(0, 500, (2, 200_000))

    return {
        "obstacle_height (2e5 pts)": lambda k: k.obstacle_height(obs, xg, yg),
        "hover_eval (100 x 10 x 500)": lambda k: k.hover_eval(*hover_args),
        "nondominated_ranks (100)": lambda k: k.nondominated_ranks(F, viol),
        "polyline_penetration (50 tours)": lambda k: k.polyline_penetration(tours, obs, 0.5),
        "escape_waypoints (200 buried)": lambda k: k.escape_waypoints(w, g, g, uni, 5.0, lo, hi, 2.0, obs),
    }


def pipeline_time(backend):
    code = ("import time; from wpcnplan.harness import RunConfig, run_pipeline;"
            "from wpcnplan.upaop import MoeaConfig; from wpcnplan.uttop import PsoConfig;"
            "run_pipeline(RunConfig(moea=MoeaConfig(max_generations=2), pso=PsoConfig(max_generations=2)));"
            "t=time.perf_counter();"
            "run_pipeline(RunConfig(moea=MoeaConfig(max_generations=100), pso=PsoConfig(max_generations=100)));"
            "print(time.perf_counter()-t)")
    env = dict(os.environ, WPCNPLAN_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--pipeline", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_np = best_of(lambda: fn(_numpy), args.repeat)
        t_nb = best_of(lambda: fn(_numba), args.repeat)
        print(f"{name:34s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:8.1f}x")

    if args.pipeline:
        for backend in ("numpy", "numba"):
            print(f"pipeline (100 gen / 100 it), {backend}: {pipeline_time(backend):.2f} s")


if __name__ == "__main__":
    main()
