"""Obstacle-aware tour optimization: PSO-NGDP and the vanilla PSO baseline.

A swarm position is a (M, K, 3) waypoint array: leg ``j`` runs from hover
point ``j`` through ``K`` waypoints to hover point ``(j + 1) % M``. Swarms
are stored as (P, M, K, 3) arrays and updated in batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .objectives import f3_batch, tour_polyline, tour_polylines
from .scenario import Scenario, WorldBounds

# Added to every colliding tour's score so any valid tour ranks ahead.
COLLISION_OFFSET = 1e6


@dataclass(frozen=True)
class PsoConfig:
    population_size: int = 50
    max_generations: int = 300
    waypoints_per_leg: int = 10
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    crossover_prob: float = 0.5
    diff_weight: float = 0.5
    init_divisor: float = 100.0
    altitude_step: float = 2.0
    v1: float = 5.0
    v2: float = 0.5
    sample_step: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.waypoints_per_leg < 1:
            raise ValueError("waypoints_per_leg must be >= 1")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if not self.v1 > self.v2 > 0:
            raise ValueError("velocity schedule needs v1 > v2 > 0")
        for name in ("inertia", "c1", "c2", "init_divisor", "altitude_step", "sample_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.diff_weight < 0 or self.max_generations < 0:
            raise ValueError("diff_weight and max_generations must be nonnegative")


@dataclass
class Swarm:
    X: np.ndarray
    V: np.ndarray
    pbest_X: np.ndarray
    pbest_score: np.ndarray
    gbest_X: np.ndarray
    gbest_score: float
    iteration: int = 0


@dataclass
class TrajectoryResult:
    waypoints: np.ndarray
    f3: float
    score: float
    trace: list[float] = field(default_factory=list)
    escape_iterations: int = 0

    @property
    def valid(self) -> bool:
        return self.score < COLLISION_OFFSET


def velocity_bound(it: int, cfg: PsoConfig) -> float:
    """Linearly shrinking |v| cap from v1 (it=0) to v2 (it=G_max)."""
    if cfg.max_generations == 0:
        return cfg.v1
    return cfg.v1 - (cfg.v1 - cfg.v2) * it / cfg.max_generations


# -- initialization -----------------------------------------------------------

def blend_weights(K: int) -> np.ndarray:
    """(K, 3) endpoint blend weights toward the leg's far end, per coordinate."""
    ind = 3 * np.arange(K)
    return np.column_stack([np.mod(ind + c, 3 * K) for c in (1, 2, 3)]) / (3.0 * K)


def normal_init(hover_points, K: int, cfg: PsoConfig, bounds: WorldBounds,
                rng: np.random.Generator, clamp: bool = True) -> np.ndarray:
    q = np.asarray(hover_points, dtype=np.float64).reshape(-1, 3)
    M = q.shape[0]
    start = q[:, None, :]
    end = np.roll(q, -1, axis=0)[:, None, :]
    w = blend_weights(K)[None]
    extent = np.array([bounds.x_max, bounds.y_max, bounds.z_max])
    randn = rng.normal(0.0, 1.0, size=(M, K, 3)) * (extent / 100.0)
    X = randn * extent / cfg.init_divisor + (1.0 - w) * start + w * end
    if clamp:
        np.clip(X, bounds.flight_lo, bounds.flight_hi, out=X)
    return X


def uniform_init(M: int, K: int, bounds: WorldBounds, rng) -> np.ndarray:
    return rng.uniform(bounds.flight_lo, bounds.flight_hi, size=(M, K, 3))


# -- pretreatment -------------------------------------------------------------

def slab_index(K: int) -> np.ndarray:
    """Slab of each waypoint index: ceil(K/2) slabs, earlier slabs take the extra."""
    n_slabs = math.ceil(K / 2)
    sizes = [len(a) for a in np.array_split(np.arange(K), n_slabs)]
    return np.repeat(np.arange(n_slabs), sizes), n_slabs


def pretreatment_batch(hover_points, X: np.ndarray) -> np.ndarray:
    """Project stray waypoints onto their slab boundary planes.

    Slabs are cut by vertical planes normal to each leg's horizontal axis;
    only the along-axis horizontal component of a waypoint moves.
    """
    q = np.asarray(hover_points, dtype=np.float64).reshape(-1, 3)
    K = X.shape[-2]
    slab, n_slabs = slab_index(K)
    start = q[:, :2]
    axis = np.roll(q, -1, axis=0)[:, :2] - start
    length = np.linalg.norm(axis, axis=1)
    ok = length > 1e-9
    u = np.zeros_like(axis)
    u[ok] = axis[ok] / length[ok, None]
    s = ((X[..., :2] - start[:, None, :]) * u[:, None, :]).sum(axis=-1)
    lo = slab[None, :] * (length[:, None] / n_slabs)
    hi = (slab[None, :] + 1) * (length[:, None] / n_slabs)
    shift = np.clip(s, lo, hi) - s
    shift = np.where(ok[:, None], shift, 0.0)
    out = X.copy()
    out[..., :2] += shift[..., None] * u[:, None, :]
    return out


def pretreatment(start, end, waypoints) -> np.ndarray:
    """Single-leg form of ``pretreatment_batch``."""
    q = np.array([start, end], dtype=np.float64)
    leg = np.asarray(waypoints, dtype=np.float64)
    # two-point tour whose leg 0 runs start -> end; leg 1 is a throwaway copy
    return pretreatment_batch(q, np.stack([leg, leg])[None])[0, 0]


# -- operators ----------------------------------------------------------------

def pso_step(swarm: Swarm, cfg: PsoConfig, it: int, lo, hi, rng) -> None:
    vmax = velocity_bound(it, cfg)
    r1 = rng.random(swarm.X.shape)
    r2 = rng.random(swarm.X.shape)
    V = (cfg.inertia * swarm.V + cfg.c1 * r1 * (swarm.pbest_X - swarm.X)
         + cfg.c2 * r2 * (swarm.gbest_X[None] - swarm.X))
    np.clip(V, -vmax, vmax, out=V)
    swarm.V = V
    swarm.X = np.clip(swarm.X + V, lo, hi)


def genetic_crossover(xa, xb, va, vb, r_cro: float, rng):
    """Swap same-index waypoints (and their velocities) with probability r_cro."""
    xa, xb = np.asarray(xa), np.asarray(xb)
    if xa.shape != xb.shape:
        raise ValueError("particles differ in shape")
    swap = (rng.random(xa.shape[:-1]) < r_cro)[..., None]
    return (np.where(swap, xb, xa), np.where(swap, xa, xb),
            np.where(swap, vb, va), np.where(swap, va, vb))


def crossover_swarm(swarm: Swarm, r_cro: float, vmax: float, rng) -> None:
    P = swarm.X.shape[0]
    perm = rng.permutation(P)
    a, b = perm[0: P - 1: 2], perm[1: P: 2]
    xa, xb, va, vb = genetic_crossover(swarm.X[a], swarm.X[b], swarm.V[a], swarm.V[b], r_cro, rng)
    swarm.X[a], swarm.X[b], swarm.V[a], swarm.V[b] = xa, xb, va, vb
    np.clip(swarm.V, -vmax, vmax, out=swarm.V)


def donor_legs(P: int, M: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Two distinct legs per (particle, leg), both different from the leg itself."""
    j = np.arange(M)[None, :]
    a = rng.integers(0, M - 1, size=(P, M))
    a = a + (a >= j)
    b = rng.integers(0, M - 2, size=(P, M))
    low = np.minimum(j, a)
    high = np.maximum(j, a)
    b = b + (b >= low)
    b = b + (b >= high)
    return a, b


def differential_candidates(X: np.ndarray, F0: float, lo, hi, rng) -> np.ndarray:
    P, M = X.shape[:2]
    a, b = donor_legs(P, M, rng)
    p = np.arange(P)[:, None]
    cand = X + F0 * (X[p, a] - X[p, b])
    return np.clip(cand, lo, hi)


def differential_step(hover_points, X: np.ndarray, F0: float, lo, hi, rng):
    """Mutate each particle from other legs' same-index waypoints; keep if f3 does not grow.

    ``X`` is (P, M, K, 3). Returns the new positions and the acceptance mask.
    Fewer than three legs leaves the swarm unchanged.
    """
    P, M = X.shape[:2]
    if M < 3:
        return X.copy(), np.zeros(P, dtype=bool)
    cand = differential_candidates(X, F0, lo, hi, rng)
    accept = f3_batch(hover_points, cand) <= f3_batch(hover_points, X)
    return np.where(accept[:, None, None, None], cand, X), accept


def escape_cap(bounds: WorldBounds, step: float) -> int:
    """Pursuit iterations after which a single lift alone spans the flight band."""
    return 10 * max(1, math.ceil((bounds.z_max - bounds.z_min) / step))


def escape_obstacles(X: np.ndarray, gbest, pbest, obs: np.ndarray, bounds: WorldBounds,
                     lift_step: float, vmax: float, rng) -> tuple[np.ndarray, int]:
    """Pursuit-and-lift every buried waypoint until it clears the terrain.

    ``X`` and ``pbest`` share any (..., 3) shape; ``gbest`` broadcasts to it.
    Returns the corrected positions and the total pursuit iterations spent.
    """
    X = np.asarray(X, dtype=np.float64)
    flat = X.reshape(-1, 3)
    if obs.shape[0] == 0:
        return X.copy(), 0
    buried = kernels.obstacle_height(obs, flat[:, 0], flat[:, 1]) >= flat[:, 2]
    if not buried.any():
        return X.copy(), 0
    idx = np.flatnonzero(buried)
    g = np.broadcast_to(gbest, X.shape).reshape(-1, 3)[idx]
    p = np.asarray(pbest).reshape(-1, 3)[idx]
    uniforms = rng.random((idx.size, escape_cap(bounds, lift_step), 6))
    new, iters = kernels.escape_waypoints(
        np.ascontiguousarray(flat[idx]), np.ascontiguousarray(g), np.ascontiguousarray(p),
        uniforms, float(vmax), bounds.flight_lo, bounds.flight_hi, float(lift_step), obs)
    out = flat.copy()
    out[idx] = new
    return out.reshape(X.shape), int(iters.sum())


def lift_stuck(X: np.ndarray, obs: np.ndarray, bounds: WorldBounds, step: float) -> np.ndarray:
    """Raise every buried waypoint by one altitude step (baseline handling)."""
    out = X.copy()
    flat = out.reshape(-1, 3)
    if obs.shape[0]:
        buried = kernels.obstacle_height(obs, flat[:, 0], flat[:, 1]) >= flat[:, 2]
        flat[buried, 2] = np.minimum(flat[buried, 2] + step, bounds.z_max)
    return out


# -- scoring and validation ---------------------------------------------------

def tour_scores(hover_points, X: np.ndarray, obs: np.ndarray, step: float):
    """(scores, f3) for a (P, M, K, 3) swarm; colliding tours carry COLLISION_OFFSET."""
    length = f3_batch(hover_points, X)
    if obs.shape[0] == 0:
        return length, length
    tours = np.ascontiguousarray(tour_polylines(hover_points, X))
    count, depth = kernels.polyline_penetration(tours, obs, float(step))
    penalty = np.where(count > 0, COLLISION_OFFSET + depth + 1e-3 * count, 0.0)
    return length + penalty, length


@dataclass
class ValidationReport:
    ok: bool
    segment: int = -1
    point: tuple[float, float, float] | None = None
    terrain: float | None = None

    def __bool__(self):
        return self.ok


def validate_trajectory(waypoints, hover_points, obs, step: float = 0.5,
                        bounds: WorldBounds | None = None) -> ValidationReport:
    """Dense-sample the closed tour; True iff every sample is strictly above terrain."""
    if step <= 0:
        raise ValueError("step must be positive")
    obs = np.asarray(obs, dtype=np.float64).reshape(-1, 5)
    tour = tour_polyline(hover_points, waypoints)
    if bounds is not None:
        w = np.asarray(waypoints).reshape(-1, 3)
        if np.any(w < bounds.flight_lo - 1e-9) or np.any(w > bounds.flight_hi + 1e-9):
            bad = int(np.flatnonzero(np.any((w < bounds.flight_lo - 1e-9) | (w > bounds.flight_hi + 1e-9), axis=1))[0])
            return ValidationReport(False, -1, tuple(map(float, w[bad])), None)
    if obs.shape[0] == 0:
        return ValidationReport(True)
    for s in range(tour.shape[0] - 1):
        a, b = tour[s], tour[s + 1]
        n = max(int(math.ceil(np.linalg.norm(b - a) / step)), 1)
        t = np.arange(n + 1)[:, None] / n
        pts = a + (b - a) * t
        h = kernels.obstacle_height(obs, pts[:, 0], pts[:, 1])
        hit = np.flatnonzero(h >= pts[:, 2])
        if hit.size:
            i = int(hit[0])
            return ValidationReport(False, s, tuple(map(float, pts[i])), float(h[i]))
    return ValidationReport(True)


# -- drivers ------------------------------------------------------------------

def _init_swarm(X: np.ndarray, hover_points, obs, cfg: PsoConfig) -> Swarm:
    scores, _ = tour_scores(hover_points, X, obs, cfg.sample_step)
    g = int(np.argmin(scores))
    return Swarm(X, np.zeros_like(X), X.copy(), scores.copy(), X[g].copy(), float(scores[g]))


def _update_bests(swarm: Swarm, scores: np.ndarray) -> None:
    better = scores < swarm.pbest_score
    swarm.pbest_X[better] = swarm.X[better]
    swarm.pbest_score[better] = scores[better]
    g = int(np.argmin(swarm.pbest_score))
    if swarm.pbest_score[g] < swarm.gbest_score:
        swarm.gbest_score = float(swarm.pbest_score[g])
        swarm.gbest_X = swarm.pbest_X[g].copy()


def _result(swarm: Swarm, hover_points, trace, spent) -> TrajectoryResult:
    length = float(f3_batch(hover_points, swarm.gbest_X[None])[0])
    return TrajectoryResult(swarm.gbest_X.copy(), length, swarm.gbest_score, trace, spent)


def run_psongdp(hover_points, scenario: Scenario, cfg: PsoConfig) -> TrajectoryResult:
    rng = np.random.default_rng(cfg.seed)
    q = np.asarray(hover_points, dtype=np.float64).reshape(-1, 3)
    b = scenario.bounds
    obs = scenario.obstacle_array
    lo, hi = b.flight_lo, b.flight_hi
    K = cfg.waypoints_per_leg
    X = np.stack([normal_init(q, K, cfg, b, rng) for _ in range(cfg.population_size)])
    X = pretreatment_batch(q, X)
    swarm = _init_swarm(X, q, obs, cfg)
    trace = [swarm.gbest_score]
    spent = 0
    for it in range(1, cfg.max_generations + 1):
        swarm.iteration = it
        crossover_swarm(swarm, cfg.crossover_prob, velocity_bound(it - 1, cfg), rng)
        swarm.X, _ = differential_step(q, swarm.X, cfg.diff_weight, lo, hi, rng)
        pso_step(swarm, cfg, it, lo, hi, rng)
        swarm.X = pretreatment_batch(q, swarm.X)
        swarm.X, n = escape_obstacles(swarm.X, swarm.gbest_X, swarm.pbest_X, obs, b,
                                      cfg.altitude_step, velocity_bound(it, cfg), rng)
        spent += n
        scores, _ = tour_scores(q, swarm.X, obs, cfg.sample_step)
        _update_bests(swarm, scores)
        trace.append(swarm.gbest_score)
    return _result(swarm, q, trace, spent)


def run_vanilla_pso(hover_points, scenario: Scenario, cfg: PsoConfig) -> TrajectoryResult:
    rng = np.random.default_rng(cfg.seed)
    q = np.asarray(hover_points, dtype=np.float64).reshape(-1, 3)
    b = scenario.bounds
    obs = scenario.obstacle_array
    lo, hi = b.flight_lo, b.flight_hi
    M, K = q.shape[0], cfg.waypoints_per_leg
    X = np.stack([uniform_init(M, K, b, rng) for _ in range(cfg.population_size)])
    swarm = _init_swarm(X, q, obs, cfg)
    trace = [swarm.gbest_score]
    for it in range(1, cfg.max_generations + 1):
        swarm.iteration = it
        pso_step(swarm, cfg, it, lo, hi, rng)
        swarm.X = lift_stuck(swarm.X, obs, b, cfg.altitude_step)
        scores, _ = tour_scores(q, swarm.X, obs, cfg.sample_step)
        _update_bests(swarm, scores)
        trace.append(swarm.gbest_score)
    return _result(swarm, q, trace, 0)
