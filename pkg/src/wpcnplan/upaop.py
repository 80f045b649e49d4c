"""Hover-point and power allocation: NSGA-II with K-means seeding plus baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .objectives import HoverPlan, ObjectiveConfig, ObjectiveVector, evaluate_batch
from .scenario import Scenario


@dataclass(frozen=True)
class MoeaConfig:
    n_points: int = 10
    population_size: int = 50
    max_generations: int = 300
    crossover_prob: float = 0.9
    crossover_eta: float = 20.0
    # None -> 1 / genome length
    mutation_prob: float | None = None
    mutation_eta: float = 20.0
    objectives: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    seed: int = 0
    kmeans_init: bool = True
    repair_margin: float = 0.5
    kmeans_max_iter: int = 100

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 2")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.max_generations < 0:
            raise ValueError("max_generations must be >= 0")


@dataclass
class Individual:
    genome: HoverPlan
    objectives: ObjectiveVector
    rank: int = 0
    crowding: float = 0.0

    @property
    def f1(self) -> int:
        return int(round(-self.objectives.values[0]))

    @property
    def f2(self) -> float:
        return self.objectives.values[1]


@dataclass
class Population:
    X: np.ndarray
    F: np.ndarray
    violation: np.ndarray
    rank: np.ndarray
    crowding: np.ndarray
    generation: int = 0

    def __len__(self):
        return self.X.shape[0]

    def individual(self, i: int, M: int) -> Individual:
        v = float(self.violation[i])
        return Individual(HoverPlan.from_vector(self.X[i], M),
                          ObjectiveVector(tuple(self.F[i]), v <= 0.0, v),
                          int(self.rank[i]), float(self.crowding[i]))


@dataclass
class EvolveResult:
    front: list[Individual]
    population: Population
    front_history: list[np.ndarray]
    best_f1_trace: list[int]


# -- bounds and repair --------------------------------------------------------

def genome_bounds(scenario: Scenario, M: int) -> tuple[np.ndarray, np.ndarray]:
    b = scenario.bounds
    ch = scenario.physics.charging
    cm = scenario.physics.comm
    N = scenario.n_devices
    lo = np.concatenate([np.tile(b.hover_lo, M), np.full(M, ch.pc_min), np.full(N, cm.pt_min)])
    hi = np.concatenate([np.tile(b.hover_hi, M), np.full(M, ch.pc_max), np.full(N, cm.pt_max)])
    return lo, hi


def repair_altitude(points: np.ndarray, scenario: Scenario, margin: float = 0.5):
    """Lift hover points out of the obstacle field, capped at d_max.

    Works in place on ``(..., 3)`` arrays and returns a mask of points that
    could not be lifted clear.
    """
    flat = points.reshape(-1, 3)
    need = scenario.height(flat[:, 0], flat[:, 1]) + margin
    low = flat[:, 2] < need
    flat[low, 2] = np.minimum(need[low], scenario.bounds.d_max)
    stuck = need > scenario.bounds.d_max
    return stuck.reshape(points.shape[:-1])


# -- seeding ------------------------------------------------------------------

def kmeans_centers(xy: np.ndarray, M: int, rng: np.random.Generator, max_iter: int = 100):
    """Lloyd iteration from M distinct random devices; empty clusters reseed at a random device."""
    N = xy.shape[0]
    if M > N:
        raise ValueError("more clusters than devices")
    centers = xy[rng.choice(N, size=M, replace=False)].copy()
    labels = None
    for _ in range(max_iter):
        d2 = ((xy[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=M)
        sums = np.zeros((M, 2))
        np.add.at(sums, labels, xy)
        filled = counts > 0
        centers[filled] = sums[filled] / counts[filled, None]
        for j in np.flatnonzero(~filled):
            centers[j] = xy[rng.integers(N)]
    return centers


def kmeans_seed(scenario: Scenario, M: int, rng: np.random.Generator,
                max_iter: int = 100, margin: float = 0.5) -> np.ndarray:
    b = scenario.bounds
    centers = kmeans_centers(scenario.device_xy, M, rng, max_iter)
    z = rng.uniform(b.z_min, b.d_max, size=M)
    points = np.column_stack([centers, z])
    repair_altitude(points, scenario, margin)
    return points


def _random_points(scenario: Scenario, M: int, rng) -> np.ndarray:
    b = scenario.bounds
    return np.column_stack([rng.uniform(b.x_min, b.x_max, M),
                            rng.uniform(b.y_min, b.y_max, M),
                            rng.uniform(b.z_min, b.d_max, M)])


def initialize_population(scenario: Scenario, cfg: MoeaConfig,
                          rng: np.random.Generator | None = None) -> Population:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    M, N, NP = cfg.n_points, scenario.n_devices, cfg.population_size
    ch, cm = scenario.physics.charging, scenario.physics.comm
    X = np.empty((NP, 4 * M + N))
    for p in range(NP):
        if cfg.kmeans_init:
            pts = kmeans_seed(scenario, M, rng, cfg.kmeans_max_iter, cfg.repair_margin)
        else:
            pts = _random_points(scenario, M, rng)
            repair_altitude(pts, scenario, cfg.repair_margin)
        X[p, : 3 * M] = pts.reshape(-1)
        X[p, 3 * M: 4 * M] = rng.uniform(ch.pc_min, ch.pc_max, M)
        X[p, 4 * M:] = rng.uniform(cm.pt_min, cm.pt_max, N)
    F, viol, _ = evaluate_batch(X, M, scenario, cfg.objectives)
    rank, crowd = rank_and_crowd(F, viol)
    return Population(X, F, viol, rank, crowd)


# -- sorting ------------------------------------------------------------------

def fast_nondominated_sort(F, violation=None) -> list[np.ndarray]:
    F = np.ascontiguousarray(F, dtype=np.float64)
    viol = np.zeros(F.shape[0]) if violation is None else np.ascontiguousarray(violation, float)
    if F.shape[0] == 0:
        return []
    ranks = kernels.nondominated_ranks(F, viol)
    return [np.flatnonzero(ranks == r) for r in range(1, int(ranks.max()) + 1)]


def crowding_distance(F) -> np.ndarray:
    """Crowding distance of one front; boundary members get inf."""
    F = np.asarray(F, dtype=np.float64)
    n, k = F.shape
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for m in range(k):
        order = np.lexsort((np.arange(n), F[:, m]))
        vals = F[order, m]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = vals[-1] - vals[0]
        if span > 0:
            dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def rank_and_crowd(F, viol):
    fronts = fast_nondominated_sort(F, viol)
    rank = np.empty(F.shape[0], dtype=np.int64)
    crowd = np.empty(F.shape[0])
    for r, idx in enumerate(fronts, start=1):
        rank[idx] = r
        crowd[idx] = crowding_distance(F[idx])
    return rank, crowd


# -- variation ----------------------------------------------------------------

def tournament(rank, crowd, n: int, rng) -> np.ndarray:
    a = rng.integers(0, rank.size, size=n)
    b = rng.integers(0, rank.size, size=n)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


def sbx(p1, p2, lo, hi, prob, eta, rng):
    """Bounded simulated binary crossover on paired rows."""
    c1, c2 = p1.copy(), p2.copy()
    n, L = p1.shape
    do_pair = rng.random(n) < prob
    do_var = (rng.random((n, L)) < 0.5) & do_pair[:, None]
    u = rng.random((n, L))
    swap = rng.random((n, L)) < 0.5
    diff = np.abs(p1 - p2)
    mask = do_var & (diff > 1e-14)
    if not mask.any():
        return c1, c2
    y1 = np.minimum(p1, p2)[mask]
    y2 = np.maximum(p1, p2)[mask]
    lo_m = np.broadcast_to(lo, p1.shape)[mask]
    hi_m = np.broadcast_to(hi, p1.shape)[mask]
    uu = u[mask]
    span = y2 - y1
    e1 = 1.0 / (eta + 1.0)

    def betaq(beta):
        alpha = 2.0 - beta ** (-(eta + 1.0))
        return np.where(uu <= 1.0 / alpha, (uu * alpha) ** e1, (1.0 / (2.0 - uu * alpha)) ** e1)

    b1 = betaq(1.0 + 2.0 * (y1 - lo_m) / span)
    b2 = betaq(1.0 + 2.0 * (hi_m - y2) / span)
    ch1 = np.clip(0.5 * ((y1 + y2) - b1 * span), lo_m, hi_m)
    ch2 = np.clip(0.5 * ((y1 + y2) + b2 * span), lo_m, hi_m)
    s = swap[mask]
    c1[mask] = np.where(s, ch2, ch1)
    c2[mask] = np.where(s, ch1, ch2)
    return c1, c2


def polynomial_mutation(X, lo, hi, prob, eta, rng):
    X = X.copy()
    mask = rng.random(X.shape) < prob
    u = rng.random(X.shape)
    if not mask.any():
        return X
    lo_b = np.broadcast_to(lo, X.shape)[mask]
    hi_b = np.broadcast_to(hi, X.shape)[mask]
    x = X[mask]
    uu = u[mask]
    span = hi_b - lo_b
    d1 = (x - lo_b) / span
    d2 = (hi_b - x) / span
    mp = 1.0 / (eta + 1.0)
    left = uu < 0.5
    val_l = 2.0 * uu + (1.0 - 2.0 * uu) * (1.0 - d1) ** (eta + 1.0)
    val_r = 2.0 * (1.0 - uu) + 2.0 * (uu - 0.5) * (1.0 - d2) ** (eta + 1.0)
    dq = np.where(left, np.abs(val_l) ** mp - 1.0, 1.0 - np.abs(val_r) ** mp)
    X[mask] = np.clip(x + dq * span, lo_b, hi_b)
    return X


def vary(parents: np.ndarray, scenario: Scenario, cfg: MoeaConfig, rng) -> np.ndarray:
    """SBX + polynomial mutation on consecutive parent pairs, then clip and C4 repair."""
    M = cfg.n_points
    lo, hi = genome_bounds(scenario, M)
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / parents.shape[1]
    a, b = parents[0::2], parents[1::2]
    c1, c2 = sbx(a, b, lo, hi, cfg.crossover_prob, cfg.crossover_eta, rng)
    kids = np.empty_like(parents)
    kids[0::2], kids[1::2] = c1, c2
    kids = polynomial_mutation(kids, lo, hi, pm, cfg.mutation_eta, rng)
    np.clip(kids, lo, hi, out=kids)
    pts = kids[:, : 3 * M].reshape(-1, M, 3)
    repair_altitude(pts, scenario, cfg.repair_margin)
    kids[:, : 3 * M] = pts.reshape(kids.shape[0], -1)
    return kids


def _truncate(F, viol, NP):
    fronts = fast_nondominated_sort(F, viol)
    keep: list[int] = []
    rank = np.empty(F.shape[0], dtype=np.int64)
    crowd = np.empty(F.shape[0])
    for r, idx in enumerate(fronts, start=1):
        rank[idx] = r
        crowd[idx] = crowding_distance(F[idx])
        if len(keep) + idx.size <= NP:
            keep.extend(idx.tolist())
        elif len(keep) < NP:
            order = idx[np.lexsort((idx, -crowd[idx]))]
            keep.extend(order[: NP - len(keep)].tolist())
    keep_arr = np.array(keep, dtype=np.int64)
    return keep_arr, rank[keep_arr], crowd[keep_arr]


def _best_f1(F, viol) -> int:
    feas = viol <= 0.0
    pool = F[feas] if feas.any() else F
    return int(round(-pool[:, 0].min()))


def evolve(scenario: Scenario, cfg: MoeaConfig) -> EvolveResult:
    rng = np.random.default_rng(cfg.seed)
    M, NP = cfg.n_points, cfg.population_size
    pop = initialize_population(scenario, cfg, rng)
    history = [pop.F[pop.rank == 1].copy()]
    best = [_best_f1(pop.F, pop.violation)]
    for gen in range(1, cfg.max_generations + 1):
        parents = pop.X[tournament(pop.rank, pop.crowding, NP, rng)]
        kids = vary(parents, scenario, cfg, rng)
        Fk, vk, _ = evaluate_batch(kids, M, scenario, cfg.objectives)
        X = np.vstack([pop.X, kids])
        F = np.vstack([pop.F, Fk])
        viol = np.concatenate([pop.violation, vk])
        keep, rank, crowd = _truncate(F, viol, NP)
        pop = Population(X[keep], F[keep], viol[keep], rank, crowd, gen)
        history.append(pop.F[pop.rank == 1].copy())
        best.append(_best_f1(pop.F, pop.violation))
    front = [pop.individual(i, M) for i in np.flatnonzero(pop.rank == 1)]
    return EvolveResult(front, pop, history, best)


# -- baselines ----------------------------------------------------------------

def grid_shape(M: int) -> tuple[int, int]:
    """(rows, cols) with rows * cols == M, rows <= cols, most nearly square."""
    r = max(d for d in range(1, int(math.isqrt(M)) + 1) if M % d == 0)
    return r, M // r


def _max_power_plan(scenario: Scenario, points) -> HoverPlan:
    M = points.shape[0]
    return HoverPlan(points, np.full(M, scenario.physics.charging.pc_max),
                     np.full(scenario.n_devices, scenario.physics.comm.pt_max))


def baseline_us(scenario: Scenario, M: int, height: float = 5.0) -> HoverPlan:
    b = scenario.bounds
    rows, cols = grid_shape(M)
    xs = b.x_min + (np.arange(cols) + 0.5) * (b.x_max - b.x_min) / cols
    ys = b.y_min + (np.arange(rows) + 0.5) * (b.y_max - b.y_min) / rows
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel(), np.full(M, height)])
    return _max_power_plan(scenario, points)


def baseline_rs(scenario: Scenario, M: int, rng: np.random.Generator) -> HoverPlan:
    return _max_power_plan(scenario, _random_points(scenario, M, rng))


def baseline_kmeans(scenario: Scenario, M: int, rng: np.random.Generator,
                    height: float = 5.0, max_iter: int = 100) -> HoverPlan:
    centers = kmeans_centers(scenario.device_xy, M, rng, max_iter)
    return _max_power_plan(scenario, np.column_stack([centers, np.full(M, height)]))


# -- selection ----------------------------------------------------------------

def select_solution(front: list[Individual], strategy: str = "CWMS") -> Individual:
    if not front:
        raise ValueError("cannot select from an empty front")
    strategy = strategy.upper()
    if strategy == "CWMS":
        key = lambda ind: (-ind.f1, ind.f2)  # noqa: E731
    elif strategy == "TEMS":
        key = lambda ind: (ind.f2, -ind.f1)  # noqa: E731
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return min(front, key=key)
