"""Objective and constraint evaluation for hover plans and tours.

A hover genome is a flat vector of length ``4M + N``::

    [x1, y1, z1, ..., xM, yM, zM, Pc1..PcM, Pt1..PtN]

Every device keeps a transmit-power gene, covered or not; only devices
assigned to a hover point enter the timing model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .scenario import Scenario


@dataclass
class HoverPlan:
    points: np.ndarray
    charge_powers: np.ndarray
    device_powers: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.charge_powers = np.asarray(self.charge_powers, dtype=np.float64).reshape(-1)
        self.device_powers = np.asarray(self.device_powers, dtype=np.float64).reshape(-1)
        if self.charge_powers.size != self.points.shape[0]:
            raise ValueError("need one charge power per hover point")

    @property
    def M(self) -> int:
        return self.points.shape[0]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.points.reshape(-1), self.charge_powers, self.device_powers])

    @classmethod
    def from_vector(cls, vec, M: int) -> "HoverPlan":
        vec = np.asarray(vec, dtype=np.float64)
        return cls(vec[: 3 * M].reshape(M, 3), vec[3 * M: 4 * M], vec[4 * M:])

    def __eq__(self, other):
        if not isinstance(other, HoverPlan):
            return NotImplemented
        return (np.array_equal(self.points, other.points)
                and np.array_equal(self.charge_powers, other.charge_powers)
                and np.array_equal(self.device_powers, other.device_powers))


@dataclass(frozen=True)
class ObjectiveVector:
    values: tuple[float, ...]
    feasible: bool = True
    violation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not all(np.isfinite(self.values)):
            raise ValueError("objective values must be finite")


@dataclass(frozen=True)
class ObjectiveConfig:
    penalty: float = 1000.0
    weight_hover: float = 1.0
    weight_diff: float = 1.0
    weight_penalty: float = 1.0


@dataclass
class Coverage:
    within: np.ndarray       # (N, M) bool, distance <= d_max
    assignment: np.ndarray   # (N,) serving point index or -1

    @property
    def covered_sets(self) -> list[np.ndarray]:
        M = self.within.shape[1]
        return [np.flatnonzero(self.assignment == j) for j in range(M)]

    @property
    def covered_count(self) -> int:
        return int((self.assignment >= 0).sum())


@dataclass
class HoverEvaluation:
    covered_count: int
    covered_sets: list[np.ndarray]
    per_point_charge_time: np.ndarray
    per_point_collect_time: np.ndarray
    hover_times: np.ndarray
    time_diffs: np.ndarray
    empty_point_count: int
    f2: float
    feasible: bool
    violation: float
    assignment: np.ndarray = field(repr=False, default=None)

    def objectives(self) -> ObjectiveVector:
        return ObjectiveVector((-self.covered_count, self.f2), self.feasible, self.violation)


def _kernel_args(scenario: Scenario):
    ch = scenario.physics.charging
    cm = scenario.physics.comm
    return (scenario.device_xy, scenario.device_energy, scenario.device_data,
            ch.d_max, ch.gamma, ch.tau, cm.beta0, cm.alpha, cm.kappa, cm.C, cm.D,
            cm.bandwidth, cm.noise_power, cm.rate_threshold)


def coverage(plan: HoverPlan, scenario: Scenario) -> Coverage:
    dx = scenario.device_xy[:, None, 0] - plan.points[None, :, 0]
    dy = scenario.device_xy[:, None, 1] - plan.points[None, :, 1]
    d = np.sqrt(dx ** 2 + dy ** 2 + plan.points[None, :, 2] ** 2)
    within = d <= scenario.physics.charging.d_max
    masked = np.where(within, d, np.inf)
    nearest = np.argmin(masked, axis=1)
    assignment = np.where(within.any(axis=1), nearest, -1)
    return Coverage(within, assignment)


def _timing_arrays(points, pc, pt, scenario):
    return kernels.hover_eval(points, pc, pt, *_kernel_args(scenario))


def f2(tc, tdc, counts, cfg: ObjectiveConfig = ObjectiveConfig()):
    """Hover time + charge/collect mismatch + empty-point penalty.

    Works on a single plan (1-D per-point arrays) or a batch (2-D).
    """
    th = np.maximum(tc, tdc)
    td = np.abs(tc - tdc)
    empty = (np.asarray(counts) == 0).sum(axis=-1)
    return (cfg.weight_hover * th.sum(axis=-1) + cfg.weight_diff * td.sum(axis=-1)
            + cfg.weight_penalty * empty * cfg.penalty)


def _box_excess(vals, lo, hi):
    span = np.where(hi > lo, hi - lo, 1.0)
    return (np.maximum(lo - vals, 0.0) + np.maximum(vals - hi, 0.0)) / span


def constraint_violation(points, pc, pt, rate_short, scenario: Scenario):
    """Summed normalized excess over C1-C4 and C9-C11; batch-shaped (P,)."""
    b = scenario.bounds
    ch = scenario.physics.charging
    cm = scenario.physics.comm
    box = _box_excess(points, b.hover_lo, b.hover_hi).sum(axis=(-1, -2))
    ob = kernels.obstacle_height(scenario.obstacle_array, points[..., 0].ravel(),
                                 points[..., 1].ravel()).reshape(points.shape[:-1])
    z = points[..., 2]
    c4 = np.where(ob >= z, (ob - z) / (b.d_max - b.z_min) + 1e-9, 0.0).sum(axis=-1)
    c9 = _box_excess(pc, ch.pc_min, ch.pc_max).sum(axis=-1)
    c10 = _box_excess(pt, cm.pt_min, cm.pt_max).sum(axis=-1)
    return box + c4 + c9 + c10 + rate_short


def evaluate_batch(genomes, M: int, scenario: Scenario, cfg: ObjectiveConfig = ObjectiveConfig()):
    """Evaluate a (P, 4M+N) genome batch.

    Returns ``(F, violation, f1)`` with ``F[:, 0] = -f1`` and ``F[:, 1] = f2``.
    """
    genomes = np.atleast_2d(np.asarray(genomes, dtype=np.float64))
    P = genomes.shape[0]
    points = np.ascontiguousarray(genomes[:, : 3 * M].reshape(P, M, 3))
    pc = np.ascontiguousarray(genomes[:, 3 * M: 4 * M])
    pt = np.ascontiguousarray(genomes[:, 4 * M:])
    _, tc, tdc, counts, rate_short = _timing_arrays(points, pc, pt, scenario)
    f1 = counts.sum(axis=1)
    F = np.column_stack([-f1.astype(np.float64), f2(tc, tdc, counts, cfg)])
    viol = constraint_violation(points, pc, pt, rate_short, scenario)
    return F, viol, f1


def evaluate_plan(plan: HoverPlan, scenario: Scenario,
                  cfg: ObjectiveConfig = ObjectiveConfig()) -> HoverEvaluation:
    points = plan.points[None]
    pc = plan.charge_powers[None]
    pt = plan.device_powers[None]
    assign, tc, tdc, counts, rate_short = _timing_arrays(points, pc, pt, scenario)
    viol = float(constraint_violation(points, pc, pt, rate_short, scenario)[0])
    tc, tdc, counts, assign = tc[0], tdc[0], counts[0], assign[0]
    return HoverEvaluation(
        covered_count=int(counts.sum()),
        covered_sets=[np.flatnonzero(assign == j) for j in range(plan.M)],
        per_point_charge_time=tc,
        per_point_collect_time=tdc,
        hover_times=np.maximum(tc, tdc),
        time_diffs=np.abs(tc - tdc),
        empty_point_count=int((counts == 0).sum()),
        f2=float(f2(tc, tdc, counts, cfg)),
        feasible=viol == 0.0,
        violation=viol,
        assignment=assign,
    )


def hover_timing(plan: HoverPlan, cov: Coverage, scenario: Scenario):
    """Per-point (Tc, Tdc, Th, Td, n_empty) for an explicit assignment."""
    ch = scenario.physics.charging
    cm = scenario.physics.comm
    M = plan.M
    tc = np.zeros(M)
    tdc = np.zeros(M)
    for i, j in enumerate(cov.assignment):
        if j < 0:
            continue
        q = plan.points[j]
        dx, dy = scenario.device_xy[i] - q[:2]
        d = float(np.sqrt(dx * dx + dy * dy + q[2] * q[2]))
        pr = ch.gamma / (d + ch.tau) ** 2 * plan.charge_powers[j]
        tc[j] = max(tc[j], scenario.device_energy[i] / pr)
        theta = np.degrees(np.arcsin(min(q[2] / d, 1.0)))
        p_los = 1.0 / (1.0 + cm.C * np.exp(-cm.D * (theta - cm.C)))
        gain = (p_los + (1 - p_los) * cm.kappa) * cm.beta0 * d ** (-cm.alpha)
        rate = cm.bandwidth * np.log2(1 + plan.device_powers[i] * gain / cm.noise_power)
        tdc[j] += scenario.device_data[i] / rate
    counts = np.bincount(cov.assignment[cov.assignment >= 0], minlength=M)
    return tc, tdc, np.maximum(tc, tdc), np.abs(tc - tdc), int((counts == 0).sum())


def feasibility(plan: HoverPlan, scenario: Scenario) -> tuple[bool, float]:
    ev = evaluate_plan(plan, scenario)
    return ev.feasible, ev.violation


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """Constrained Pareto dominance (minimization)."""
    if len(a.values) != len(b.values):
        raise ValueError("objective vectors differ in length")
    if a.feasible != b.feasible:
        return a.feasible
    if not a.feasible:
        return a.violation < b.violation
    le = all(x <= y for x, y in zip(a.values, b.values))
    return le and any(x < y for x, y in zip(a.values, b.values))


# -- tours ------------------------------------------------------------------

def tour_polyline(points, waypoints) -> np.ndarray:
    """Closed tour q1 -> w1.. -> q2 -> ... -> qM -> wM.. -> q1 as (M(K+1)+1, 3)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    waypoints = np.asarray(waypoints, dtype=np.float64)
    M, K = waypoints.shape[0], waypoints.shape[1]
    legs = np.concatenate([points[:, None, :], waypoints], axis=1).reshape(M * (K + 1), 3)
    return np.vstack([legs, points[:1]])


def tour_polylines(points, swarm) -> np.ndarray:
    """Batched ``tour_polyline`` over a (P, M, K, 3) swarm."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    P, M, K, _ = swarm.shape
    heads = np.broadcast_to(points[None, :, None, :], (P, M, 1, 3))
    legs = np.concatenate([heads, swarm], axis=2).reshape(P, M * (K + 1), 3)
    close = np.broadcast_to(points[None, :1, :], (P, 1, 3))
    return np.concatenate([legs, close], axis=1)


def f3(points, waypoints) -> float:
    tour = tour_polyline(points, waypoints)
    return float(np.linalg.norm(np.diff(tour, axis=0), axis=1).sum())


def f3_batch(points, swarm) -> np.ndarray:
    tours = tour_polylines(points, swarm)
    return np.linalg.norm(np.diff(tours, axis=1), axis=2).sum(axis=1)


def closed_perimeter(points) -> float:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())
