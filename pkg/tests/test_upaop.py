import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wpcnplan.objectives import HoverPlan, ObjectiveVector, dominates, evaluate_plan
from wpcnplan.scenario import GenerationParams, generate_scenario
from wpcnplan.upaop import (Individual, MoeaConfig, baseline_kmeans, baseline_rs, baseline_us,
                            crowding_distance, evolve, fast_nondominated_sort, genome_bounds,
                            grid_shape, initialize_population, kmeans_centers, repair_altitude,
                            select_solution, vary)


def brute_fronts(F, viol):
    n = len(F)
    feas = viol <= 0

    def dom(a, b):
        if feas[a] != feas[b]:
            return bool(feas[a])
        if not feas[a]:
            return viol[a] < viol[b]
        return np.all(F[a] <= F[b]) and np.any(F[a] < F[b])

    left, fronts = set(range(n)), []
    while left:
        f = sorted(i for i in left if not any(dom(j, i) for j in left if j != i))
        fronts.append(f)
        left -= set(f)
    return fronts


def test_kmeans_singletons_and_centroid(rng):
    xy = rng.uniform(0, 100, (6, 2))
    c = kmeans_centers(xy, 6, rng)
    assert sorted(map(tuple, c)) == sorted(map(tuple, xy))
    c1 = kmeans_centers(xy, 1, rng)
    np.testing.assert_allclose(c1[0], xy.mean(axis=0))


def test_kmeans_two_blobs(rng):
    a = rng.normal([50, 50], 3, (30, 2))
    b = rng.normal([400, 300], 3, (30, 2))
    xy = np.vstack([a, b])
    c = kmeans_centers(xy, 2, rng)
    # brute-force 2-means on a tiny instance: the split is the blob split
    c = c[np.argsort(c[:, 0])]
    np.testing.assert_allclose(c[0], a.mean(axis=0), atol=1e-9)
    np.testing.assert_allclose(c[1], b.mean(axis=0), atol=1e-9)


def test_kmeans_too_many_clusters(rng):
    with pytest.raises(ValueError):
        kmeans_centers(np.zeros((3, 2)), 4, rng)


def test_initialize_population(empty_field):
    cfg = MoeaConfig(n_points=5, population_size=10, seed=3)
    a = initialize_population(empty_field, cfg)
    b = initialize_population(empty_field, cfg)
    np.testing.assert_array_equal(a.X, b.X)
    assert a.X.shape == (10, 4 * 5 + empty_field.n_devices)
    assert np.all(a.violation == 0.0)


def test_initial_altitudes_repaired(one_hill):
    cfg = MoeaConfig(n_points=8, population_size=20, seed=0, kmeans_init=False)
    pop = initialize_population(one_hill, cfg)
    pts = pop.X[:, :24].reshape(-1, 3)
    h = one_hill.height(pts[:, 0], pts[:, 1])
    ok = h + 0.5 <= one_hill.bounds.d_max
    assert np.all(pts[ok, 2] >= h[ok] + 0.5 - 1e-12)


def test_repair_marks_stuck(one_hill):
    pts = np.array([[250.0, 250.0, 6.0], [0.0, 0.0, 6.0]])
    stuck = repair_altitude(pts, one_hill, 0.5)
    assert stuck.tolist() == [True, False]
    assert pts[0, 2] == one_hill.bounds.d_max and pts[1, 2] == 6.0


def test_sort_examples():
    same = np.ones((6, 2))
    assert len(fast_nondominated_sort(same)) == 1
    chain = np.array([[i, i] for i in range(5)], dtype=float)
    fronts = fast_nondominated_sort(chain[::-1])
    assert [f.tolist() for f in fronts] == [[4], [3], [2], [1], [0]]


@given(st.integers(0, 10_000), st.integers(1, 64))
def test_sort_matches_brute_force(seed, n):
    r = np.random.default_rng(seed)
    F = r.integers(0, 6, (n, 2)).astype(float)
    viol = np.where(r.random(n) < 0.3, r.integers(1, 4, n) / 4.0, 0.0)
    got = [f.tolist() for f in fast_nondominated_sort(F, viol)]
    assert got == brute_fronts(F, viol)


def test_crowding_examples():
    assert np.all(np.isinf(crowding_distance(np.array([[0.0, 1.0], [1.0, 0.0]]))))
    line = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
    cd = crowding_distance(line)
    assert np.isinf(cd[0]) and np.isinf(cd[2]) and cd[1] == pytest.approx(2.0)


@given(st.integers(0, 10_000), st.integers(3, 30))
def test_crowding_order_independent(seed, n):
    r = np.random.default_rng(seed)
    x = np.sort(r.random(n))
    F = np.column_stack([x, 1 - x])
    perm = r.permutation(n)
    np.testing.assert_array_equal(crowding_distance(F)[perm], crowding_distance(F[perm]))


def test_vary_identity_when_operators_off(empty_field, rng):
    cfg = MoeaConfig(n_points=4, crossover_prob=0.0, mutation_prob=0.0)
    lo, hi = genome_bounds(empty_field, 4)
    P = rng.uniform(lo, hi, (20, lo.size))
    np.testing.assert_array_equal(vary(P, empty_field, cfg, rng), P)


def test_vary_identical_parents_crossover_only(empty_field, rng):
    cfg = MoeaConfig(n_points=4, crossover_prob=1.0, mutation_prob=0.0)
    lo, hi = genome_bounds(empty_field, 4)
    p = rng.uniform(lo, hi, lo.size)
    P = np.tile(p, (10, 1))
    np.testing.assert_array_equal(vary(P, empty_field, cfg, rng), P)


def test_vary_stays_in_box(empty_field, rng):
    cfg = MoeaConfig(n_points=3, mutation_prob=0.5)
    lo, hi = genome_bounds(empty_field, 3)
    total = 0
    for _ in range(50):
        P = rng.uniform(lo, hi, (2000, lo.size))
        K = vary(P, empty_field, cfg, rng)
        assert np.all(K >= lo) and np.all(K <= hi)
        total += K.shape[0]
    assert total >= 100_000


def test_evolve_zero_generations(empty_field):
    cfg = MoeaConfig(n_points=4, population_size=10, max_generations=0, seed=1)
    res = evolve(empty_field, cfg)
    pop = initialize_population(empty_field, cfg)
    want = sorted(map(tuple, pop.F[pop.rank == 1]))
    assert sorted(ind.objectives.values for ind in res.front) == want


def test_evolve_front_properties(one_hill):
    cfg = MoeaConfig(n_points=5, population_size=20, max_generations=25, seed=4)
    res = evolve(one_hill, cfg)
    front = res.front
    for a, b in itertools.permutations(front, 2):
        assert not dominates(a.objectives, b.objectives)
    assert len(res.population) == 20
    assert all(np.diff(res.best_f1_trace) >= 0)
    if (res.population.violation == 0).any():
        assert all(ind.objectives.feasible for ind in front)
    again = evolve(one_hill, cfg)
    np.testing.assert_array_equal(res.population.X, again.population.X)


def test_grid_shape_and_us_layout(empty_field):
    assert grid_shape(10) == (2, 5)
    assert grid_shape(7) == (1, 7)
    us = baseline_us(empty_field, 10)
    assert sorted(set(us.points[:, 0])) == [50, 150, 250, 350, 450]
    assert sorted(set(us.points[:, 1])) == [125, 375]
    assert np.all(us.points[:, 2] == 5.0)
    assert np.all(us.charge_powers == 3.0) and np.all(us.device_powers == 1.0)


def test_rs_reproducible(empty_field):
    a = baseline_rs(empty_field, 10, np.random.default_rng(7))
    b = baseline_rs(empty_field, 10, np.random.default_rng(7))
    assert a == b


def test_kmeans_baseline_beats_rs_on_clusters():
    sc = generate_scenario(GenerationParams(n_obstacles=0, cluster_count=10, cluster_std=15.0, seed=2))
    wins = 0
    for s in range(10):
        km = evaluate_plan(baseline_kmeans(sc, 10, np.random.default_rng(s)), sc).covered_count
        rs = evaluate_plan(baseline_rs(sc, 10, np.random.default_rng(s)), sc).covered_count
        wins += km >= rs
    assert wins >= 6


def ind(f1, f2):
    return Individual(HoverPlan(np.zeros((1, 3)), [1.0], [0.1]), ObjectiveVector((-f1, f2)))


def test_select_solution():
    a, b = ind(10, 100), ind(20, 300)
    assert select_solution([a, b], "CWMS") is b
    assert select_solution([a, b], "TEMS") is a
    assert select_solution([a], "TEMS") is a and select_solution([a], "CWMS") is a
    c, d = ind(20, 250), ind(20, 300)
    assert select_solution([d, c], "CWMS") is c
    with pytest.raises(ValueError):
        select_solution([], "CWMS")
    with pytest.raises(ValueError):
        select_solution([a], "XYZ")


def test_evolve_beats_baselines_on_bundled(bundled):
    pick = select_solution(evolve(bundled, MoeaConfig(seed=0)).front, "CWMS")
    us = evaluate_plan(baseline_us(bundled, 10), bundled).covered_count
    rs = evaluate_plan(baseline_rs(bundled, 10, np.random.default_rng(0)), bundled).covered_count
    assert pick.f1 > us and pick.f1 > rs
    assert pick.objectives.feasible


def test_config_validation():
    with pytest.raises(ValueError):
        MoeaConfig(population_size=7)
    with pytest.raises(ValueError):
        MoeaConfig(crossover_prob=1.5)
