import numpy as np
import pytest
from hypothesis import given, strategies as st

from wpcnplan.energy import (UavConstants, cruise_speed, flight_energy, hover_energy,
                             min_power_speed, propulsion_power)

K = UavConstants()


def test_hover_limit():
    assert propulsion_power(0.0, K) == K.p_blade + K.p_induced


def test_min_power_speed_reference_set():
    v = min_power_speed(K)
    assert abs(v - 10.2) <= 0.5
    assert propulsion_power(v - 0.1, K) >= propulsion_power(v, K)
    assert propulsion_power(v + 0.1, K) >= propulsion_power(v, K)


def test_min_power_speed_matches_grid_sweep():
    grid = np.arange(0.0, K.v_search_max + 1e-9, 0.01)
    v_grid = grid[np.argmin(propulsion_power(grid, K))]
    assert abs(min_power_speed(K) - v_grid) <= 0.02


def test_min_power_speed_parasite_free():
    k = UavConstants(drag_ratio=0.0, p_induced=1e5)
    grid = np.arange(0.0, k.v_search_max + 1e-9, 0.01)
    v_grid = grid[np.argmin(propulsion_power(grid, k))]
    v = min_power_speed(k)
    assert abs(v - v_grid) <= 0.02
    assert v > 20.0


def test_cubic_asymptote():
    ratio = propulsion_power(2000.0, K) / propulsion_power(1000.0, K)
    assert ratio == pytest.approx(8.0, rel=0.01)


@given(st.floats(0, 200))
def test_power_positive(v):
    assert propulsion_power(v, K) > 0


def test_negative_speed_rejected():
    with pytest.raises(ValueError):
        propulsion_power(-1.0, K)


def test_closed_tour_energy_is_level_term():
    v = cruise_speed(K)
    tour = np.array([[0, 0, 10], [100, 0, 12], [100, 100, 8], [0, 0, 10]], dtype=float)
    L = np.linalg.norm(np.diff(tour, axis=0), axis=1).sum()
    assert flight_energy(tour, K) == pytest.approx(propulsion_power(v, K) * L / v, rel=1e-12)


def test_climb_adds_potential_energy():
    level = flight_energy(np.array([[0, 0, 10.0], [0, 10, 10.0]]), K, speed=10.0)
    climb = flight_energy(np.array([[0, 0, 0.0], [0, 0, 10.0]]), K, speed=10.0)
    assert climb - level == pytest.approx(196.0, abs=1e-9)


def test_doubling_length_doubles_level_term():
    a = flight_energy(np.array([[0, 0, 5.0], [50, 0, 5.0]]), K)
    b = flight_energy(np.array([[0, 0, 5.0], [100, 0, 5.0]]), K)
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_degenerate_path_zero_energy():
    assert flight_energy(np.zeros((3, 3)), K) == 0.0


@given(st.lists(st.tuples(st.floats(0, 500), st.floats(0, 500), st.floats(5, 30)),
                min_size=3, max_size=8), st.integers(1, 6))
def test_energy_telescopes_over_segments(pts, cut):
    path = np.array(pts)
    cut = min(cut, len(pts) - 2)
    whole = flight_energy(path, K, speed=10.0)
    parts = flight_energy(path[: cut + 1], K, speed=10.0) + flight_energy(path[cut:], K, speed=10.0)
    assert whole == pytest.approx(parts, rel=1e-9, abs=1e-6)


def test_hover_energy():
    assert hover_energy([10.0, 5.0], K) == pytest.approx(15.0 * (K.p_blade + K.p_induced))


def test_constants_validation():
    with pytest.raises(ValueError):
        UavConstants(mass=0.0)
    assert UavConstants(cruise_speed=12.0).cruise_speed == 12.0
    assert cruise_speed(UavConstants(cruise_speed=12.0)) == 12.0
