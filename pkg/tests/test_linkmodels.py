import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wpcnplan.linkmodels import (ChargingConstants, CommConstants, PowerOutOfRangeError,
                                 achievable_rate, charging_efficiency, db_to_linear, distance,
                                 dbm_to_watts, elevation_angle, expected_channel_gain,
                                 los_probability, received_power, shannon_rate)

CH = ChargingConstants()
CM = CommConstants()


@pytest.mark.parametrize("dev, pt, want", [
    ((0, 0), (0, 0, 5), 5.0),
    ((3, 4, 0), (0, 0, 12), 13.0),
    ((10, 10), (10, 10, 20), 20.0),
])
def test_distance_examples(dev, pt, want):
    assert distance(dev, pt) == pytest.approx(want, abs=1e-12)


def test_distance_rejects_negative_altitude():
    with pytest.raises(ValueError):
        distance((0, 0), (0, 0, -1))


def test_charging_efficiency_hand_values():
    assert abs(charging_efficiency(20.0, CH) - 36 / 2500) < 1e-12
    assert charging_efficiency(20.01, CH) == 0.0
    assert abs(charging_efficiency(0.0, CH) - 0.04) < 1e-12


def test_received_power_hand_values():
    assert abs(received_power(1.0, 20.0, CH) - 0.0144) < 1e-12
    assert received_power(1.0, 20.0, CH) > 5e-3
    assert abs(received_power(3.0, 20.0, CH) - 0.0432) < 1e-12
    assert received_power(2.0, 25.0, CH) == 0.0


@pytest.mark.parametrize("pc", [0.5, 3.5])
def test_received_power_range(pc):
    with pytest.raises(PowerOutOfRangeError):
        received_power(pc, 10.0, CH)


def test_elevation_angle():
    assert elevation_angle((0, 0), (0, 0, 7)) == pytest.approx(90.0)
    # z = d/2: horizontal offset sqrt(3) * z
    assert elevation_angle((0, 0), (math.sqrt(3) * 10, 0, 10)) == pytest.approx(30.0)
    assert elevation_angle((0, 0), (100, 0, 1e-9)) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ValueError):
        elevation_angle((1, 1), (1, 1, 0))


def test_los_probability_closed_forms():
    assert los_probability(CM.C, CM) == 1.0 / (1.0 + CM.C)
    assert abs(los_probability(90.0, CM) - 1.0) < 1e-12


@given(st.floats(0, 90), st.floats(0, 90))
def test_los_monotone(a, b):
    if a < b - 1e-9:
        assert los_probability(a, CM) <= los_probability(b, CM)


def test_gain_kappa_one_ignores_los():
    k = CommConstants(kappa=1.0)
    dev, pt = (0, 0), (7, 3, 12)
    d = float(distance(dev, pt))
    assert expected_channel_gain(dev, pt, k) == pytest.approx(k.beta0 * d ** -k.alpha, rel=1e-12)


def test_gain_straight_above_at_20m():
    assert expected_channel_gain((0, 0), (0, 0, 20), CM) == pytest.approx(2.5e-9, rel=1e-9)


def test_gain_decreasing_in_distance():
    # fixed elevation: scale the whole offset
    g = [expected_channel_gain((0, 0), (3 * s, 4 * s, 5 * s), CM) for s in (1, 2, 3, 4)]
    assert all(a > b for a, b in zip(g, g[1:]))


def test_rate_identities():
    assert shannon_rate(0.5, 0.0, CM) == 0.0
    assert shannon_rate(1.0, CM.noise_power, CM) == pytest.approx(CM.bandwidth, rel=1e-12)
    r = achievable_rate(0.1, (0, 0), (0, 0, 20), CM)
    assert r == pytest.approx(1e6 * math.log2(1 + 2500), rel=1e-9)
    assert r / 1e6 == pytest.approx(11.29, abs=0.01)


def test_rate_power_range():
    with pytest.raises(PowerOutOfRangeError):
        achievable_rate(2.0, (0, 0), (0, 0, 10), CM)


def test_unit_conversions():
    assert db_to_linear(-60) == pytest.approx(1e-6)
    assert dbm_to_watts(-100) == pytest.approx(1e-13)
    assert CM.beta0 == pytest.approx(1e-6)
    assert CM.noise_power == pytest.approx(1e-13)


@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0))
def test_rate_increasing_in_power(a, b):
    dev, pt = (0, 0), (10, 5, 12)
    if a < b:
        assert achievable_rate(a, dev, pt, CM) < achievable_rate(b, dev, pt, CM)


@given(st.floats(0, 100), st.floats(1.0, 3.0), st.floats(1.0, 3.0))
def test_received_power_linear_and_efficiency_nonincreasing(d, p1, p2):
    assert received_power(p1, d, CH) * p2 == pytest.approx(received_power(p2, d, CH) * p1, rel=1e-12)
    assert charging_efficiency(d + 1.0, CH) <= charging_efficiency(d, CH)


def test_outputs_finite_over_random_sweep():
    rng = np.random.default_rng(0)
    n = 1_000_000
    dev = rng.uniform(0, 500, (n, 2))
    pt = np.column_stack([rng.uniform(0, 500, (n, 2)), rng.uniform(5, 30, n)])
    pt_w = rng.uniform(0.1, 1.0, n)
    rate = achievable_rate(pt_w, dev, pt, CM)
    eff = charging_efficiency(distance(dev, pt), CH)
    assert np.all(np.isfinite(rate)) and np.all(np.isfinite(eff))


def test_constants_validation():
    with pytest.raises(ValueError):
        ChargingConstants(pc_min=4.0)
    with pytest.raises(ValueError):
        CommConstants(kappa=0.0)
    with pytest.raises(ValueError):
        CommConstants(alpha=-1.0)
