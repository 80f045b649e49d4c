"""Radio-side physics: geometry, WPT charging and the probabilistic-LoS uplink.

All functions broadcast over numpy arrays. Powers are in watts, distances in
meters, and every constant is stored in linear units (dB inputs are
converted once when the constants object is built).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PowerOutOfRangeError(ValueError):
    pass


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ChargingConstants:
    gamma: float = 36.0
    tau: float = 30.0
    d_max: float = 20.0
    pc_min: float = 1.0
    pc_max: float = 3.0

    def __post_init__(self):
        if not (self.gamma > 0 and self.tau > 0 and self.d_max > 0):
            raise ValueError("gamma, tau and d_max must be positive")
        if not 0 < self.pc_min <= self.pc_max:
            raise ValueError("need 0 < pc_min <= pc_max")


@dataclass(frozen=True)
class CommConstants:
    """Uplink constants. ``beta0_db`` and ``noise_dbm`` are the stored fields;
    ``beta0`` and ``noise_power`` are their linear forms."""

    beta0_db: float = -60.0
    alpha: float = 2.0
    kappa: float = 0.2
    C: float = 10.0
    D: float = 0.6
    bandwidth: float = 1e6
    noise_dbm: float = -100.0
    rate_threshold: float = 0.5e6
    pt_min: float = 0.1
    pt_max: float = 1.0
    beta0: float = field(init=False, repr=False, compare=False)
    noise_power: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "beta0", db_to_linear(self.beta0_db))
        object.__setattr__(self, "noise_power", dbm_to_watts(self.noise_dbm))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if not 0 < self.pt_min <= self.pt_max:
            raise ValueError("need 0 < pt_min <= pt_max")


def _split(device, point):
    dev = np.asarray(device, dtype=np.float64)
    pt = np.asarray(point, dtype=np.float64)
    return dev[..., 0], dev[..., 1], pt[..., 0], pt[..., 1], pt[..., 2]


def distance(device, point):
    """3D distance from a ground device (altitude 0) to ``point``.

    ``device`` may carry a third coordinate; it is ignored.
    """
    X, Y, x, y, z = _split(device, point)
    if np.any(z < 0):
        raise ValueError("point altitude must be nonnegative")
    return np.sqrt((X - x) ** 2 + (Y - y) ** 2 + z ** 2)


def charging_efficiency(d, k: ChargingConstants):
    d = np.asarray(d, dtype=np.float64)
    return np.where(d <= k.d_max, k.gamma / (d + k.tau) ** 2, 0.0)


def _check_range(value, lo, hi, name):
    v = np.asarray(value, dtype=np.float64)
    if np.any(v < lo) or np.any(v > hi):
        raise PowerOutOfRangeError(f"{name} outside [{lo}, {hi}] W")
    return v


def received_power(pc, d, k: ChargingConstants):
    pc = _check_range(pc, k.pc_min, k.pc_max, "charging power")
    return charging_efficiency(d, k) * pc


def elevation_angle(device, point):
    d = distance(device, point)
    if np.any(d <= 0):
        raise ValueError("elevation angle undefined for coincident points")
    z = np.asarray(point, dtype=np.float64)[..., 2]
    return np.degrees(np.arcsin(np.clip(z / d, 0.0, 1.0)))


def los_probability(theta, k: CommConstants):
    theta = np.asarray(theta, dtype=np.float64)
    return 1.0 / (1.0 + k.C * np.exp(-k.D * (theta - k.C)))


def expected_channel_gain(device, point, k: CommConstants):
    d = distance(device, point)
    p_los = los_probability(elevation_angle(device, point), k)
    path = k.beta0 * d ** (-k.alpha)
    return p_los * path + (1.0 - p_los) * k.kappa * path


def shannon_rate(pt, gain, k: CommConstants):
    return k.bandwidth * np.log2(1.0 + np.asarray(pt) * np.asarray(gain) / k.noise_power)


def achievable_rate(pt, device, point, k: CommConstants):
    pt = _check_range(pt, k.pt_min, k.pt_max, "device transmit power")
    return shannon_rate(pt, expected_channel_gain(device, point, k), k)
