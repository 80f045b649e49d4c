"""Rotary-wing propulsion power and 3D flight energy."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import minimize_scalar


@dataclass(frozen=True)
class UavConstants:
    # Reference rotary-wing set (blade/induced hover power, rotor geometry).
    p_blade: float = 79.86
    p_induced: float = 88.63
    tip_speed: float = 120.0
    hover_induced_speed: float = 4.03
    drag_ratio: float = 0.6
    air_density: float = 1.225
    rotor_solidity: float = 0.05
    rotor_disk_area: float = 0.503
    mass: float = 2.0
    gravity: float = 9.8
    # None means "fly at the minimum-power speed".
    cruise_speed: float | None = None
    v_search_max: float = 30.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            # zero drag is allowed (parasite-free test rotors)
            if v < 0 or (v == 0 and f.name != "drag_ratio"):
                raise ValueError(f"{f.name} must be positive, got {v}")


def propulsion_power(v, k: UavConstants):
    """Level-flight power draw at horizontal speed ``v`` (W)."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("speed must be nonnegative")
    blade = k.p_blade * (1.0 + 3.0 * v ** 2 / k.tip_speed ** 2)
    a = v ** 2 / (2.0 * k.hover_induced_speed ** 2)
    # sqrt(1+a^2) - a, rewritten to avoid cancellation at high speed
    induced = k.p_induced * np.sqrt(1.0 / (np.sqrt(1.0 + a * a) + a))
    parasite = 0.5 * k.drag_ratio * k.air_density * k.rotor_solidity * k.rotor_disk_area * v ** 3
    return blade + induced + parasite


def min_power_speed(k: UavConstants, xatol: float = 1e-4) -> float:
    res = minimize_scalar(
        lambda v: float(propulsion_power(v, k)),
        bounds=(0.0, k.v_search_max),
        method="bounded",
        options={"xatol": xatol},
    )
    return float(res.x)


def cruise_speed(k: UavConstants) -> float:
    return k.cruise_speed if k.cruise_speed is not None else min_power_speed(k)


def path_length(path) -> float:
    path = np.asarray(path, dtype=np.float64)
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def flight_energy(path, k: UavConstants, speed: float | None = None) -> float:
    """Energy (J) to fly ``path`` at constant speed: propulsion plus net climb.

    Speed is constant, so the kinetic term of the 3D model is zero.
    """
    path = np.asarray(path, dtype=np.float64)
    if path.ndim != 2 or path.shape[0] < 2 or path.shape[1] != 3:
        raise ValueError("path must be an (L>=2, 3) array")
    v = cruise_speed(k) if speed is None else speed
    if v <= 0:
        raise ValueError("cruise speed must be positive")
    length = path_length(path)
    work = float(propulsion_power(v, k)) * length / v
    return work + k.mass * k.gravity * (path[-1, 2] - path[0, 2])


def hover_energy(hover_times, k: UavConstants) -> float:
    return float(np.sum(hover_times)) * float(propulsion_power(0.0, k))


__all__ = [
    "UavConstants",
    "propulsion_power",
    "min_power_speed",
    "cruise_speed",
    "flight_energy",
    "hover_energy",
    "path_length",
]

