"""Problem instances: world bounds, ground devices and the Gaussian-hill field."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .energy import UavConstants
from .linkmodels import ChargingConstants, CommConstants

SCHEMA = "wpcnplan.scenario/1"


class ScenarioFormatError(ValueError):
    """Malformed or invalid scenario file."""


class SchemaVersionError(ScenarioFormatError):
    pass


class PlacementBudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class WorldBounds:
    x_min: float = 0.0
    x_max: float = 500.0
    y_min: float = 0.0
    y_max: float = 500.0
    z_min: float = 5.0
    z_max: float = 30.0
    d_max: float = 20.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("empty horizontal rectangle")
        if not 0 < self.z_min <= self.d_max <= self.z_max:
            raise ValueError("need 0 < z_min <= d_max <= z_max")

    def contains_xy(self, x, y):
        return (x >= self.x_min) & (x <= self.x_max) & (y >= self.y_min) & (y <= self.y_max)

    @property
    def hover_lo(self):
        return np.array([self.x_min, self.y_min, self.z_min])

    @property
    def hover_hi(self):
        return np.array([self.x_max, self.y_max, self.d_max])

    @property
    def flight_lo(self):
        return np.array([self.x_min, self.y_min, self.z_min])

    @property
    def flight_hi(self):
        return np.array([self.x_max, self.y_max, self.z_max])


@dataclass(frozen=True)
class Obstacle:
    center_x: float
    center_y: float
    height: float
    slope_x: float
    slope_y: float

    def __post_init__(self):
        if not (self.height > 0 and self.slope_x > 0 and self.slope_y > 0):
            raise ValueError("obstacle height and slopes must be positive")


@dataclass(frozen=True)
class WirelessDevice:
    x: float
    y: float
    required_energy: float = 10.0
    data_size: float = 100e6

    def __post_init__(self):
        if not (self.required_energy > 0 and self.data_size > 0):
            raise ValueError("device energy and data size must be positive")


@dataclass(frozen=True)
class PhysicsConstants:
    charging: ChargingConstants = field(default_factory=ChargingConstants)
    comm: CommConstants = field(default_factory=CommConstants)
    uav: UavConstants = field(default_factory=UavConstants)


def obstacle_array(obstacles: Sequence[Obstacle]) -> np.ndarray:
    if len(obstacles) == 0:
        return np.zeros((0, 5))
    return np.array([[o.center_x, o.center_y, o.height, o.slope_x, o.slope_y] for o in obstacles],
                    dtype=np.float64)


def _as_field(obstacles) -> np.ndarray:
    if isinstance(obstacles, np.ndarray):
        return obstacles
    return obstacle_array(list(obstacles))


def obstacle_height(obstacles, x, y):
    """Sum of Gaussian hills at (x, y); accepts Obstacle lists or an (G, 5) array."""
    out = kernels.obstacle_height(_as_field(obstacles), np.asarray(x, float), np.asarray(y, float))
    return float(out) if np.ndim(out) == 0 else out


def is_ground_clear(obstacles, x, y, epsilon: float = 0.5):
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return obstacle_height(obstacles, x, y) < epsilon


def field_peak(obs: np.ndarray, bounds: WorldBounds) -> float:
    """Maximum of the obstacle field over the horizontal rectangle."""
    if obs.shape[0] == 0:
        return 0.0
    gx = np.linspace(bounds.x_min, bounds.x_max, 201)
    gy = np.linspace(bounds.y_min, bounds.y_max, 201)
    X, Y = np.meshgrid(gx, gy)
    H = kernels.obstacle_height(obs, X.ravel(), Y.ravel())
    starts = [np.array([X.ravel()[np.argmax(H)], Y.ravel()[np.argmax(H)]])]
    starts += [obs[m, :2].copy() for m in range(obs.shape[0])]
    lo = np.array([bounds.x_min, bounds.y_min])
    hi = np.array([bounds.x_max, bounds.y_max])
    best = float(H.max())

    def neg(p):
        q = np.clip(p, lo, hi)
        return -float(kernels.obstacle_height(obs, q[:1], q[1:])[0])

    for s in starts:
        res = minimize(neg, s, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-9})
        best = max(best, -float(res.fun))
    return best


@dataclass(frozen=True)
class Scenario:
    bounds: WorldBounds
    devices: tuple[WirelessDevice, ...]
    obstacles: tuple[Obstacle, ...]
    physics: PhysicsConstants = field(default_factory=PhysicsConstants)
    rng_seed: int = 0
    clearance: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if len(self.devices) < 1:
            raise ValueError("scenario needs at least one device")
        if self.clearance <= 0:
            raise ValueError("clearance must be positive")
        if self.physics.charging.d_max != self.bounds.d_max:
            raise ValueError("charging d_max must equal bounds d_max")
        xy = self.device_xy
        if not np.all(self.bounds.contains_xy(xy[:, 0], xy[:, 1])):
            raise ValueError("device outside world bounds")
        if not np.all(is_ground_clear(self.obstacle_array, xy[:, 0], xy[:, 1], self.clearance)):
            raise ValueError("device placed on an obstacle")
        peak = field_peak(self.obstacle_array, self.bounds)
        if peak >= self.bounds.z_max:
            raise ValueError(f"obstacle field peak {peak:.2f} m reaches z_max {self.bounds.z_max} m")

    @property
    def n_devices(self) -> int:
        return len(self.devices)

    @cached_property
    def device_xy(self) -> np.ndarray:
        return np.array([[d.x, d.y] for d in self.devices], dtype=np.float64)

    @cached_property
    def device_energy(self) -> np.ndarray:
        return np.array([d.required_energy for d in self.devices], dtype=np.float64)

    @cached_property
    def device_data(self) -> np.ndarray:
        return np.array([d.data_size for d in self.devices], dtype=np.float64)

    @cached_property
    def obstacle_array(self) -> np.ndarray:
        return obstacle_array(self.obstacles)

    def height(self, x, y):
        return kernels.obstacle_height(self.obstacle_array, np.asarray(x, float), np.asarray(y, float))


@dataclass(frozen=True)
class GenerationParams:
    n_devices: int = 500
    n_obstacles: int = 3
    seed: int = 0
    bounds: WorldBounds = field(default_factory=WorldBounds)
    physics: PhysicsConstants = field(default_factory=PhysicsConstants)
    clearance: float = 0.5
    obstacle_height_range: tuple[float, float] = (20.0, 27.0)
    obstacle_slope_range: tuple[float, float] = (30.0, 60.0)
    required_energy: float = 10.0
    data_size: float = 100e6
    # 0 clusters = uniform placement
    cluster_count: int = 0
    cluster_std: float = 25.0
    max_rejections: int = 200_000
    obstacles: tuple[Obstacle, ...] | None = None


def _draw_obstacles(p: GenerationParams, rng: np.random.Generator) -> list[Obstacle]:
    b = p.bounds
    for _ in range(100):
        obs = []
        for _ in range(p.n_obstacles):
            sx, sy = rng.uniform(*p.obstacle_slope_range, size=2)
            cx = rng.uniform(b.x_min + sx, b.x_max - sx)
            cy = rng.uniform(b.y_min + sy, b.y_max - sy)
            h = rng.uniform(*p.obstacle_height_range)
            obs.append(Obstacle(float(cx), float(cy), float(h), float(sx), float(sy)))
        if field_peak(obstacle_array(obs), b) < b.z_max - 1.0:
            return obs
    raise PlacementBudgetExhausted("could not draw obstacles below z_max")


def _candidates(p: GenerationParams, rng, centers, n):
    b = p.bounds
    if centers is None:
        x = rng.uniform(b.x_min, b.x_max, size=n)
        y = rng.uniform(b.y_min, b.y_max, size=n)
    else:
        pick = rng.integers(0, len(centers), size=n)
        x = centers[pick, 0] + rng.normal(0.0, p.cluster_std, size=n)
        y = centers[pick, 1] + rng.normal(0.0, p.cluster_std, size=n)
    return x, y


def generate_scenario(p: GenerationParams) -> Scenario:
    if p.n_devices < 1:
        raise ValueError("n_devices must be >= 1")
    if p.n_obstacles < 0:
        raise ValueError("n_obstacles must be >= 0")
    rng = np.random.default_rng(p.seed)
    b = p.bounds
    obstacles = list(p.obstacles) if p.obstacles is not None else _draw_obstacles(p, rng)
    obs = obstacle_array(obstacles)
    centers = None
    if p.cluster_count > 0:
        centers = np.column_stack([rng.uniform(b.x_min, b.x_max, p.cluster_count),
                                   rng.uniform(b.y_min, b.y_max, p.cluster_count)])

    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    have = 0
    rejected = 0
    while have < p.n_devices:
        need = p.n_devices - have
        x, y = _candidates(p, rng, centers, need)
        ok = b.contains_xy(x, y) & (kernels.obstacle_height(obs, x, y) < p.clearance)
        rejected += int((~ok).sum())
        if rejected > p.max_rejections:
            raise PlacementBudgetExhausted(
                f"placed {have}/{p.n_devices} devices before {p.max_rejections} rejections")
        xs.append(x[ok])
        ys.append(y[ok])
        have += int(ok.sum())
    x = np.concatenate(xs)[: p.n_devices]
    y = np.concatenate(ys)[: p.n_devices]
    devices = tuple(WirelessDevice(float(a), float(c), p.required_energy, p.data_size)
                    for a, c in zip(x, y))
    return Scenario(b, devices, tuple(obstacles), p.physics, p.seed, p.clearance)


# -- serialization ----------------------------------------------------------

def _physics_to_dict(ph: PhysicsConstants) -> dict:
    comm = {f.name: getattr(ph.comm, f.name) for f in fields(ph.comm) if f.init}
    return {"charging": asdict(ph.charging), "comm": comm, "uav": asdict(ph.uav)}


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "schema": SCHEMA,
        "rng_seed": s.rng_seed,
        "clearance": s.clearance,
        "bounds": asdict(s.bounds),
        "physics": _physics_to_dict(s.physics),
        "obstacles": [asdict(o) for o in s.obstacles],
        "devices": [asdict(d) for d in s.devices],
    }


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ScenarioFormatError(f"{path}: expected an object")
    names = {f.name for f in fields(cls) if f.init}
    unknown = set(data) - names
    if unknown:
        raise ScenarioFormatError(f"{path}: unknown field(s) {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from None


def _require(data, key, path):
    if key not in data:
        raise ScenarioFormatError(f"{path}: missing field '{key}'")
    return data[key]


def physics_from_dict(d: dict, path: str = "physics") -> PhysicsConstants:
    return PhysicsConstants(
        charging=_build(ChargingConstants, _require(d, "charging", path), f"{path}.charging"),
        comm=_build(CommConstants, _require(d, "comm", path), f"{path}.comm"),
        uav=_build(UavConstants, _require(d, "uav", path), f"{path}.uav"),
    )


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioFormatError("top level must be an object")
    schema = _require(d, "schema", "scenario")
    if schema != SCHEMA:
        raise SchemaVersionError(f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    bounds = _build(WorldBounds, _require(d, "bounds", "scenario"), "bounds")
    physics = physics_from_dict(_require(d, "physics", "scenario"))
    obstacles = [_build(Obstacle, o, f"obstacles[{i}]")
                 for i, o in enumerate(_require(d, "obstacles", "scenario"))]
    devices = [_build(WirelessDevice, o, f"devices[{i}]")
               for i, o in enumerate(_require(d, "devices", "scenario"))]
    try:
        return Scenario(bounds, tuple(devices), tuple(obstacles), physics,
                        int(_require(d, "rng_seed", "scenario")),
                        float(_require(d, "clearance", "scenario")))
    except ValueError as exc:
        raise ScenarioFormatError(f"scenario: {exc}") from None


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1) + "\n"


def loads_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path) -> Path:
    path = Path(path)
    path.write_text(dumps_scenario(s))
    return path


def load_scenario(path) -> Scenario:
    return loads_scenario(Path(path).read_text())


def bundled_scenario() -> Scenario:
    """The desk-scale instance shipped with the package (500 devices, 3 hills)."""
    return load_scenario(Path(__file__).parent / "data" / "scenario_small.json")
