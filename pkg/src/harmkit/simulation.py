"""Deterministic scene generation: ego kinematics, object spawning, frames.

A scenario is a seeded script: the ego follows speed/steering waypoints
under a bicycle model while objects (scripted or census-drawn) sit or move
around the map. Every sample_period seconds a frame is emitted with the
objects that fall inside the forward field of view, each labeled against
the danger zone of that instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from .classification import (Category, Distribution, HarmLabel, Polygon2D,
                             SceneObject, convex_intersection, footprint,
                             in_front_fov, label_objects)
from .errors import ConfigError, GenerationError, InvalidInputError
from .geometry import (DEFAULT_CAMERA_HEIGHT_M, DEFAULT_WHEELBASE_M, EgoState,
                       Pose, ZoneParams, camera_extrinsic, canonical_float,
                       heading_vector, pose_matrix)

DEFAULT_SAMPLE_PERIOD_S = 0.3
DEFAULT_ACCEL_LIMIT = 3.0  # m/s^2 bound when tracking target speed
_SPAWN_RETRIES = 100

# Out-of-distribution static props; order is part of the public contract.
_OOD_ROSTER = (
    "barrel",
    "mailbox",
    "construction cone",
    "container",
    "cloth container",
    "advertisement",
    "hay bale",
    "shopping bag",
    "map table",
    "cardboard box",
    "newspaper box",
)

# (length, width, height) defaults per kind; fallbacks per category below.
_KIND_DIMS = {
    "car": (4.5, 2.0, 1.6),
    "person": (0.6, 0.6, 1.8),
    "barrel": (0.6, 0.6, 0.9),
    "mailbox": (0.4, 0.4, 1.1),
    "construction cone": (0.4, 0.4, 0.7),
    "container": (6.0, 2.4, 2.6),
    "cloth container": (1.2, 1.2, 1.8),
    "advertisement": (1.0, 0.4, 2.2),
    "hay bale": (1.2, 0.9, 0.9),
    "shopping bag": (0.4, 0.3, 0.4),
    "map table": (1.5, 0.8, 1.1),
    "cardboard box": (0.6, 0.5, 0.5),
    "newspaper box": (0.5, 0.5, 1.2),
    "pole": (0.3, 0.3, 3.0),
    "bench": (1.8, 0.7, 0.9),
    "hydrant": (0.4, 0.4, 0.8),
    "tree": (0.8, 0.8, 5.0),
    "trash can": (0.6, 0.6, 1.0),
}
_CATEGORY_DIMS = {
    Category.VEHICLE: (4.5, 2.0, 1.6),
    Category.PEDESTRIAN: (0.6, 0.6, 1.8),
    Category.STATIC: (1.0, 1.0, 1.0),
}
_ID_STATIC_KINDS = ("pole", "bench", "hydrant", "tree", "trash can")


def ood_roster() -> tuple[str, ...]:
    """The 11 out-of-distribution object kinds, in stable order."""
    return _OOD_ROSTER


@dataclass(frozen=True)
class Waypoint:
    """Ego script entry: from `time` on, track this speed and steering."""

    time: float
    target_speed: float
    steering_angle: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "time", canonical_float(self.time))
        object.__setattr__(self, "target_speed", canonical_float(self.target_speed))
        object.__setattr__(self, "steering_angle", canonical_float(self.steering_angle))
        if self.time < 0:
            raise InvalidInputError("waypoint time must be >= 0")
        if self.target_speed < 0:
            raise InvalidInputError("waypoint target_speed must be >= 0")


@dataclass(frozen=True)
class CensusEntry:
    """Requested object count for one (category, kind, distribution) cell.

    An empty kind means: draw from the OOD roster (OOD entries) or from a
    small in-distribution kind pool (ID entries).
    """

    category: Category
    distribution: Distribution
    count: int
    kind: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if self.count < 0:
            raise InvalidInputError("census count must be >= 0")
        if self.distribution is Distribution.OOD:
            if self.category is not Category.STATIC:
                raise InvalidInputError("OOD census entries must be static objects")
            if self.kind and self.kind not in _OOD_ROSTER:
                raise InvalidInputError(
                    f"OOD kind {self.kind!r} is not in the roster")


@dataclass(frozen=True)
class ScriptedObject:
    """Exact object placement, optionally moving in a straight line."""

    id: str
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float
    category: Category
    distribution: Distribution
    kind: str
    speed: float = 0.0
    heading: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if self.speed < 0:
            raise InvalidInputError("scripted object speed must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int
    duration: float
    sample_period: float = DEFAULT_SAMPLE_PERIOD_S
    map_extent: tuple[float, float] = (80.0, 120.0)
    census: tuple[CensusEntry, ...] = ()
    ego_script: tuple[Waypoint, ...] = (Waypoint(0.0, 5.0, 0.0),)
    weather_tag: str = ""
    fov_deg: float = 90.0
    wheelbase: float = DEFAULT_WHEELBASE_M
    objects: tuple[ScriptedObject, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "census", tuple(self.census))
        object.__setattr__(self, "ego_script", tuple(self.ego_script))
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "map_extent",
                           tuple(float(v) for v in self.map_extent))
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidInputError("seed must be a non-negative integer")
        if self.duration <= 0:
            raise InvalidInputError("duration must be > 0")
        if self.sample_period <= 0:
            raise InvalidInputError("sample_period must be > 0")
        if len(self.map_extent) != 2 or any(v <= 0 for v in self.map_extent):
            raise InvalidInputError("map_extent must be two positive lengths")
        if not self.ego_script:
            raise InvalidInputError("ego_script needs at least one waypoint")
        if not 0.0 < self.fov_deg < 180.0:
            raise InvalidInputError("fov_deg must be in (0, 180)")
        times = [w.time for w in self.ego_script]
        if times != sorted(times):
            raise InvalidInputError("ego_script waypoints must be time-ordered")
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise InvalidInputError("scripted object ids must be unique")

    @property
    def fov_rad(self) -> float:
        return math.radians(self.fov_deg)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioSpec":
        try:
            return _spec_from_dict(raw)
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc

    @classmethod
    def from_toml(cls, path: str | Path) -> "ScenarioSpec":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(raw)


def _spec_from_dict(raw: dict) -> ScenarioSpec:
    scen = dict(raw.get("scenario", {}))
    known = {"seed", "duration", "sample_period", "map_extent", "weather_tag",
             "fov_deg", "wheelbase"}
    unknown = set(scen) - known
    if unknown:
        raise ConfigError(f"unknown scenario key(s): {sorted(unknown)}")
    waypoints = tuple(
        Waypoint(w["time"], w["target_speed"], w.get("steering_angle", 0.0))
        for w in raw.get("ego_script", []))
    census = tuple(
        CensusEntry(category=c["category"], distribution=c["distribution"],
                    count=c["count"], kind=c.get("kind", ""))
        for c in raw.get("census", []))
    objects = tuple(
        ScriptedObject(
            id=o["id"], center=tuple(o["center"]), dims=tuple(o["dims"]),
            yaw=o.get("yaw", 0.0), category=o["category"],
            distribution=o["distribution"], kind=o["kind"],
            speed=o.get("speed", 0.0), heading=o.get("heading", 0.0))
        for o in raw.get("objects", []))
    kwargs = dict(scen)
    if "map_extent" in kwargs:
        kwargs["map_extent"] = tuple(kwargs["map_extent"])
    if waypoints:
        kwargs["ego_script"] = waypoints
    return ScenarioSpec(census=census, objects=objects, **kwargs)


def _matrix_tuple(m: np.ndarray) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(canonical_float(v) for v in row) for row in m)


@dataclass(frozen=True)
class Frame:
    """One labeled snapshot of the scene.

    Objects are world-frame, already FOV-filtered and labeled. The two
    transform matrices are derived from the pose and camera height; they are
    stored (canonically rounded) so records carry them explicitly.
    """

    index: int
    timestamp: float
    ego: EgoState
    objects: tuple[SceneObject, ...]
    fov: float
    cam_height: float = DEFAULT_CAMERA_HEIGHT_M
    ego_to_world: tuple[tuple[float, ...], ...] | None = None
    ego_to_cam: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", canonical_float(self.timestamp))
        object.__setattr__(self, "fov", canonical_float(self.fov))
        object.__setattr__(self, "cam_height", canonical_float(self.cam_height))
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.index < 0:
            raise InvalidInputError("frame index must be >= 0")
        if not 0.0 < self.fov < math.pi:
            raise InvalidInputError("frame fov must be in (0, pi) radians")
        if self.cam_height <= 0:
            raise InvalidInputError("cam_height must be > 0")
        expected_world = _matrix_tuple(pose_matrix(self.ego.pose))
        expected_cam = _matrix_tuple(camera_extrinsic((0.0, 0.0, self.cam_height)))
        if self.ego_to_world is None:
            object.__setattr__(self, "ego_to_world", expected_world)
        elif not np.allclose(self.ego_to_world, expected_world, atol=1e-6):
            raise InvalidInputError(
                f"frame {self.index}: ego_to_world disagrees with the ego pose")
        if self.ego_to_cam is None:
            object.__setattr__(self, "ego_to_cam", expected_cam)
        elif not np.allclose(self.ego_to_cam, expected_cam, atol=1e-6):
            raise InvalidInputError(
                f"frame {self.index}: ego_to_cam disagrees with cam_height")
        for obj in self.objects:
            if obj.label is None:
                raise InvalidInputError(
                    f"frame {self.index}: object {obj.id} has no label")
            if not in_front_fov(obj, self.ego, self.fov):
                raise InvalidInputError(
                    f"frame {self.index}: object {obj.id} is outside the FOV")


def kinematic_step(ego: EgoState, dt: float, target_speed: float, steer: float,
                   accel_limit: float = DEFAULT_ACCEL_LIMIT) -> EgoState:
    """Advance the ego one step under a bicycle model.

    Displacement and yaw rate use the pre-step speed and heading, so a
    standing vehicle stays put whatever the steering; the speed then moves
    toward target_speed, bounded by accel_limit.
    """
    if dt <= 0:
        raise InvalidInputError("dt must be > 0")
    if target_speed < 0:
        raise InvalidInputError("target_speed must be >= 0")
    pose = ego.pose
    yaw2 = pose.yaw + (ego.speed / ego.wheelbase) * math.tan(steer) * dt
    x2 = pose.x + ego.speed * dt * math.sin(pose.yaw)
    y2 = pose.y + ego.speed * dt * math.cos(pose.yaw)
    dv = max(-accel_limit * dt, min(accel_limit * dt, target_speed - ego.speed))
    return EgoState(speed=ego.speed + dv, steering_angle=steer,
                    pose=Pose(x2, y2, yaw2), wheelbase=ego.wheelbase,
                    max_steering=ego.max_steering)


class _SimObject:
    """Mutable simulation state behind one SceneObject."""

    def __init__(self, oid, center, dims, yaw, category, distribution, kind,
                 speed=0.0, heading=0.0, walk_sigma=0.0):
        self.id = oid
        self.pos = np.array([center[0], center[1]], dtype=float)
        self.z = float(center[2])
        self.dims = dims
        self.yaw = float(yaw)
        self.category = category
        self.distribution = distribution
        self.kind = kind
        self.speed = float(speed)
        self.heading = float(heading)
        self.walk_sigma = float(walk_sigma)

    def snapshot(self) -> SceneObject:
        return SceneObject(
            id=self.id,
            center=(float(self.pos[0]), float(self.pos[1]), self.z),
            dims=self.dims, yaw=self.yaw,
            category=self.category, distribution=self.distribution,
            kind=self.kind)

    def step(self, dt: float, rng: np.random.Generator) -> None:
        if self.walk_sigma > 0:
            # pedestrians meander; one draw per object per step
            self.heading += float(rng.normal(0.0, self.walk_sigma))
        if self.speed == 0.0:
            return
        self.pos += self.speed * dt * heading_vector(self.heading)
        self.yaw = self.heading


def _default_kind(category: Category, distribution: Distribution,
                  rng: np.random.Generator) -> str:
    if distribution is Distribution.OOD:
        return _OOD_ROSTER[int(rng.integers(len(_OOD_ROSTER)))]
    if category is Category.VEHICLE:
        return "car"
    if category is Category.PEDESTRIAN:
        return "person"
    return _ID_STATIC_KINDS[int(rng.integers(len(_ID_STATIC_KINDS)))]


def _dims_for(kind: str, category: Category) -> tuple[float, float, float]:
    return _KIND_DIMS.get(kind, _CATEGORY_DIMS[category])


def _overlaps_any(candidate: Polygon2D, placed: list[Polygon2D]) -> bool:
    return any(convex_intersection(candidate, other) is not None
               for other in placed)


def _spawn_objects(spec: ScenarioSpec, rng: np.random.Generator) -> list[_SimObject]:
    sims: list[_SimObject] = []
    placed: list[Polygon2D] = []

    for so in spec.objects:
        sim = _SimObject(so.id, so.center, so.dims, so.yaw, so.category,
                         so.distribution, so.kind, so.speed, so.heading)
        fp = footprint(sim.snapshot())
        if _overlaps_any(fp, placed):
            raise GenerationError(
                f"scripted object {so.id} overlaps an earlier object "
                f"(seed {spec.seed})", seed=spec.seed)
        placed.append(fp)
        sims.append(sim)

    width, depth = spec.map_extent
    counter = 0
    for entry in spec.census:
        for _ in range(entry.count):
            for attempt in range(_SPAWN_RETRIES + 1):
                kind = entry.kind or _default_kind(entry.category,
                                                   entry.distribution, rng)
                dims = _dims_for(kind, entry.category)
                x = float(rng.uniform(-width / 2.0, width / 2.0))
                y = float(rng.uniform(2.0, depth))
                yaw = float(rng.uniform(0.0, 2.0 * math.pi))
                speed = 0.0
                heading = yaw
                walk_sigma = 0.0
                if entry.category is Category.VEHICLE:
                    speed = float(rng.uniform(2.0, 8.0))
                elif entry.category is Category.PEDESTRIAN:
                    speed = float(rng.uniform(0.4, 1.4))
                    walk_sigma = 0.4
                counter += 1
                oid = f"{kind.replace(' ', '_')}_{counter:03d}"
                sim = _SimObject(oid, (x, y, 0.0), dims, yaw, entry.category,
                                 entry.distribution, kind, speed, heading,
                                 walk_sigma)
                fp = footprint(sim.snapshot())
                if not _overlaps_any(fp, placed):
                    placed.append(fp)
                    sims.append(sim)
                    break
            else:
                raise GenerationError(
                    f"could not place a {entry.category.value} after "
                    f"{_SPAWN_RETRIES} retries (seed {spec.seed})",
                    seed=spec.seed)
    return sims


def _waypoint_at(script: Sequence[Waypoint], t: float) -> Waypoint:
    active = script[0]
    for wp in script:
        if wp.time <= t + 1e-9:
            active = wp
        else:
            break
    return active


def generate_scenario(spec: ScenarioSpec,
                      zone_params: ZoneParams | None = None) -> tuple[Frame, ...]:
    """Run a scenario and return its labeled frames.

    Bit-deterministic in `spec` (same seed, same frames). Objects are
    snapshotted every sample_period; only those inside the forward FOV make
    it into a frame, each labeled against that instant's danger zone.
    """
    params = zone_params if zone_params is not None else ZoneParams()
    rng = np.random.default_rng(spec.seed)
    sims = _spawn_objects(spec, rng)

    n_frames = int(spec.duration / spec.sample_period + 1e-9)
    period = spec.sample_period
    # the frame stores the rounded fov, so filter with the same value
    fov = canonical_float(spec.fov_rad)
    first = spec.ego_script[0]
    ego = EgoState(speed=first.target_speed, steering_angle=first.steering_angle,
                   pose=Pose(), wheelbase=spec.wheelbase)

    frames = []
    for i in range(n_frames):
        t = i * period
        if i > 0:
            wp = _waypoint_at(spec.ego_script, t - period)
            ego = kinematic_step(ego, period, wp.target_speed, wp.steering_angle)
            for sim in sims:
                sim.step(period, rng)
        objects = tuple(sim.snapshot() for sim in sims)
        labeled = label_objects(objects, ego, fov, params)
        frames.append(Frame(index=i, timestamp=canonical_float(t), ego=ego,
                            objects=labeled, fov=fov))
    return tuple(frames)
