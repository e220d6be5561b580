"""Danger-zone construction and projection.

The danger zone is a ground-plane rectangle ahead of the ego vehicle: its
depth grows linearly with speed, its orientation follows the steering angle,
and its width is a fixed parameter (roughly a lane).

Coordinate conventions, used consistently across the package:

- Ego frame: x points to the vehicle's right, y forward, z up. The origin is
  the front bumper center, on the ground.
- World frame: z up. Yaw is measured clockwise from the +y axis, so a heading
  vector is (sin(yaw), cos(yaw)). Positive yaw turns right; positive steering
  swings the zone to the right. Object yaw uses the same convention.
- Camera: forward-facing pinhole at `position` in the ego frame, optical axis
  along ego +y, image x right, image y down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidInputError, ProjectionError

DEFAULT_SPEED_GAIN_S = 2.0
DEFAULT_MIN_SAFE_DISTANCE_M = 4.0
DEFAULT_ZONE_WIDTH_M = 3.5
DEFAULT_AREA_THRESHOLD_M2 = 0.5
DEFAULT_RATIO_THRESHOLD = 0.3
DEFAULT_MAX_STEERING_RAD = 0.6109  # 35 degrees
DEFAULT_WHEELBASE_M = 2.7
DEFAULT_CAMERA_HEIGHT_M = 1.6


def canonical_float(value: float) -> float:
    """Round a float to 9 significant decimal digits.

    Values that passed through here survive a write/parse cycle bit-exactly:
    the shortest repr of a canonical value has at most 9 significant digits,
    and parsing it returns the same double. Serialized state (poses, boxes,
    timestamps) is canonicalized at construction so datasets round-trip.
    """
    v = float(value)
    if not math.isfinite(v):
        raise InvalidInputError(f"non-finite value {value!r}")
    return float(f"{v:.9g}")


def _canonical_tuple(values) -> tuple[float, ...]:
    return tuple(canonical_float(v) for v in values)


@dataclass(frozen=True)
class Pose:
    """World-frame planar pose. yaw is clockwise from +y (compass style)."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", canonical_float(self.x))
        object.__setattr__(self, "y", canonical_float(self.y))
        object.__setattr__(self, "yaw", canonical_float(self.yaw))


@dataclass(frozen=True)
class EgoState:
    """Kinematic state of the ego vehicle; sole driver of the danger zone."""

    speed: float
    steering_angle: float
    pose: Pose = field(default_factory=Pose)
    wheelbase: float = DEFAULT_WHEELBASE_M
    max_steering: float = DEFAULT_MAX_STEERING_RAD

    def __post_init__(self) -> None:
        object.__setattr__(self, "speed", canonical_float(self.speed))
        object.__setattr__(self, "steering_angle", canonical_float(self.steering_angle))
        object.__setattr__(self, "wheelbase", canonical_float(self.wheelbase))
        object.__setattr__(self, "max_steering", canonical_float(self.max_steering))
        if self.speed < 0:
            raise InvalidInputError(f"speed must be >= 0, got {self.speed}")
        if self.wheelbase <= 0:
            raise InvalidInputError(f"wheelbase must be > 0, got {self.wheelbase}")
        if self.max_steering <= 0:
            raise InvalidInputError(f"max_steering must be > 0, got {self.max_steering}")
        if abs(self.steering_angle) > self.max_steering + 1e-12:
            raise InvalidInputError(
                f"steering angle {self.steering_angle} exceeds limit {self.max_steering}")


@dataclass(frozen=True)
class ZoneParams:
    """Danger-zone shape parameters plus the harm-label thresholds."""

    min_safe_distance: float = DEFAULT_MIN_SAFE_DISTANCE_M
    speed_gain: float = DEFAULT_SPEED_GAIN_S  # seconds, depth per unit speed
    width: float = DEFAULT_ZONE_WIDTH_M
    overlap_area_threshold: float = DEFAULT_AREA_THRESHOLD_M2
    overlap_ratio_threshold: float = DEFAULT_RATIO_THRESHOLD

    def __post_init__(self) -> None:
        for name in ("min_safe_distance", "speed_gain", "width",
                     "overlap_area_threshold", "overlap_ratio_threshold"):
            object.__setattr__(self, name, canonical_float(getattr(self, name)))
        if self.min_safe_distance <= 0:
            raise InvalidInputError("min_safe_distance must be > 0")
        if self.speed_gain <= 0:
            raise InvalidInputError("speed_gain must be > 0")
        if self.width <= 0:
            raise InvalidInputError("width must be > 0")
        if self.overlap_area_threshold < 0:
            raise InvalidInputError("overlap_area_threshold must be >= 0")
        if not 0.0 <= self.overlap_ratio_threshold <= 1.0:
            raise InvalidInputError("overlap_ratio_threshold must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "min_safe_distance": self.min_safe_distance,
            "speed_gain": self.speed_gain,
            "width": self.width,
            "overlap_area_threshold": self.overlap_area_threshold,
            "overlap_ratio_threshold": self.overlap_ratio_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ZoneParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown zone parameter(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class DangerZone:
    """Ground-plane quadrilateral, counter-clockwise vertices.

    Vertices are ego-frame as built; `zone_to_world` returns a copy with
    world-frame vertices. All vertices sit on the z=0 ground plane.
    """

    vertices: tuple[tuple[float, float], ...]
    depth: float
    theta: float

    def __post_init__(self) -> None:
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) != 4:
            raise InvalidInputError(f"zone must have 4 vertices, got {len(verts)}")
        arr = np.asarray(verts)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("zone vertices must be finite")
        # convex + CCW: every cross product of consecutive edges >= 0
        edges = np.roll(arr, -1, axis=0) - arr
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if np.any(cross < -1e-9):
            raise InvalidInputError("zone vertices must be convex and counter-clockwise")

    def vertex_array(self) -> NDArray[np.float64]:
        return np.asarray(self.vertices, dtype=float)


def zone_depth(speed: float, params: ZoneParams) -> float:
    """Forward extent of the zone in meters; affine in speed."""
    if speed < 0:
        raise InvalidInputError(f"speed must be >= 0, got {speed}")
    return speed * params.speed_gain + params.min_safe_distance


def rotate_about_z(v, theta: float):
    """Rotate a 3-vector (or an (N, 3) stack) about the z-axis.

    Counter-clockwise for positive theta in a right-handed frame:
    (1, 0, 0) goes to (0, 1, 0) at theta = pi/2. Norms and z-components
    are preserved.
    """
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1] != 3:
        raise InvalidInputError(f"expected 3-vectors, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("cannot rotate non-finite vectors")
    c, s = math.cos(theta), math.sin(theta)
    m = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return arr @ m.T


def build_danger_zone(ego: EgoState, params: ZoneParams) -> DangerZone:
    """Rectangle of length zone_depth and the configured width, anchored at
    the front bumper and swung by the steering angle.

    Corners are laid out in a (forward, right) basis and rotated there, so a
    positive angle swings the zone toward the vehicle's right-hand side; the
    result is reported in the ego frame (x right, y forward). At zero steering
    the zone is the axis-aligned rectangle straight ahead.
    """
    depth = zone_depth(ego.speed, params)
    half_w = params.width / 2.0
    corners_fr = np.array([
        [0.0, -half_w, 0.0],
        [0.0, half_w, 0.0],
        [depth, half_w, 0.0],
        [depth, -half_w, 0.0],
    ])
    rotated = rotate_about_z(corners_fr, ego.steering_angle)
    # back to ego axes: x = right (basis column 1), y = forward (column 0)
    verts = tuple((float(p[1]), float(p[0])) for p in rotated)
    return DangerZone(vertices=verts, depth=depth, theta=ego.steering_angle)


def heading_vector(yaw: float) -> NDArray[np.float64]:
    """World-frame unit heading for a compass yaw."""
    return np.array([math.sin(yaw), math.cos(yaw)])


def ego_to_world_xy(points, pose: Pose) -> NDArray[np.float64]:
    """Map ego-frame ground points (N, 2) or (2,) into the world frame."""
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    out = np.empty_like(arr)
    out[:, 0] = arr[:, 0] * c + arr[:, 1] * s + pose.x
    out[:, 1] = -arr[:, 0] * s + arr[:, 1] * c + pose.y
    return out if np.asarray(points).ndim == 2 else out[0]


def world_to_ego_xy(points, pose: Pose) -> NDArray[np.float64]:
    """Inverse of ego_to_world_xy."""
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    dx = arr[:, 0] - pose.x
    dy = arr[:, 1] - pose.y
    out = np.empty_like(arr)
    out[:, 0] = dx * c - dy * s
    out[:, 1] = dx * s + dy * c
    return out if np.asarray(points).ndim == 2 else out[0]


def zone_to_world(zone: DangerZone, pose: Pose) -> DangerZone:
    """Rigidly transform a zone into the world frame (rotate by yaw, then
    translate). Area and winding are preserved."""
    verts = ego_to_world_xy(zone.vertex_array(), pose)
    return DangerZone(vertices=tuple((float(x), float(y)) for x, y in verts),
                      depth=zone.depth, theta=zone.theta)


def pose_matrix(pose: Pose) -> NDArray[np.float64]:
    """Homogeneous 4x4 ego->world transform for a planar pose."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return np.array([
        [c, s, 0.0, pose.x],
        [-s, c, 0.0, pose.y],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])


def camera_extrinsic(position=(0.0, 0.0, DEFAULT_CAMERA_HEIGHT_M)) -> NDArray[np.float64]:
    """Homogeneous 4x4 ego->camera transform for a forward-facing camera.

    Camera axes: x right, y down, z along ego forward (+y).
    """
    px, py, pz = (float(v) for v in position)
    return np.array([
        [1.0, 0.0, 0.0, -px],
        [0.0, 0.0, -1.0, pz],
        [0.0, 1.0, 0.0, -py],
        [0.0, 0.0, 0.0, 1.0],
    ])


@dataclass(frozen=True)
class CameraModel:
    """Forward-facing pinhole camera in the ego frame."""

    fx: float = 1000.0
    fy: float = 1000.0
    cx: float = 960.0
    cy: float = 540.0
    width: int = 1920
    height: int = 1080
    position: tuple[float, float, float] = (0.0, 0.0, DEFAULT_CAMERA_HEIGHT_M)

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _canonical_tuple(self.position))
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be > 0")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("image size must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise InvalidInputError("principal point must lie inside the image")

    @property
    def horizontal_fov(self) -> float:
        return 2.0 * math.atan2(self.width / 2.0, self.fx)

    def ego_to_camera(self) -> NDArray[np.float64]:
        return camera_extrinsic(self.position)

    def project(self, points_ego) -> NDArray[np.float64]:
        """Pinhole-project ego-frame 3D points to pixel coordinates.

        Raises ProjectionError naming the first vertex at or behind the
        camera plane.
        """
        pts = np.atleast_2d(np.asarray(points_ego, dtype=float))
        if pts.shape[-1] != 3:
            raise InvalidInputError(f"expected 3D points, got shape {pts.shape}")
        hom = np.hstack([pts, np.ones((len(pts), 1))])
        cam = hom @ self.ego_to_camera().T
        behind = np.nonzero(cam[:, 2] <= 1e-9)[0]
        if behind.size:
            idx = int(behind[0])
            raise ProjectionError(
                f"vertex {idx} is not in front of the camera (z={cam[idx, 2]:.3g})",
                vertex_index=idx)
        uv = np.empty((len(pts), 2))
        uv[:, 0] = self.cx + self.fx * cam[:, 0] / cam[:, 2]
        uv[:, 1] = self.cy + self.fy * cam[:, 1] / cam[:, 2]
        return uv


def project_zone_to_image(zone: DangerZone, cam: CameraModel) -> NDArray[np.float64]:
    """Project the four ground vertices of a zone into the image.

    For zero steering and the default camera this is an isosceles trapezoid:
    the near edge spans more pixels than the far edge.
    """
    verts = zone.vertex_array()
    pts3 = np.hstack([verts, np.zeros((len(verts), 1))])
    return cam.project(pts3)
