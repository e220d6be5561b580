"""Object footprints, convex overlap, and harmful/harmless labeling.

An object is harmful when its ground-plane footprint overlaps the danger
zone by at least a fixed area, or by at least a fixed fraction of the
footprint's own area. Zero overlap (including mere edge contact) is always
harmless, so the two thresholds may be set to 0 to make any positive
overlap harmful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .geometry import (DangerZone, EgoState, ZoneParams, build_danger_zone,
                       canonical_float, world_to_ego_xy, zone_to_world)

if TYPE_CHECKING:
    from .simulation import Frame

_EPSILON = 1e-9
# overlaps below this are treated as boundary contact, never harmful
_AREA_EPSILON = 1e-12


class HarmLabel(str, Enum):
    HARMFUL = "harmful"
    HARMLESS = "harmless"


class Category(str, Enum):
    VEHICLE = "vehicle"
    PEDESTRIAN = "pedestrian"
    STATIC = "static"


class Distribution(str, Enum):
    ID = "ID"
    OOD = "OOD"


@dataclass(frozen=True)
class SceneObject:
    """A 3D box on the ground plane with semantics.

    dims is (length, width, height); at yaw 0 the length runs along the
    world +y axis and positive yaw turns clockwise, same as ego yaw.
    """

    id: str
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float
    category: Category
    distribution: Distribution
    kind: str
    label: HarmLabel | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(canonical_float(v) for v in self.center))
        object.__setattr__(self, "dims", tuple(canonical_float(v) for v in self.dims))
        object.__setattr__(self, "yaw", canonical_float(self.yaw))
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if self.label is not None:
            object.__setattr__(self, "label", HarmLabel(self.label))
        if not self.id:
            raise InvalidInputError("object id must be non-empty")
        if len(self.center) != 3 or len(self.dims) != 3:
            raise InvalidInputError(f"object {self.id}: center and dims must be 3-tuples")
        if any(d <= 0 for d in self.dims):
            raise InvalidInputError(f"object {self.id}: dims must be > 0, got {self.dims}")


@dataclass(frozen=True)
class Polygon2D:
    """Simple ground-plane polygon, normalized to counter-clockwise order."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise InvalidInputError(f"polygon needs >= 3 vertices, got {len(verts)}")
        arr = np.asarray(verts)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("polygon vertices must be finite")
        if _signed_area(arr) < 0:
            verts = verts[::-1]
        object.__setattr__(self, "vertices", verts)

    def vertex_array(self):
        return np.asarray(self.vertices, dtype=float)


def _signed_area(arr: np.ndarray) -> float:
    x, y = arr[:, 0], arr[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_area(p: Polygon2D | None) -> float:
    """Shoelace area; 0 for the empty-intersection marker."""
    if p is None:
        return 0.0
    return abs(_signed_area(p.vertex_array()))


def _require_convex(arr: np.ndarray, name: str) -> None:
    edges = np.roll(arr, -1, axis=0) - arr
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    if np.any(cross < -_EPSILON):
        raise InvalidInputError(f"{name} polygon is not convex")
    if abs(_signed_area(arr)) <= _AREA_EPSILON:
        raise InvalidInputError(f"{name} polygon is degenerate")


def convex_intersection(p: Polygon2D, q: Polygon2D) -> Polygon2D | None:
    """Intersection of two convex polygons, or None when disjoint.

    Clips p successively against each half-plane of q. Both inputs must be
    convex; the constructor already normalized them to CCW.
    """
    parr = p.vertex_array()
    qarr = q.vertex_array()
    _require_convex(parr, "first")
    _require_convex(qarr, "second")

    output = [tuple(v) for v in parr]
    n = len(qarr)
    for i in range(n):
        if not output:
            return None
        a = qarr[i]
        b = qarr[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def side(pt):
            return ex * (pt[1] - a[1]) - ey * (pt[0] - a[0])

        clipped = []
        m = len(output)
        for j in range(m):
            cur = output[j]
            nxt = output[(j + 1) % m]
            s_cur, s_nxt = side(cur), side(nxt)
            if s_cur >= -_EPSILON:
                clipped.append(cur)
            # edge crosses the clipping line: add the crossing point
            if (s_cur >= -_EPSILON) != (s_nxt >= -_EPSILON):
                t = s_cur / (s_cur - s_nxt)
                clipped.append((cur[0] + t * (nxt[0] - cur[0]),
                                cur[1] + t * (nxt[1] - cur[1])))
        output = clipped

    deduped: list[tuple[float, float]] = []
    for pt in output:
        if not deduped or (abs(pt[0] - deduped[-1][0]) > 1e-12
                           or abs(pt[1] - deduped[-1][1]) > 1e-12):
            deduped.append(pt)
    if len(deduped) > 1 and (abs(deduped[0][0] - deduped[-1][0]) <= 1e-12
                             and abs(deduped[0][1] - deduped[-1][1]) <= 1e-12):
        deduped.pop()
    if len(deduped) < 3:
        return None
    result = Polygon2D(tuple(deduped))
    if polygon_area(result) <= _AREA_EPSILON:
        return None
    return result


def footprint(obj: SceneObject) -> Polygon2D:
    """Ground-plane rectangle under the object's box, CCW."""
    length, width = obj.dims[0], obj.dims[1]
    hl, hw = length / 2.0, width / 2.0
    corners = np.array([
        [-hw, -hl],
        [hw, -hl],
        [hw, hl],
        [-hw, hl],
    ])
    c, s = math.cos(obj.yaw), math.sin(obj.yaw)
    out = np.empty_like(corners)
    out[:, 0] = corners[:, 0] * c + corners[:, 1] * s + obj.center[0]
    out[:, 1] = -corners[:, 0] * s + corners[:, 1] * c + obj.center[1]
    return Polygon2D(tuple((float(x), float(y)) for x, y in out))


def classify_object(obj: SceneObject, zone: DangerZone, params: ZoneParams) -> HarmLabel:
    """Harm rule: overlap area >= area threshold, or overlap/footprint-area
    >= ratio threshold. Object and zone must share a frame (world, usually).
    """
    fp = footprint(obj)
    fp_area = polygon_area(fp)
    if fp_area <= _AREA_EPSILON:
        raise InvalidInputError("degenerate object footprint")
    overlap = polygon_area(convex_intersection(fp, Polygon2D(zone.vertices)))
    if overlap <= _AREA_EPSILON:
        return HarmLabel.HARMLESS
    if overlap >= params.overlap_area_threshold:
        return HarmLabel.HARMFUL
    if overlap / fp_area >= params.overlap_ratio_threshold:
        return HarmLabel.HARMFUL
    return HarmLabel.HARMLESS


def in_front_fov(obj: SceneObject, ego: EgoState, fov: float) -> bool:
    """True when the object's center lies ahead of the ego within +-fov/2
    of the forward axis."""
    if not 0.0 < fov < math.pi:
        raise InvalidInputError(f"fov must be in (0, pi), got {fov}")
    x, y = world_to_ego_xy(obj.center[:2], ego.pose)
    if y <= 0.0:
        return False
    return abs(math.atan2(x, y)) <= fov / 2.0


def label_objects(objects: Iterable[SceneObject], ego: EgoState, fov: float,
                  params: ZoneParams) -> tuple[SceneObject, ...]:
    """FOV-filter and label a collection of world-frame objects.

    Objects whose center falls outside the field of view are dropped; the
    rest come back with a HarmLabel attached.
    """
    zone = zone_to_world(build_danger_zone(ego, params), ego.pose)
    labeled = []
    for obj in objects:
        if not in_front_fov(obj, ego, fov):
            continue
        try:
            lbl = classify_object(obj, zone, params)
        except InvalidInputError as exc:
            raise InvalidInputError(f"object {obj.id}: {exc}") from exc
        labeled.append(replace(obj, label=lbl))
    return tuple(labeled)


def label_frame(frame: "Frame", params: ZoneParams) -> "Frame":
    """Relabel a frame's objects using its own ego state.

    The zone is built from the frame's speed and steering angle only. The
    frame's objects already passed the FOV filter at generation time; the
    filter is applied again for user-built frames.
    """
    labeled = label_objects(frame.objects, frame.ego, frame.fov, params)
    return replace(frame, objects=labeled)
