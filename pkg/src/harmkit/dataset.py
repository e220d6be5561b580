"""Dataset persistence, statistics, and scenario-level splits.

On-disk layout per dataset directory:

    manifest        JSON document (name, split, counts, seeds, zone params)
    frames.<split>  one JSON record per line, schema in docs/formats.md

Floats were canonicalized at construction, so records re-read bit-exactly
and re-writing a dataset reproduces the files byte for byte. Readers are
concurrency-safe; writers take a lock file on the directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classification import Category, Distribution, HarmLabel, SceneObject
from .errors import DatasetFormatError, InvalidInputError
from .geometry import EgoState, Pose, ZoneParams
from .simulation import Frame, ScenarioSpec

FORMAT_VERSION = "1"
SPLITS = ("train", "validation", "test")
_LOCK_NAME = ".lock"


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    split: str
    frame_count: int
    scenario_seeds: tuple[int, ...]
    zone_params: ZoneParams
    format_version: str = FORMAT_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "scenario_seeds",
                           tuple(int(s) for s in self.scenario_seeds))
        if self.split not in SPLITS:
            raise InvalidInputError(
                f"split must be one of {SPLITS}, got {self.split!r}")
        if self.frame_count < 0:
            raise InvalidInputError("frame_count must be >= 0")

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "name": self.name,
            "split": self.split,
            "frame_count": self.frame_count,
            "scenario_seeds": list(self.scenario_seeds),
            "zone_params": self.zone_params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(name=d["name"], split=d["split"],
                   frame_count=d["frame_count"],
                   scenario_seeds=tuple(d["scenario_seeds"]),
                   zone_params=ZoneParams.from_dict(d["zone_params"]),
                   format_version=d["format_version"])


def _object_to_record(obj: SceneObject) -> dict:
    return {
        "id": obj.id,
        "center": list(obj.center),
        "dims": list(obj.dims),
        "yaw": obj.yaw,
        "category": obj.category.value,
        "distribution": obj.distribution.value,
        "kind": obj.kind,
        "label": obj.label.value if obj.label is not None else None,
    }


def _object_from_record(rec: dict) -> SceneObject:
    return SceneObject(
        id=rec["id"], center=tuple(rec["center"]), dims=tuple(rec["dims"]),
        yaw=rec["yaw"], category=rec["category"],
        distribution=rec["distribution"], kind=rec["kind"],
        label=rec["label"])


def frame_to_record(frame: Frame) -> dict:
    ego = frame.ego
    return {
        "index": frame.index,
        "timestamp": frame.timestamp,
        "ego": {
            "speed": ego.speed,
            "steering_angle": ego.steering_angle,
            "x": ego.pose.x,
            "y": ego.pose.y,
            "yaw": ego.pose.yaw,
            "wheelbase": ego.wheelbase,
            "max_steering": ego.max_steering,
        },
        "fov": frame.fov,
        "cam_height": frame.cam_height,
        "ego_to_world": [list(row) for row in frame.ego_to_world],
        "ego_to_cam": [list(row) for row in frame.ego_to_cam],
        "objects": [_object_to_record(o) for o in frame.objects],
    }


def frame_from_record(rec: dict) -> Frame:
    ego_rec = rec["ego"]
    ego = EgoState(
        speed=ego_rec["speed"], steering_angle=ego_rec["steering_angle"],
        pose=Pose(ego_rec["x"], ego_rec["y"], ego_rec["yaw"]),
        wheelbase=ego_rec["wheelbase"], max_steering=ego_rec["max_steering"])
    return Frame(
        index=rec["index"], timestamp=rec["timestamp"], ego=ego,
        objects=tuple(_object_from_record(o) for o in rec["objects"]),
        fov=rec["fov"], cam_height=rec["cam_height"],
        ego_to_world=tuple(tuple(row) for row in rec["ego_to_world"]),
        ego_to_cam=tuple(tuple(row) for row in rec["ego_to_cam"]))


class _DirLock:
    """Exclusive lock for dataset writers; readers do not take it."""

    def __init__(self, directory: Path) -> None:
        self.path = directory / _LOCK_NAME
        self.fd: int | None = None

    def __enter__(self) -> "_DirLock":
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise DatasetFormatError(
                f"dataset directory is locked by another writer "
                f"(remove {self.path} if stale)")
        return self

    def __exit__(self, *exc) -> None:
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)


def write_dataset(frames: Sequence[Frame], manifest: DatasetManifest,
                  path: str | Path) -> None:
    """Write manifest + frame records; requires manifest.frame_count to match."""
    if manifest.frame_count != len(frames):
        raise DatasetFormatError(
            f"manifest frame_count {manifest.frame_count} does not match "
            f"{len(frames)} frames")
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    with _DirLock(directory):
        manifest_path = directory / "manifest"
        frames_path = directory / f"frames.{manifest.split}"
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest.to_dict(), fh, indent=2)
            fh.write("\n")
        with open(frames_path, "w", encoding="utf-8") as fh:
            for frame in frames:
                fh.write(json.dumps(frame_to_record(frame)))
                fh.write("\n")


def read_dataset(path: str | Path) -> tuple[tuple[Frame, ...], DatasetManifest]:
    directory = Path(path)
    manifest_path = directory / "manifest"
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise DatasetFormatError("manifest not found", path=str(manifest_path))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"bad manifest: {exc}", path=str(manifest_path))
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(
            f"unsupported format_version {version!r} (expected {FORMAT_VERSION})",
            path=str(manifest_path))
    try:
        manifest = DatasetManifest.from_dict(raw)
    except (KeyError, TypeError, InvalidInputError) as exc:
        raise DatasetFormatError(f"bad manifest: {exc}", path=str(manifest_path))

    frames_path = directory / f"frames.{manifest.split}"
    frames: list[Frame] = []
    try:
        fh = open(frames_path, encoding="utf-8")
    except FileNotFoundError:
        raise DatasetFormatError("frames file not found", path=str(frames_path))
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                frames.append(frame_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError,
                    InvalidInputError) as exc:
                raise DatasetFormatError(f"bad frame record: {exc}",
                                         path=str(frames_path),
                                         line_number=lineno)
    if len(frames) != manifest.frame_count:
        raise DatasetFormatError(
            f"manifest frame_count {manifest.frame_count} does not match "
            f"{len(frames)} stored records", path=str(frames_path))
    return tuple(frames), manifest


@dataclass
class StatsTable:
    """Counts of annotation rows by (category, distribution, label)."""

    counts: dict[tuple[str, str, str], int]

    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, category: str | None = None, distribution: str | None = None,
              label: str | None = None) -> int:
        out = 0
        for (cat, dist, lbl), n in self.counts.items():
            if category is not None and cat != category:
                continue
            if distribution is not None and dist != distribution:
                continue
            if label is not None and lbl != label:
                continue
            out += n
        return out

    def ood_id_row_ratio(self) -> float:
        """OOD annotation rows per ID annotation row."""
        id_rows = self.count(distribution=Distribution.ID.value)
        if id_rows == 0:
            raise InvalidInputError("no ID rows; ratio undefined")
        return self.count(distribution=Distribution.OOD.value) / id_rows

    def as_text(self) -> str:
        header = f"{'category':<12} {'distribution':<12} {'harmful':>8} {'harmless':>9} {'total':>7}"
        lines = [header, "-" * len(header)]
        for cat in Category:
            for dist in Distribution:
                harmful = self.count(cat.value, dist.value, HarmLabel.HARMFUL.value)
                harmless = self.count(cat.value, dist.value, HarmLabel.HARMLESS.value)
                if harmful == 0 and harmless == 0:
                    continue
                lines.append(f"{cat.value:<12} {dist.value:<12} {harmful:>8} "
                             f"{harmless:>9} {harmful + harmless:>7}")
        lines.append("-" * len(header))
        lines.append(f"{'total':<12} {'':<12} "
                     f"{self.count(label=HarmLabel.HARMFUL.value):>8} "
                     f"{self.count(label=HarmLabel.HARMLESS.value):>9} "
                     f"{self.total():>7}")
        return "\n".join(lines)

    def rows(self) -> list[tuple[str, str, str, int]]:
        return [(cat, dist, lbl, n)
                for (cat, dist, lbl), n in sorted(self.counts.items())]


def compute_stats(frames: Iterable[Frame]) -> StatsTable:
    counts: dict[tuple[str, str, str], int] = {}
    for frame in frames:
        for obj in frame.objects:
            key = (obj.category.value, obj.distribution.value,
                   obj.label.value if obj.label else "unlabeled")
            counts[key] = counts.get(key, 0) + 1
    return StatsTable(counts)


def split_dataset(scenarios: Sequence[ScenarioSpec],
                  ratios: Mapping[str, float], seed: int,
                  zone_params: ZoneParams | None = None,
                  name: str = "dataset") -> dict[str, DatasetManifest]:
    """Assign whole scenarios to splits, deterministically in the seed.

    Returns one manifest per split with its scenario seeds; frame counts are
    zero placeholders until the scenarios are generated and written. A
    scenario seed never lands in two splits.
    """
    params = zone_params if zone_params is not None else ZoneParams()
    for split in ratios:
        if split not in SPLITS:
            raise InvalidInputError(f"unknown split {split!r}")
    active = [(s, r) for s, r in ratios.items() if r > 0]
    if not active:
        raise InvalidInputError("at least one split ratio must be > 0")
    if abs(sum(r for _, r in active) - 1.0) > 1e-9:
        raise InvalidInputError("split ratios must sum to 1")
    if len(scenarios) < len(active):
        raise InvalidInputError(
            f"{len(scenarios)} scenario(s) cannot fill {len(active)} splits")

    seeds = [s.seed for s in scenarios]
    if len(set(seeds)) != len(seeds):
        raise InvalidInputError("scenario seeds must be unique for splitting")

    order = np.random.default_rng(seed).permutation(len(scenarios))
    shuffled = [scenarios[int(i)] for i in order]

    n = len(shuffled)
    quotas = [(split, n * ratio) for split, ratio in active]
    counts = {split: int(q) for split, q in quotas}
    remainder = n - sum(counts.values())
    # largest fractional part first; ties by declaration order
    by_frac = sorted(quotas, key=lambda kv: kv[1] - int(kv[1]), reverse=True)
    for split, _ in by_frac:
        if remainder == 0:
            break
        counts[split] += 1
        remainder -= 1
    # every active split gets at least one scenario
    for split, _ in active:
        if counts[split] == 0:
            donor = max(counts, key=counts.get)
            counts[donor] -= 1
            counts[split] += 1

    manifests: dict[str, DatasetManifest] = {}
    start = 0
    for split, _ in active:
        chunk = shuffled[start:start + counts[split]]
        start += counts[split]
        manifests[split] = DatasetManifest(
            name=name, split=split, frame_count=0,
            scenario_seeds=tuple(s.seed for s in chunk), zone_params=params)
    return manifests
