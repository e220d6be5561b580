"""Configurable noisy detector standing in for a trained model.

Takes labeled frames and emits detections under controlled corruption:
per-axis center jitter, missed objects, spurious boxes, label flips, and an
optional early-harmful shift that relabels objects harmful a few frames
before their ground-truth onset. With the all-zero config the output equals
the ground truth at confidence 1.0.

Randomness discipline: per-frame substreams keyed (seed, frame, 0) for
object draws and (seed, frame, 1) for spurious boxes, so changing
spurious_rate never disturbs the jitter/miss/flip draws of the same seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from .classification import HarmLabel
from .errors import ConfigError, DatasetFormatError, InvalidInputError
from .geometry import canonical_float, ego_to_world_xy
from .simulation import Frame

MATCHED_CONFIDENCE = (0.7, 1.0)
SPURIOUS_CONFIDENCE = (0.1, 0.6)
# spurious boxes keep this clearance from every ground-truth center (m)
SPURIOUS_CLEARANCE = 0.5
_SPURIOUS_RETRIES = 100

DETECTIONS_FORMAT_VERSION = "1"


@dataclass(frozen=True)
class NoiseConfig:
    center_sigma: float = 0.0
    miss_rate: float = 0.0
    spurious_rate: float = 0.0
    label_flip_rate: float = 0.0
    early_harm_frames: int = 0
    spurious_harmless_frac: float = 0.85
    seed: int = 0

    def __post_init__(self) -> None:
        if self.center_sigma < 0:
            raise InvalidInputError("center_sigma must be >= 0")
        for name in ("miss_rate", "label_flip_rate", "spurious_harmless_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must be in [0, 1]")
        if self.spurious_rate < 0:
            raise InvalidInputError("spurious_rate must be >= 0")
        if self.early_harm_frames < 0 or int(self.early_harm_frames) != self.early_harm_frames:
            raise InvalidInputError("early_harm_frames must be an int >= 0")
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidInputError("seed must be a non-negative integer")

    @property
    def is_identity(self) -> bool:
        """True when every corruption knob is off.

        The identity config reports ground truth at confidence 1.0 instead of
        drawing from the matched-confidence band.
        """
        return (self.center_sigma == 0 and self.miss_rate == 0
                and self.spurious_rate == 0 and self.label_flip_rate == 0
                and self.early_harm_frames == 0)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown noise key(s): {sorted(unknown)}")
        try:
            return cls(**d)
        except InvalidInputError as exc:
            raise ConfigError(f"bad noise config: {exc}") from exc

    @classmethod
    def from_toml(cls, path: str | Path) -> "NoiseConfig":
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(raw.get("noise", raw))


@dataclass(frozen=True)
class Detection:
    """One predicted box, world frame, with a harm label and confidence."""

    frame_index: int
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float
    label: HarmLabel
    confidence: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(canonical_float(v) for v in self.center))
        object.__setattr__(self, "dims", tuple(canonical_float(v) for v in self.dims))
        object.__setattr__(self, "yaw", canonical_float(self.yaw))
        object.__setattr__(self, "confidence", canonical_float(self.confidence))
        object.__setattr__(self, "label", HarmLabel(self.label))
        if self.frame_index < 0:
            raise InvalidInputError("frame_index must be >= 0")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInputError("confidence must be in [0, 1]")
        if any(d <= 0 for d in self.dims):
            raise InvalidInputError("detection dims must be > 0")


def _flip(label: HarmLabel) -> HarmLabel:
    return HarmLabel.HARMLESS if label is HarmLabel.HARMFUL else HarmLabel.HARMFUL


def _first_harmful_frames(frames: Sequence[Frame]) -> dict[str, int]:
    onsets: dict[str, int] = {}
    for frame in frames:
        for obj in frame.objects:
            if obj.label is HarmLabel.HARMFUL and obj.id not in onsets:
                onsets[obj.id] = frame.index
    return onsets


def run_stub(frames: Sequence[Frame], cfg: NoiseConfig) -> tuple[Detection, ...]:
    """Corrupt ground truth into detections, deterministically in cfg.seed."""
    early: dict[str, set[int]] = {}
    if cfg.early_harm_frames > 0:
        for oid, onset in _first_harmful_frames(frames).items():
            early[oid] = {onset - k for k in range(1, cfg.early_harm_frames + 1)
                          if onset - k >= 0}

    detections: list[Detection] = []
    for frame in frames:
        obj_rng = np.random.default_rng((cfg.seed, frame.index, 0))
        spur_rng = np.random.default_rng((cfg.seed, frame.index, 1))

        for obj in frame.objects:
            # draw everything unconditionally so one object's outcome never
            # shifts another object's randomness
            u_miss = float(obj_rng.uniform())
            jitter = obj_rng.normal(0.0, 1.0, size=2)
            u_flip = float(obj_rng.uniform())
            conf = float(obj_rng.uniform(*MATCHED_CONFIDENCE))
            if u_miss < cfg.miss_rate:
                continue
            center = (obj.center[0] + cfg.center_sigma * float(jitter[0]),
                      obj.center[1] + cfg.center_sigma * float(jitter[1]),
                      obj.center[2])
            label = obj.label
            if u_flip < cfg.label_flip_rate:
                label = _flip(label)
            if frame.index in early.get(obj.id, ()):
                label = HarmLabel.HARMFUL
            if cfg.is_identity:
                conf = 1.0
            detections.append(Detection(
                frame_index=frame.index, center=center, dims=obj.dims,
                yaw=obj.yaw, label=label, confidence=conf))

        if cfg.spurious_rate > 0:
            n_spurious = int(spur_rng.poisson(cfg.spurious_rate))
            gt_centers = np.array([[o.center[0], o.center[1]]
                                   for o in frame.objects]).reshape(-1, 2)
            for _ in range(n_spurious):
                det = _draw_spurious(frame, cfg, spur_rng, gt_centers)
                if det is not None:
                    detections.append(det)
    return tuple(detections)


def _draw_spurious(frame: Frame, cfg: NoiseConfig, rng: np.random.Generator,
                   gt_centers: np.ndarray) -> Detection | None:
    for _ in range(_SPURIOUS_RETRIES):
        bearing = float(rng.uniform(-frame.fov / 2.0, frame.fov / 2.0))
        dist = float(rng.uniform(3.0, 45.0))
        ego_xy = (dist * math.sin(bearing), dist * math.cos(bearing))
        wx, wy = ego_to_world_xy(ego_xy, frame.ego.pose)
        length = float(rng.uniform(0.4, 2.0))
        width = float(rng.uniform(0.4, 2.0))
        height = float(rng.uniform(0.4, 2.0))
        yaw = float(rng.uniform(0.0, 2.0 * math.pi))
        u_label = float(rng.uniform())
        conf = float(rng.uniform(*SPURIOUS_CONFIDENCE))
        if gt_centers.size:
            d2 = (gt_centers[:, 0] - wx) ** 2 + (gt_centers[:, 1] - wy) ** 2
            if float(d2.min()) < SPURIOUS_CLEARANCE ** 2:
                continue
        label = (HarmLabel.HARMLESS if u_label < cfg.spurious_harmless_frac
                 else HarmLabel.HARMFUL)
        return Detection(frame_index=frame.index, center=(wx, wy, 0.0),
                         dims=(length, width, height), yaw=yaw, label=label,
                         confidence=conf)
    return None  # could not clear the ground truth; drop this box


def detection_to_record(det: Detection) -> dict:
    return {
        "frame": det.frame_index,
        "center": list(det.center),
        "dims": list(det.dims),
        "yaw": det.yaw,
        "label": det.label.value,
        "confidence": det.confidence,
    }


def detection_from_record(rec: dict) -> Detection:
    return Detection(frame_index=rec["frame"], center=tuple(rec["center"]),
                     dims=tuple(rec["dims"]), yaw=rec["yaw"],
                     label=rec["label"], confidence=rec["confidence"])


def write_detections(detections: Iterable[Detection], path: str | Path,
                     noise: NoiseConfig | None = None) -> None:
    """Line-delimited records with a self-describing header line."""
    header = {"format_version": DETECTIONS_FORMAT_VERSION, "kind": "detections"}
    if noise is not None:
        header["noise"] = noise.to_dict()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header))
        fh.write("\n")
        for det in detections:
            fh.write(json.dumps(detection_to_record(det)))
            fh.write("\n")


def read_detections(path: str | Path) -> tuple[Detection, ...]:
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8")
    except FileNotFoundError:
        raise DatasetFormatError("detections file not found", path=str(path))
    detections: list[Detection] = []
    with fh:
        first = fh.readline()
        try:
            header = json.loads(first) if first.strip() else {}
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"bad header: {exc}", path=str(path),
                                     line_number=1)
        if header.get("kind") != "detections":
            raise DatasetFormatError("not a detections file (missing header)",
                                     path=str(path), line_number=1)
        if header.get("format_version") != DETECTIONS_FORMAT_VERSION:
            raise DatasetFormatError(
                f"unsupported format_version {header.get('format_version')!r}",
                path=str(path), line_number=1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                detections.append(detection_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError,
                    InvalidInputError) as exc:
                raise DatasetFormatError(f"bad detection record: {exc}",
                                         path=str(path), line_number=lineno)
    return tuple(detections)
