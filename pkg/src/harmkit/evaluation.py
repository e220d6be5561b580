"""Center-distance mAP with distribution-aware variants, plus ego-state
sweeps and temporal lead analysis.

Matching is greedy and class-agnostic: detections are visited in descending
confidence and each takes the nearest unmatched ground-truth box of the same
frame whose ground-plane center lies within the threshold. A match across
harm classes is a misclassification FP charged to the ground-truth object's
distribution; a detection matching nothing is a background FP whose fate
depends on the variant:

- combined: one pooled group, background FPs count there;
- separated_all_fps: TPs split into ID/OOD groups, every background FP is
  charged to the OOD group;
- separated_matched_fps: TPs split into ID/OOD, background FPs are ignored
  and only misclassification FPs count.

AP is interpolated (precision at each recall level = max precision at any
recall >= that level, averaged over evenly spaced levels). Per class, AP is
averaged over thresholds first; classes with zero ground-truth rows are
reported absent and excluded from means.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .classification import (Distribution, HarmLabel, SceneObject,
                             classify_object)
from .detector_stub import Detection
from .errors import EvalInputError, InvalidInputError
from .geometry import EgoState, ZoneParams, build_danger_zone, zone_to_world
from .simulation import Frame

REPORT_FORMAT_VERSION = "1"
DEFAULT_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)
_COMBINED_GROUP = "all"


class Variant(str, Enum):
    COMBINED = "combined"
    SEPARATED_ALL_FPS = "separated_all_fps"
    SEPARATED_MATCHED_FPS = "separated_matched_fps"


@dataclass(frozen=True)
class EvalConfig:
    distance_thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    variant: Variant = Variant.COMBINED
    recall_points: int = 101
    include_audit: bool = True

    def __post_init__(self) -> None:
        thresholds = tuple(float(t) for t in self.distance_thresholds)
        object.__setattr__(self, "distance_thresholds", thresholds)
        object.__setattr__(self, "variant", Variant(self.variant))
        if not thresholds:
            raise InvalidInputError("need at least one distance threshold")
        if any(t <= 0 for t in thresholds):
            raise InvalidInputError("distance thresholds must be positive")
        if list(thresholds) != sorted(set(thresholds)):
            raise InvalidInputError("thresholds must be strictly increasing")
        if self.recall_points < 2:
            raise InvalidInputError("recall_points must be >= 2")


@dataclass(frozen=True)
class MatchRecord:
    """Outcome for one detection at one threshold, in input order."""

    detection_index: int
    outcome: str  # "tp" | "fp_misclassified" | "fp_unmatched"
    gt_index: int | None = None
    gt_id: str | None = None
    gt_label: HarmLabel | None = None
    gt_distribution: Distribution | None = None
    distance: float | None = None


def match_detections(detections: Sequence[Detection],
                     objects: Sequence[SceneObject],
                     threshold: float) -> tuple[MatchRecord, ...]:
    """Greedy one-to-one assignment within a single frame.

    Detections are processed in descending confidence (ties broken by input
    position); each takes the nearest unmatched ground-truth center within
    the threshold, distance ties going to the lower ground-truth index.
    Returned records are aligned with the input order.
    """
    if threshold <= 0:
        raise InvalidInputError("threshold must be positive")
    order = sorted(range(len(detections)),
                   key=lambda i: (-detections[i].confidence, i))
    gt_xy = np.array([[o.center[0], o.center[1]] for o in objects]).reshape(-1, 2)
    taken = np.zeros(len(objects), dtype=bool)
    records: list[MatchRecord | None] = [None] * len(detections)
    for i in order:
        det = detections[i]
        best_j = -1
        best_d = threshold
        if len(objects):
            d = np.hypot(gt_xy[:, 0] - det.center[0], gt_xy[:, 1] - det.center[1])
            d[taken] = np.inf
            j = int(np.argmin(d))  # ties resolve to the lower index
            if d[j] <= threshold:
                best_j, best_d = j, float(d[j])
        if best_j < 0:
            records[i] = MatchRecord(detection_index=i, outcome="fp_unmatched")
            continue
        taken[best_j] = True
        gt = objects[best_j]
        outcome = "tp" if gt.label is det.label else "fp_misclassified"
        records[i] = MatchRecord(
            detection_index=i, outcome=outcome, gt_index=best_j, gt_id=gt.id,
            gt_label=gt.label, gt_distribution=gt.distribution, distance=best_d)
    return tuple(records)  # type: ignore[arg-type]


def average_precision(pr_points: Sequence[tuple[float, float]],
                      recall_points: int = 101) -> float:
    """Interpolated AP from ranked (recall, precision) prefix points.

    Precision at each of the evenly spaced recall levels is the maximum
    precision among points whose recall is >= that level (0 past the last
    point); the AP is their mean.
    """
    if recall_points < 2:
        raise InvalidInputError("recall_points must be >= 2")
    if not pr_points:
        return 0.0
    recalls = np.asarray([p[0] for p in pr_points], dtype=float)
    precisions = np.asarray([p[1] for p in pr_points], dtype=float)
    if np.any(np.diff(recalls) < -1e-12):
        raise InvalidInputError("recalls must be non-decreasing")
    suffix_max = np.maximum.accumulate(precisions[::-1])[::-1]
    levels = np.linspace(0.0, 1.0, recall_points)
    # slack so a recall equal to a level in exact arithmetic is not pushed
    # past it by floating-point representation (e.g. 3/5 vs the 0.6 level)
    idx = np.searchsorted(recalls, levels - 1e-12, side="left")
    interp = np.where(idx < len(recalls),
                      suffix_max[np.minimum(idx, len(recalls) - 1)], 0.0)
    return float(interp.mean())


@dataclass(frozen=True)
class GroupReport:
    """Per-(class, threshold) APs for one distribution group."""

    ap: dict[str, dict[float, float]]
    map_by_class: dict[str, float]
    map: float | None
    gt_rows: dict[str, int]


@dataclass(frozen=True)
class EvalReport:
    config: EvalConfig
    groups: dict[str, GroupReport]
    counts: dict[float, dict[str, int]]
    overall_map: float | None
    audit: dict[float, list[dict]] | None = None
    curves: dict[tuple[str, str, float], tuple[tuple[float, ...], tuple[float, ...]]] = field(
        default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        groups = {}
        for name, grp in self.groups.items():
            groups[name] = {
                "gt_rows": dict(grp.gt_rows),
                "ap": {cls: {f"{thr:g}": ap for thr, ap in by_thr.items()}
                       for cls, by_thr in grp.ap.items()},
                "map_by_class": dict(grp.map_by_class),
                "map": grp.map,
            }
        out = {
            "format_version": REPORT_FORMAT_VERSION,
            "config": {
                "distance_thresholds": list(self.config.distance_thresholds),
                "variant": self.config.variant.value,
                "recall_points": self.config.recall_points,
            },
            "groups": groups,
            "counts": {f"{thr:g}": dict(c) for thr, c in self.counts.items()},
            "overall_map": self.overall_map,
        }
        if self.audit is not None:
            out["audit"] = {f"{thr:g}": rows for thr, rows in self.audit.items()}
        return out


def _gt_tallies(frames: Sequence[Frame], variant: Variant) -> dict[str, dict[str, int]]:
    tallies: dict[str, dict[str, int]] = {}
    for frame in frames:
        for obj in frame.objects:
            if variant is Variant.COMBINED:
                group = _COMBINED_GROUP
            else:
                group = obj.distribution.value
            cls = obj.label.value
            tallies.setdefault(group, {}).setdefault(cls, 0)
            tallies[group][cls] += 1
    return tallies


def evaluate(detections: Sequence[Detection], frames: Sequence[Frame],
             cfg: EvalConfig | None = None) -> EvalReport:
    """Score detections against labeled frames under one variant."""
    cfg = cfg if cfg is not None else EvalConfig()
    frames_by_index: dict[int, Frame] = {}
    for frame in frames:
        if frame.index in frames_by_index:
            raise InvalidInputError(f"duplicate frame index {frame.index}")
        frames_by_index[frame.index] = frame
    by_frame: dict[int, list[tuple[int, Detection]]] = {}
    for gidx, det in enumerate(detections):
        if det.frame_index not in frames_by_index:
            raise EvalInputError(
                f"detection {gidx} references unknown frame {det.frame_index}",
                detection_index=gidx)
        by_frame.setdefault(det.frame_index, []).append((gidx, det))

    variant = cfg.variant
    tallies = _gt_tallies(frames, variant)
    if variant is Variant.COMBINED:
        group_names = [_COMBINED_GROUP]
    else:
        group_names = [Distribution.ID.value, Distribution.OOD.value]

    ap_tables: dict[str, dict[str, dict[float, float]]] = {g: {} for g in group_names}
    counts_by_thr: dict[float, dict[str, int]] = {}
    audit_by_thr: dict[float, list[dict]] = {}
    curves: dict[tuple[str, str, float], tuple[tuple[float, ...], tuple[float, ...]]] = {}

    for thr in cfg.distance_thresholds:
        charged: dict[tuple[str, str], list[tuple[float, int, bool]]] = {}
        counts = {"tp_id": 0, "tp_ood": 0, "fp_misclassified": 0,
                  "fp_unmatched": 0}
        audit_rows: list[dict] = []

        for frame_index in sorted(by_frame):
            pairs = by_frame[frame_index]
            objects = frames_by_index[frame_index].objects
            records = match_detections([d for _, d in pairs], objects, thr)
            for record, (gidx, det) in zip(records, pairs):
                cls = det.label.value
                if record.outcome == "tp":
                    if record.gt_distribution is Distribution.ID:
                        counts["tp_id"] += 1
                    else:
                        counts["tp_ood"] += 1
                    group = (_COMBINED_GROUP if variant is Variant.COMBINED
                             else record.gt_distribution.value)
                    charged.setdefault((group, cls), []).append(
                        (det.confidence, gidx, True))
                elif record.outcome == "fp_misclassified":
                    counts["fp_misclassified"] += 1
                    group = (_COMBINED_GROUP if variant is Variant.COMBINED
                             else record.gt_distribution.value)
                    charged.setdefault((group, cls), []).append(
                        (det.confidence, gidx, False))
                else:
                    counts["fp_unmatched"] += 1
                    if variant is Variant.COMBINED:
                        charged.setdefault((_COMBINED_GROUP, cls), []).append(
                            (det.confidence, gidx, False))
                    elif variant is Variant.SEPARATED_ALL_FPS:
                        charged.setdefault((Distribution.OOD.value, cls), []).append(
                            (det.confidence, gidx, False))
                    # separated_matched_fps ignores background FPs
                if cfg.include_audit:
                    audit_rows.append({
                        "frame": frame_index,
                        "detection": gidx,
                        "confidence": det.confidence,
                        "label": cls,
                        "outcome": record.outcome,
                        "gt_id": record.gt_id,
                        "gt_label": record.gt_label.value if record.gt_label else None,
                        "gt_distribution": (record.gt_distribution.value
                                            if record.gt_distribution else None),
                        "distance": record.distance,
                    })

        counts_by_thr[thr] = counts
        if cfg.include_audit:
            audit_by_thr[thr] = audit_rows

        for group in group_names:
            class_rows = tallies.get(group, {})
            for cls, n_gt in class_rows.items():
                if n_gt == 0:
                    continue
                rows = sorted(charged.get((group, cls), []),
                              key=lambda r: (-r[0], r[1]))
                tp_cum = 0
                fp_cum = 0
                pr_points = []
                for conf, _, is_tp in rows:
                    tp_cum += int(is_tp)
                    fp_cum += int(not is_tp)
                    pr_points.append((tp_cum / n_gt, tp_cum / (tp_cum + fp_cum)))
                ap = average_precision(pr_points, cfg.recall_points)
                ap_tables[group].setdefault(cls, {})[thr] = ap
                curves[(group, cls, thr)] = (
                    tuple(p[0] for p in pr_points),
                    tuple(p[1] for p in pr_points))

    groups: dict[str, GroupReport] = {}
    cell_maps: list[float] = []
    for group in group_names:
        gt_rows = {cls: n for cls, n in tallies.get(group, {}).items() if n > 0}
        ap_by_class = ap_tables[group]
        map_by_class = {cls: float(np.mean([ap_by_class[cls][t]
                                            for t in cfg.distance_thresholds]))
                        for cls in ap_by_class}
        grp_map = (float(np.mean(list(map_by_class.values())))
                   if map_by_class else None)
        groups[group] = GroupReport(ap=ap_by_class, map_by_class=map_by_class,
                                    map=grp_map, gt_rows=gt_rows)
        cell_maps.extend(map_by_class.values())

    overall = float(np.mean(cell_maps)) if cell_maps else None
    return EvalReport(config=cfg, groups=groups, counts=counts_by_thr,
                      overall_map=overall,
                      audit=audit_by_thr if cfg.include_audit else None,
                      curves=curves)


def evaluate_all_variants(detections: Sequence[Detection],
                          frames: Sequence[Frame],
                          thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
                          recall_points: int = 101,
                          include_audit: bool = True) -> dict[str, EvalReport]:
    return {
        v.value: evaluate(detections, frames,
                          EvalConfig(distance_thresholds=thresholds, variant=v,
                                     recall_points=recall_points,
                                     include_audit=include_audit))
        for v in Variant
    }


def _fmt(value: float | None) -> str:
    return f"{value:.4f}" if value is not None else "-"


def render_summary_table(reports: Mapping[str, EvalReport]) -> str:
    """Four-column view: pooled mAP, ID (matched FPs), OOD (all FPs),
    OOD (matched FPs)."""
    combined = reports.get(Variant.COMBINED.value)
    sep_all = reports.get(Variant.SEPARATED_ALL_FPS.value)
    sep_matched = reports.get(Variant.SEPARATED_MATCHED_FPS.value)

    def cell(report: EvalReport | None, group: str, cls: str | None) -> str:
        if report is None or group not in report.groups:
            return "-"
        grp = report.groups[group]
        if cls is None:
            return _fmt(grp.map)
        return _fmt(grp.map_by_class.get(cls))

    header = (f"{'class':<10} {'mAP':>13} {'mAP_ID':>13} "
              f"{'mAP_OOD':>13} {'mAP_OOD':>13}")
    sub = (f"{'':<10} {'(combined)':>13} {'(matched FPs)':>13} "
           f"{'(all FPs)':>13} {'(matched FPs)':>13}")
    lines = [header, sub, "-" * len(sub)]
    for cls in (HarmLabel.HARMFUL.value, HarmLabel.HARMLESS.value):
        lines.append(
            f"{cls:<10} {cell(combined, _COMBINED_GROUP, cls):>13} "
            f"{cell(sep_matched, Distribution.ID.value, cls):>13} "
            f"{cell(sep_all, Distribution.OOD.value, cls):>13} "
            f"{cell(sep_matched, Distribution.OOD.value, cls):>13}")
    lines.append("-" * len(sub))
    lines.append(
        f"{'mean':<10} {cell(combined, _COMBINED_GROUP, None):>13} "
        f"{cell(sep_matched, Distribution.ID.value, None):>13} "
        f"{cell(sep_all, Distribution.OOD.value, None):>13} "
        f"{cell(sep_matched, Distribution.OOD.value, None):>13}")
    return "\n".join(lines)


@dataclass(frozen=True)
class SweepResult:
    """Harm labels for every frame object over a (speed, steer) grid."""

    object_ids: tuple[str, ...]
    speeds: tuple[float, ...]
    steers: tuple[float, ...]
    labels: tuple[tuple[tuple[HarmLabel, ...], ...], ...]  # [obj][speed][steer]

    def label_of(self, object_id: str, speed: float, steer: float) -> HarmLabel:
        i = self.object_ids.index(object_id)
        j = self.speeds.index(speed)
        k = self.steers.index(steer)
        return self.labels[i][j][k]

    def rows(self) -> list[tuple[str, float, float, str]]:
        out = []
        for i, oid in enumerate(self.object_ids):
            for j, speed in enumerate(self.speeds):
                for k, steer in enumerate(self.steers):
                    out.append((oid, speed, steer, self.labels[i][j][k].value))
        return out


def sweep_ego_state(frame: Frame, speeds: Sequence[float],
                    steers: Sequence[float], params: ZoneParams) -> SweepResult:
    """Relabel the frame's objects under substituted ego speed/steering.

    The object set is the frame's recorded one (already FOV-filtered); only
    the danger zone changes across the grid.
    """
    if not speeds or not steers:
        raise InvalidInputError("sweep needs at least one speed and one steer")
    speeds = tuple(float(s) for s in speeds)
    steers = tuple(float(s) for s in steers)
    base = frame.ego
    labels = []
    for obj in frame.objects:
        per_speed = []
        for speed in speeds:
            per_steer = []
            for steer in steers:
                ego = EgoState(speed=speed, steering_angle=steer,
                               pose=base.pose, wheelbase=base.wheelbase,
                               max_steering=base.max_steering)
                zone = zone_to_world(build_danger_zone(ego, params), base.pose)
                per_steer.append(classify_object(obj, zone, params))
            per_speed.append(tuple(per_steer))
        labels.append(tuple(per_speed))
    return SweepResult(object_ids=tuple(o.id for o in frame.objects),
                       speeds=speeds, steers=steers, labels=tuple(labels))


@dataclass(frozen=True)
class LeadAnalysis:
    """First-predicted-harmful minus first-truly-harmful, per object track."""

    leads: dict[str, int]

    def histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for lead in self.leads.values():
            hist[lead] = hist.get(lead, 0) + 1
        return dict(sorted(hist.items()))

    def mode(self) -> int | None:
        hist = self.histogram()
        if not hist:
            return None
        # most common lead; ties resolve to the smaller lead
        return min(hist, key=lambda k: (-hist[k], k))


def temporal_lead_analysis(detections: Sequence[Detection],
                           frames: Sequence[Frame],
                           match_threshold: float = 2.0) -> LeadAnalysis:
    """Compare harmful-onset frames between predictions and ground truth.

    Detections are associated with object tracks by the same greedy matcher.
    Objects that are never harmful in the ground truth, or never predicted
    harmful, are excluded.
    """
    ordered = sorted(frames, key=lambda f: f.index)
    gt_onset: dict[str, int] = {}
    pred_onset: dict[str, int] = {}
    by_frame: dict[int, list[Detection]] = {}
    for det in detections:
        by_frame.setdefault(det.frame_index, []).append(det)

    for frame in ordered:
        for obj in frame.objects:
            if obj.label is HarmLabel.HARMFUL and obj.id not in gt_onset:
                gt_onset[obj.id] = frame.index
        dets = by_frame.get(frame.index, [])
        if not dets:
            continue
        records = match_detections(dets, frame.objects, match_threshold)
        for record, det in zip(records, dets):
            if record.gt_id is None:
                continue
            if det.label is HarmLabel.HARMFUL and record.gt_id not in pred_onset:
                pred_onset[record.gt_id] = frame.index

    leads = {oid: pred_onset[oid] - gt_onset[oid]
             for oid in gt_onset if oid in pred_onset}
    return LeadAnalysis(leads=leads)
