"""Command-line front end: simulate, stats, detect, eval, render, sweep.

Every parameter can come from a TOML config file (via --config) or from a
flag; flags win. Commands are deterministic given their inputs, exit 0 only
on full success, and remove partially written outputs when they fail.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10 fallback
    import tomli as tomllib

from . import __version__
from .dataset import (DatasetManifest, compute_stats, read_dataset,
                      write_dataset)
from .detector_stub import (NoiseConfig, read_detections, run_stub,
                            write_detections)
from .errors import ConfigError, HarmkitError, InvalidInputError
from .evaluation import (DEFAULT_THRESHOLDS, EvalConfig, EvalReport, Variant,
                         evaluate, render_summary_table, sweep_ego_state,
                         temporal_lead_analysis)
from .geometry import ZoneParams
from .render import (RenderStyle, lead_histogram_figure, pr_curve_figure,
                     render_bev, render_camera, save_figure, sweep_figure)
from .simulation import Frame, ScenarioSpec, generate_scenario

_ZONE_FLAGS = (
    ("zone_width", "width"),
    ("zone_min_safe_distance", "min_safe_distance"),
    ("zone_speed_gain", "speed_gain"),
    ("zone_area_threshold", "overlap_area_threshold"),
    ("zone_ratio_threshold", "overlap_ratio_threshold"),
)
_NOISE_FLAGS = (
    ("noise_center_sigma", "center_sigma"),
    ("noise_miss_rate", "miss_rate"),
    ("noise_spurious_rate", "spurious_rate"),
    ("noise_label_flip_rate", "label_flip_rate"),
    ("noise_early_harm_frames", "early_harm_frames"),
    ("noise_spurious_harmless_frac", "spurious_harmless_frac"),
)
_STYLE_FLAGS = (
    ("style_harmful_color", "harmful_color"),
    ("style_harmless_color", "harmless_color"),
    ("style_zone_color", "zone_color"),
)


def _load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one value")
    return values


def _section(config: dict, name: str) -> dict:
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section [{name}] must be a table")
    return section


def _merge_flags(base: dict, args: argparse.Namespace,
                 flag_map: tuple[tuple[str, str], ...]) -> dict:
    merged = dict(base)
    for attr, key in flag_map:
        value = getattr(args, attr, None)
        if value is not None:
            merged[key] = value
    return merged


def _zone_params(args: argparse.Namespace, config: dict,
                 base: ZoneParams | None = None) -> ZoneParams:
    fields = base.to_dict() if base is not None else {}
    fields.update(_section(config, "zone"))
    fields = _merge_flags(fields, args, _ZONE_FLAGS)
    return ZoneParams.from_dict(fields)


def _noise_config(args: argparse.Namespace, config: dict) -> NoiseConfig:
    fields = dict(_section(config, "noise"))
    if getattr(args, "noise", None):
        file_cfg = _load_toml(args.noise)
        fields.update(file_cfg.get("noise", file_cfg))
    fields = _merge_flags(fields, args, _NOISE_FLAGS)
    if getattr(args, "seed", None) is not None:
        fields["seed"] = args.seed
    return NoiseConfig.from_dict(fields)


def _style(args: argparse.Namespace, config: dict) -> RenderStyle:
    fields = dict(_section(config, "style"))
    fields = _merge_flags(fields, args, _STYLE_FLAGS)
    known = {f for f in RenderStyle.__dataclass_fields__}
    unknown = set(fields) - known
    if unknown:
        raise ConfigError(f"unknown style parameter(s): {sorted(unknown)}")
    return RenderStyle(**fields)


def _find_frame(frames: tuple[Frame, ...], index: int) -> Frame:
    for frame in frames:
        if frame.index == index:
            return frame
    available = sorted(f.index for f in frames)
    lo = available[0] if available else "none"
    hi = available[-1] if available else "none"
    raise InvalidInputError(
        f"frame index {index} not in dataset (have {lo}..{hi})")


class _Outputs:
    """Tracks produced paths so a failed command leaves nothing behind."""

    def __init__(self) -> None:
        self.files: list[Path] = []
        self.dirs: list[Path] = []

    def file(self, path: str | Path) -> Path:
        path = Path(path)
        if path.parent != Path(".") and not path.parent.exists():
            self.dirs.append(path.parent)
            path.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(path)
        return path

    def directory(self, path: str | Path) -> Path:
        path = Path(path)
        if not path.exists():
            self.dirs.append(path)
            path.mkdir(parents=True, exist_ok=True)
        return path

    def discard_all(self) -> None:
        for path in self.files:
            try:
                path.unlink()
            except OSError:
                pass
        for directory in sorted(self.dirs, key=lambda p: len(p.parts),
                                reverse=True):
            try:
                for leftover in sorted(directory.rglob("*"), reverse=True):
                    if leftover.is_file():
                        leftover.unlink()
                    else:
                        leftover.rmdir()
                directory.rmdir()
            except OSError:
                pass


def _cmd_simulate(args: argparse.Namespace, config: dict, out: _Outputs) -> int:
    spec = ScenarioSpec.from_toml(args.spec_file)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.fov_deg is not None:
        spec = replace(spec, fov_deg=args.fov_deg)
    params = _zone_params(args, config)
    frames = generate_scenario(spec, zone_params=params)
    manifest = DatasetManifest(name=Path(args.spec_file).stem,
                               split=args.split, frame_count=len(frames),
                               scenario_seeds=(spec.seed,), zone_params=params)
    out.directory(args.out_dir)
    out.file(Path(args.out_dir) / "manifest")
    out.file(Path(args.out_dir) / f"frames.{args.split}")
    write_dataset(frames, manifest, args.out_dir)
    print(f"wrote {len(frames)} frames to {args.out_dir}")
    return 0


def _cmd_stats(args: argparse.Namespace, config: dict, out: _Outputs) -> int:
    frames, _ = read_dataset(args.dataset_dir)
    table = compute_stats(frames).as_text()
    print(table)
    if args.out is not None:
        out.file(args.out).write_text(table + "\n", encoding="utf-8")
    return 0


def _cmd_detect(args: argparse.Namespace, config: dict, out: _Outputs) -> int:
    frames, _ = read_dataset(args.dataset_dir)
    noise = _noise_config(args, config)
    detections = run_stub(frames, noise)
    write_detections(detections, out.file(args.out), noise=noise)
    print(f"wrote {len(detections)} detections to {args.out}")
    return 0


def _eval_variants(args: argparse.Namespace) -> tuple[Variant, ...]:
    if args.variant == "all":
        return tuple(Variant)
    return (Variant(args.variant),)


def _cmd_eval(args: argparse.Namespace, config: dict, out: _Outputs) -> int:
    frames, _ = read_dataset(args.dataset_dir)
    detections = read_detections(args.detections)
    eval_section = _section(config, "eval")
    thresholds = args.thresholds or tuple(
        eval_section.get("distance_thresholds", DEFAULT_THRESHOLDS))
    recall_points = args.recall_points or int(
        eval_section.get("recall_points", 101))
    reports: dict[str, EvalReport] = {}
    for variant in _eval_variants(args):
        cfg = EvalConfig(distance_thresholds=thresholds, variant=variant,
                         recall_points=recall_points,
                         include_audit=not args.no_audit)
        reports[variant.value] = evaluate(detections, frames, cfg)

    out_dir = out.directory(args.out)
    payload = {name: rep.to_dict() for name, rep in reports.items()}
    with open(out.file(out_dir / "report.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    table = render_summary_table(reports)
    lines = [table, ""]
    for name, rep in reports.items():
        lines.append(f"[{name}] counts per threshold:")
        for thr, counts in rep.counts.items():
            lines.append(f"  d={thr:g}m: " + ", ".join(
                f"{k}={v}" for k, v in counts.items()))
        lines.append(f"  overall mAP: "
                     f"{rep.overall_map if rep.overall_map is not None else '-'}")
    text = "\n".join(lines) + "\n"
    out.file(out_dir / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")

    with open(out.file(out_dir / "report.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "group", "class", "threshold", "value"])
        for name, rep in reports.items():
            for group, grp in rep.groups.items():
                for cls, by_thr in sorted(grp.ap.items()):
                    for thr in rep.config.distance_thresholds:
                        if thr in by_thr:
                            writer.writerow([name, group, cls, f"{thr:g}",
                                             f"{by_thr[thr]:.9g}"])
                for cls, value in sorted(grp.map_by_class.items()):
                    writer.writerow([name, group, cls, "mean", f"{value:.9g}"])
                if grp.map is not None:
                    writer.writerow([name, group, "all_classes", "mean",
                                     f"{grp.map:.9g}"])
            if rep.overall_map is not None:
                writer.writerow([name, "overall", "all_classes", "mean",
                                 f"{rep.overall_map:.9g}"])

    for name, rep in reports.items():
        for group, grp in rep.groups.items():
            for cls in sorted(grp.ap):
                fig = pr_curve_figure(rep, group, cls)
                safe = group.replace(" ", "_")
                save_figure(fig, out.file(
                    out_dir / f"pr_{name}_{safe}_{cls}.svg"))

    if args.leads:
        analysis = temporal_lead_analysis(detections, frames,
                                          match_threshold=args.lead_threshold)
        save_figure(lead_histogram_figure(analysis),
                    out.file(out_dir / "lead_histogram.svg"))
        with open(out.file(out_dir / "leads.csv"), "w", encoding="utf-8",
                  newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["object_id", "lead_frames"])
            for oid in sorted(analysis.leads):
                writer.writerow([oid, analysis.leads[oid]])
    return 0


def _cmd_render(args: argparse.Namespace, config: dict, out: _Outputs) -> int:
    frames, manifest = read_dataset(args.dataset_dir)
    frame = _find_frame(frames, args.frame)
    params = _zone_params(args, config, base=manifest.zone_params)
    style = _style(args, config)
    save_figure(render_bev(frame, params=params, style=style),
                out.file(args.out))
    if args.camera_out is not None:
        save_figure(render_camera(frame, params=params, style=style),
                    out.file(args.camera_out))
    print(f"rendered frame {args.frame} to {args.out}")
    return 0


def _cmd_sweep(args: argparse.Namespace, config: dict, out: _Outputs) -> int:
    frames, manifest = read_dataset(args.dataset_dir)
    frame = _find_frame(frames, args.frame)
    params = _zone_params(args, config, base=manifest.zone_params)
    steers = tuple(math.radians(d) for d in args.steers_deg)
    result = sweep_ego_state(frame, args.speeds, steers, params)
    with open(out.file(args.out), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_id", "speed_mps", "steer_deg", "label"])
        for oid, speed, steer, label in result.rows():
            writer.writerow([oid, f"{speed:g}", f"{math.degrees(steer):g}",
                             label])
    if args.figure_out is not None:
        target = args.object or (result.object_ids[0]
                                 if result.object_ids else None)
        if target is None:
            raise InvalidInputError("no objects in frame to plot")
        save_figure(sweep_figure(result, target), out.file(args.figure_out))
    print(f"swept {len(result.object_ids)} objects over "
          f"{len(args.speeds)}x{len(steers)} grid to {args.out}")
    return 0


def _add_zone_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--zone.width", dest="zone_width", type=float,
                        metavar="M", help="danger zone width in meters")
    parser.add_argument("--zone.min-safe-distance", dest="zone_min_safe_distance",
                        type=float, metavar="M",
                        help="depth at zero speed in meters")
    parser.add_argument("--zone.speed-gain", dest="zone_speed_gain", type=float,
                        metavar="S", help="depth gain per unit speed in seconds")
    parser.add_argument("--zone.area-threshold", dest="zone_area_threshold",
                        type=float, metavar="M2",
                        help="overlap area needed for a harmful label")
    parser.add_argument("--zone.ratio-threshold", dest="zone_ratio_threshold",
                        type=float, metavar="R",
                        help="overlap/footprint ratio needed for harmful")


def _add_style_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--style.harmful-color", dest="style_harmful_color")
    parser.add_argument("--style.harmless-color", dest="style_harmless_color")
    parser.add_argument("--style.zone-color", dest="style_zone_color")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmkit",
        description="Danger-zone harm labeling, simulation, and evaluation.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a labeled dataset from a "
                                        "scenario file")
    p.add_argument("spec_file", help="scenario TOML file")
    p.add_argument("out_dir", help="dataset directory to create")
    p.add_argument("--config", help="TOML with [zone] overrides")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--fov-deg", type=float,
                   help="override the camera horizontal FOV in degrees")
    p.add_argument("--split", default="train",
                   choices=("train", "validation", "test"))
    _add_zone_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("stats", help="print the label/distribution table")
    p.add_argument("dataset_dir")
    p.add_argument("--config", help="unused; accepted for symmetry")
    p.add_argument("--out", help="also write the table to this file")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("detect", help="run the noise-model detector stub")
    p.add_argument("dataset_dir")
    p.add_argument("--out", required=True, help="detections file to write")
    p.add_argument("--config", help="TOML with [noise] overrides")
    p.add_argument("--noise", help="noise config TOML file")
    p.add_argument("--seed", type=int, help="override the noise seed")
    p.add_argument("--noise.center-sigma", dest="noise_center_sigma",
                   type=float)
    p.add_argument("--noise.miss-rate", dest="noise_miss_rate", type=float)
    p.add_argument("--noise.spurious-rate", dest="noise_spurious_rate",
                   type=float)
    p.add_argument("--noise.label-flip-rate", dest="noise_label_flip_rate",
                   type=float)
    p.add_argument("--noise.early-harm-frames", dest="noise_early_harm_frames",
                   type=int)
    p.add_argument("--noise.spurious-harmless-frac",
                   dest="noise_spurious_harmless_frac", type=float)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="score detections and write reports")
    p.add_argument("dataset_dir")
    p.add_argument("detections")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--config", help="TOML with [eval] overrides")
    p.add_argument("--variant", default="all",
                   choices=("all",) + tuple(v.value for v in Variant))
    p.add_argument("--thresholds", type=_float_list, metavar="M,M,...",
                   help="matching distance thresholds in meters")
    p.add_argument("--recall-points", type=int)
    p.add_argument("--no-audit", action="store_true",
                   help="omit the per-detection audit from report.json")
    p.add_argument("--leads", action="store_true",
                   help="also write harmful-onset lead analysis")
    p.add_argument("--lead-threshold", type=float, default=2.0,
                   help="matching distance for lead analysis (meters)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("render", help="render a frame to vector images")
    p.add_argument("dataset_dir")
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--out", required=True, help="bird's-eye-view image path")
    p.add_argument("--camera-out", help="also render the camera-plane view")
    p.add_argument("--config", help="TOML with [zone]/[style] overrides")
    _add_zone_flags(p)
    _add_style_flags(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("sweep", help="relabel a frame over a speed/steer grid")
    p.add_argument("dataset_dir")
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--speeds", type=_float_list, required=True,
                   metavar="MPS,MPS,...")
    p.add_argument("--steers-deg", type=_float_list, default=(0.0,),
                   metavar="DEG,DEG,...")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--figure-out", help="optional heatmap image path")
    p.add_argument("--object", help="object id for the heatmap "
                                    "(default: first)")
    p.add_argument("--config", help="TOML with [zone] overrides")
    _add_zone_flags(p)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outputs = _Outputs()
    try:
        config = _load_toml(args.config) if getattr(args, "config", None) else {}
        return args.func(args, config, outputs)
    except HarmkitError as exc:
        outputs.discard_all()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        outputs.discard_all()
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> int:
    return main()


if __name__ == "__main__":
    sys.exit(main())
