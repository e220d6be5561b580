"""Matplotlib figure builders for zones, frames, PR curves, and sweeps.

Figures are constructed directly (Figure + Agg canvas) so rendering never
touches global pyplot state and stays safe in headless or threaded use.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.patches import Polygon as MplPolygon

from .classification import HarmLabel, Polygon2D, convex_intersection, footprint
from .errors import InvalidInputError
from .evaluation import EvalReport, LeadAnalysis, SweepResult
from .geometry import (CameraModel, ZoneParams, build_danger_zone,
                       ego_to_world_xy, zone_to_world)
from .simulation import Frame

_NEAR_PLANE_M = 0.05
_FAR_PLANE_M = 1e6


@dataclass(frozen=True)
class RenderStyle:
    harmful_color: str = "tab:red"
    harmless_color: str = "tab:blue"
    zone_color: str = "tab:green"
    zone_alpha: float = 0.25
    figure_size: tuple[float, float] = (7.0, 7.0)
    dpi: int = 100

    def __post_init__(self) -> None:
        colors = (self.harmful_color, self.harmless_color, self.zone_color)
        if len(set(colors)) != 3:
            raise InvalidInputError("style colors must be pairwise distinct")
        if not (0.0 <= self.zone_alpha <= 1.0):
            raise InvalidInputError("zone_alpha must be within [0, 1]")


def _new_figure(style: RenderStyle) -> Figure:
    fig = Figure(figsize=style.figure_size, dpi=style.dpi)
    FigureCanvasAgg(fig)
    return fig


def render_bev(frame: Frame, params: ZoneParams | None = None,
               style: RenderStyle | None = None) -> Figure:
    """Top-down world-frame view: danger zone, footprints, ego arrow."""
    params = params if params is not None else ZoneParams()
    style = style if style is not None else RenderStyle()
    fig = _new_figure(style)
    ax = fig.add_subplot(111)

    zone = zone_to_world(build_danger_zone(frame.ego, params), frame.ego.pose)
    zone_xy = np.asarray(zone.vertices)
    ax.add_patch(MplPolygon(zone_xy, closed=True, facecolor=style.zone_color,
                            edgecolor=style.zone_color, alpha=style.zone_alpha,
                            label="danger zone"))

    seen = set()
    for obj in frame.objects:
        poly = footprint(obj)
        color = (style.harmful_color if obj.label is HarmLabel.HARMFUL
                 else style.harmless_color)
        label = obj.label.value if obj.label.value not in seen else None
        seen.add(obj.label.value)
        ax.add_patch(MplPolygon(np.asarray(poly.vertices), closed=True,
                                facecolor="none", edgecolor=color,
                                linewidth=1.5, label=label))
        ax.annotate(obj.id, (obj.center[0], obj.center[1]), fontsize=7,
                    ha="center", va="center", color=color)

    pose = frame.ego.pose
    tip = ego_to_world_xy(np.array([0.0, 2.0]), pose)
    ax.plot([pose.x], [pose.y], marker="o", color="black", label="ego")
    ax.annotate("", xy=(float(tip[0]), float(tip[1])), xytext=(pose.x, pose.y),
                arrowprops={"arrowstyle": "->", "color": "black"})

    pts = [zone_xy] + [np.asarray(footprint(o).vertices) for o in frame.objects]
    allpts = np.vstack(pts + [np.array([[pose.x, pose.y]])])
    lo = allpts.min(axis=0) - 3.0
    hi = allpts.max(axis=0) + 3.0
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.set_xlabel("world x [m]")
    ax.set_ylabel("world y [m]")
    ax.set_title(f"frame {frame.index} (t={frame.timestamp:g}s)")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def render_camera(frame: Frame, camera: CameraModel | None = None,
                  params: ZoneParams | None = None,
                  style: RenderStyle | None = None) -> Figure:
    """Image-plane view of the danger zone through a forward pinhole camera.

    The zone polygon is clipped to the ego-frame strip in front of the
    camera before projection, so the near edge at the bumper never reaches
    the projective singularity.
    """
    params = params if params is not None else ZoneParams()
    style = style if style is not None else RenderStyle()
    camera = camera if camera is not None else CameraModel(
        position=(0.0, 0.0, frame.cam_height))
    fig = _new_figure(style)
    ax = fig.add_subplot(111)

    zone = build_danger_zone(frame.ego, params)
    half_span = _FAR_PLANE_M
    front_strip = Polygon2D(vertices=(
        (-half_span, _NEAR_PLANE_M), (half_span, _NEAR_PLANE_M),
        (half_span, _FAR_PLANE_M), (-half_span, _FAR_PLANE_M)))
    visible = convex_intersection(Polygon2D(vertices=zone.vertices), front_strip)
    if visible is not None:
        pts3 = np.array([[x, y, 0.0] for x, y in visible.vertices])
        pixels = camera.project(pts3)
        ax.add_patch(MplPolygon(pixels, closed=True, facecolor=style.zone_color,
                                edgecolor=style.zone_color,
                                alpha=style.zone_alpha, label="danger zone"))
        ax.legend(loc="upper right", fontsize=8)

    ax.set_xlim(0, camera.width)
    ax.set_ylim(camera.height, 0)  # image rows grow downward
    ax.set_aspect("equal")
    ax.set_xlabel("u [px]")
    ax.set_ylabel("v [px]")
    ax.set_title(f"camera view, frame {frame.index}")
    return fig


def pr_curve_figure(report: EvalReport, group: str, cls: str,
                    style: RenderStyle | None = None) -> Figure:
    """Precision-recall polyline per distance threshold for one cell."""
    style = style if style is not None else RenderStyle()
    fig = _new_figure(style)
    ax = fig.add_subplot(111)
    drew = False
    for thr in report.config.distance_thresholds:
        key = (group, cls, thr)
        if key not in report.curves:
            continue
        recalls, precisions = report.curves[key]
        ap = report.groups[group].ap.get(cls, {}).get(thr)
        suffix = f" (AP {ap:.3f})" if ap is not None else ""
        ax.plot((0.0,) + recalls, (1.0,) + precisions, drawstyle="steps-post",
                label=f"d={thr:g}m{suffix}")
        drew = True
    ax.set_xlim(0, 1.0)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title(f"{group} / {cls} ({report.config.variant.value})")
    if drew:
        ax.legend(loc="lower left", fontsize=8)
    ax.grid(True, alpha=0.3)
    return fig


def lead_histogram_figure(analysis: LeadAnalysis,
                          style: RenderStyle | None = None) -> Figure:
    """Bar chart of onset leads (negative = earlier than ground truth)."""
    style = style if style is not None else RenderStyle()
    fig = _new_figure(style)
    ax = fig.add_subplot(111)
    hist = analysis.histogram()
    if hist:
        leads = sorted(hist)
        ax.bar(leads, [hist[k] for k in leads], color="tab:purple", width=0.8)
        ax.set_xticks(leads)
    ax.set_xlabel("onset lead [frames]")
    ax.set_ylabel("object tracks")
    ax.set_title("predicted vs. true harmful onset")
    ax.grid(True, axis="y", alpha=0.3)
    return fig


def sweep_figure(result: SweepResult, object_id: str,
                 style: RenderStyle | None = None) -> Figure:
    """Speed/steer grid for one object, shaded by harm label."""
    style = style if style is not None else RenderStyle()
    if object_id not in result.object_ids:
        raise InvalidInputError(f"unknown object id {object_id!r}")
    i = result.object_ids.index(object_id)
    grid = np.array([[1.0 if lbl is HarmLabel.HARMFUL else 0.0
                      for lbl in per_speed] for per_speed in result.labels[i]])
    fig = _new_figure(style)
    ax = fig.add_subplot(111)
    ax.imshow(grid, origin="lower", aspect="auto", cmap="RdYlGn_r",
              vmin=0.0, vmax=1.0, interpolation="nearest")
    ax.set_xticks(range(len(result.steers)))
    ax.set_xticklabels([f"{np.degrees(s):.0f}" for s in result.steers],
                       fontsize=7)
    ax.set_yticks(range(len(result.speeds)))
    ax.set_yticklabels([f"{s:g}" for s in result.speeds], fontsize=7)
    ax.set_xlabel("steering [deg]")
    ax.set_ylabel("speed [m/s]")
    ax.set_title(f"harm label sweep: {object_id}")
    return fig


def save_figure(fig: Figure, path: str | Path) -> Path:
    """Write the figure; SVG output is scrubbed of timestamps so repeated
    renders are byte-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".svg":
        # fixed hash salt: element ids are otherwise salted per process and
        # identical figures would serialize differently on every run
        with matplotlib.rc_context({"svg.hashsalt": "harmkit"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    else:
        fig.savefig(path)
    return path
