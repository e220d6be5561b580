"""harmkit: speed-scaled danger zones, binary harm labels, and
distribution-aware detection metrics for driving scenes.

The library models the ground area an ego vehicle is about to sweep
(depth grows with speed, orientation follows steering), labels every
scene object harmful or harmless by its footprint's overlap with that
area, simulates labeled scenarios, perturbs them through a configurable
detector stub, and scores the result with center-distance mAP variants
that keep in-distribution and out-of-distribution objects apart.
"""

from .classification import (Category, Distribution, HarmLabel, Polygon2D,
                             SceneObject, classify_object, convex_intersection,
                             footprint, in_front_fov, label_frame,
                             label_objects, polygon_area)
from .dataset import (DatasetManifest, StatsTable, compute_stats, read_dataset,
                      split_dataset, write_dataset)
from .detector_stub import (Detection, NoiseConfig, read_detections, run_stub,
                            write_detections)
from .errors import (ConfigError, DatasetFormatError, EvalInputError,
                     GenerationError, HarmkitError, InvalidInputError,
                     ProjectionError)
from .evaluation import (EvalConfig, EvalReport, LeadAnalysis, SweepResult,
                         Variant, average_precision, evaluate,
                         evaluate_all_variants, match_detections,
                         render_summary_table, sweep_ego_state,
                         temporal_lead_analysis)
from .geometry import (CameraModel, DangerZone, EgoState, Pose, ZoneParams,
                       build_danger_zone, canonical_float, ego_to_world_xy,
                       heading_vector, rotate_about_z, world_to_ego_xy,
                       zone_depth, zone_to_world)
from .render import (RenderStyle, lead_histogram_figure, pr_curve_figure,
                     render_bev, render_camera, save_figure, sweep_figure)
from .simulation import (CensusEntry, Frame, ScenarioSpec, ScriptedObject,
                         Waypoint, generate_scenario, kinematic_step,
                         ood_roster)

__version__ = "0.1.0"

__all__ = [
    "CameraModel", "Category", "CensusEntry", "ConfigError", "DangerZone",
    "DatasetFormatError", "DatasetManifest", "Detection", "Distribution",
    "EgoState", "EvalConfig", "EvalInputError", "EvalReport", "Frame",
    "GenerationError", "HarmLabel", "HarmkitError", "InvalidInputError",
    "LeadAnalysis", "NoiseConfig", "Polygon2D", "Pose", "ProjectionError",
    "RenderStyle", "ScenarioSpec", "SceneObject", "ScriptedObject",
    "StatsTable", "SweepResult", "Variant", "Waypoint", "ZoneParams",
    "average_precision", "build_danger_zone", "canonical_float",
    "classify_object", "compute_stats", "convex_intersection",
    "ego_to_world_xy", "evaluate", "evaluate_all_variants", "footprint",
    "generate_scenario", "heading_vector", "in_front_fov", "kinematic_step",
    "label_frame", "label_objects", "lead_histogram_figure",
    "match_detections", "ood_roster", "polygon_area", "pr_curve_figure",
    "read_dataset", "read_detections", "render_bev", "render_camera",
    "render_summary_table", "rotate_about_z", "run_stub", "save_figure",
    "split_dataset", "sweep_ego_state", "sweep_figure",
    "temporal_lead_analysis", "world_to_ego_xy", "write_dataset",
    "write_detections", "zone_depth", "zone_to_world",
]
