import subprocess
import sys

import pytest

from harmkit import (CensusEntry, Category, Distribution, EgoState, Frame,
                     HarmLabel, Pose, ScenarioSpec, SceneObject, Waypoint,
                     ZoneParams, generate_scenario, label_objects)


@pytest.fixture
def params():
    return ZoneParams()


def make_object(oid="obj_0", center=(0.0, 8.0, 0.0), dims=(4.5, 2.0, 1.6),
                yaw=0.0, category=Category.VEHICLE,
                distribution=Distribution.ID, kind="car", label=None):
    return SceneObject(id=oid, center=center, dims=dims, yaw=yaw,
                       category=category, distribution=distribution,
                       kind=kind, label=label)


def make_frame(ego=None, objects=(), fov=1.5707963267948966, index=0,
               timestamp=0.0, zone_params=None):
    """Build a labeled Frame from unlabeled objects."""
    ego = ego if ego is not None else EgoState(speed=5.0, steering_angle=0.0)
    labeled = label_objects(objects, ego, fov,
                            zone_params if zone_params else ZoneParams())
    return Frame(index=index, timestamp=timestamp, ego=ego,
                 objects=labeled, fov=fov)


def mixed_corridor_spec(seed=2024, duration=15.0):
    """Narrow-corridor scenario with all four (distribution, label) cells."""
    return ScenarioSpec(
        seed=seed, duration=duration, map_extent=(12.0, 90.0),
        census=(
            CensusEntry(category="static", distribution="ID", count=8),
            CensusEntry(category="static", distribution="OOD", count=7),
            CensusEntry(category="vehicle", distribution="ID", count=3),
            CensusEntry(category="pedestrian", distribution="ID", count=3),
        ),
        ego_script=(Waypoint(0.0, 6.0, 0.0),))


@pytest.fixture(scope="session")
def corridor_frames():
    return generate_scenario(mixed_corridor_spec())


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "harmkit.cli", *map(str, args)],
                          capture_output=True, text=True, cwd=cwd)
