import json
import math

import pytest

from conftest import make_frame, make_object
from harmkit import (Category, DatasetFormatError, DatasetManifest,
                     Distribution, EgoState, InvalidInputError, ScenarioSpec,
                     ZoneParams, compute_stats, generate_scenario,
                     read_dataset, split_dataset, write_dataset)


def small_frames(seed=7):
    spec = ScenarioSpec(seed=seed, duration=1.5, sample_period=0.3,
                        map_extent=(30.0, 60.0))
    return generate_scenario(spec)


def manifest_for(frames, split="train", seeds=(7,)):
    return DatasetManifest(name="unit", split=split, frame_count=len(frames),
                           scenario_seeds=seeds, zone_params=ZoneParams())


@pytest.fixture
def sample_objects():
    car = make_object(oid="car_a", center=(0.0, 8.0, 0.0))
    barrel = make_object(oid="barrel_b", center=(10.0, 20.0, 0.0),
                         dims=(0.6, 0.6, 0.9), category=Category.STATIC,
                         distribution=Distribution.OOD, kind="barrel")
    ped = make_object(oid="ped_c", center=(-5.0, 10.0, 0.0),
                      dims=(0.6, 0.6, 1.8), category=Category.PEDESTRIAN,
                      distribution=Distribution.ID, kind="person")
    return car, barrel, ped


class TestRoundTrip:
    def test_read_back_equal(self, tmp_path):
        frames = small_frames()
        write_dataset(frames, manifest_for(frames), tmp_path / "ds")
        got, manifest = read_dataset(tmp_path / "ds")
        assert got == frames
        assert manifest == manifest_for(frames)

    def test_rewrite_is_byte_identical(self, tmp_path):
        frames = small_frames()
        write_dataset(frames, manifest_for(frames), tmp_path / "a")
        got, manifest = read_dataset(tmp_path / "a")
        write_dataset(got, manifest, tmp_path / "b")
        for name in ("manifest", "frames.train"):
            assert ((tmp_path / "a" / name).read_bytes()
                    == (tmp_path / "b" / name).read_bytes())

    def test_empty_dataset(self, tmp_path):
        write_dataset((), manifest_for(()), tmp_path / "ds")
        got, manifest = read_dataset(tmp_path / "ds")
        assert got == ()
        assert manifest.frame_count == 0

    def test_floats_stored_with_nine_digits(self, tmp_path):
        ego = EgoState(speed=math.pi, steering_angle=0.0)
        frames = (make_frame(ego=ego),)
        write_dataset(frames, manifest_for(frames), tmp_path / "ds")
        text = (tmp_path / "ds" / "frames.train").read_text()
        assert '"speed": 3.14159265' in text
        got, _ = read_dataset(tmp_path / "ds")
        assert got[0].ego.speed == 3.14159265

    def test_overwrite_same_directory(self, tmp_path):
        frames = small_frames()
        write_dataset(frames, manifest_for(frames), tmp_path / "ds")
        write_dataset(frames, manifest_for(frames), tmp_path / "ds")
        got, _ = read_dataset(tmp_path / "ds")
        assert got == frames


class TestWriteErrors:
    def test_count_mismatch(self, tmp_path):
        frames = small_frames()
        bad = manifest_for(frames[:-1])
        with pytest.raises(DatasetFormatError, match="does not match"):
            write_dataset(frames, bad, tmp_path / "ds")

    def test_lock_held(self, tmp_path):
        target = tmp_path / "ds"
        target.mkdir()
        (target / ".lock").touch()
        frames = small_frames()
        with pytest.raises(DatasetFormatError, match="locked"):
            write_dataset(frames, manifest_for(frames), target)

    def test_lock_released_after_write(self, tmp_path):
        frames = small_frames()
        write_dataset(frames, manifest_for(frames), tmp_path / "ds")
        assert not (tmp_path / "ds" / ".lock").exists()


class TestReadErrors:
    def write_valid(self, tmp_path):
        frames = small_frames()
        write_dataset(frames, manifest_for(frames), tmp_path / "ds")
        return tmp_path / "ds"

    def test_missing_manifest(self, tmp_path):
        (tmp_path / "ds").mkdir()
        with pytest.raises(DatasetFormatError, match="manifest not found"):
            read_dataset(tmp_path / "ds")

    def test_version_mismatch(self, tmp_path):
        ds = self.write_valid(tmp_path)
        raw = json.loads((ds / "manifest").read_text())
        raw["format_version"] = "0"
        (ds / "manifest").write_text(json.dumps(raw))
        with pytest.raises(DatasetFormatError, match="format_version"):
            read_dataset(ds)

    def test_malformed_line_reports_location(self, tmp_path):
        ds = self.write_valid(tmp_path)
        frames_path = ds / "frames.train"
        lines = frames_path.read_text().splitlines()
        lines[1] = "{not json}"
        frames_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError) as err:
            read_dataset(ds)
        assert err.value.line_number == 2
        assert str(frames_path) in str(err.value)

    def test_truncated_frames_file(self, tmp_path):
        ds = self.write_valid(tmp_path)
        frames_path = ds / "frames.train"
        lines = frames_path.read_text().splitlines()
        frames_path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DatasetFormatError, match="does not match"):
            read_dataset(ds)

    def test_manifest_split_validation(self):
        with pytest.raises(InvalidInputError, match="split"):
            DatasetManifest(name="x", split="dev", frame_count=0,
                            scenario_seeds=(), zone_params=ZoneParams())


class TestStats:
    def test_empty(self):
        stats = compute_stats(())
        assert stats.total() == 0
        assert stats.rows() == []

    def test_hand_built_counts(self, sample_objects):
        car, barrel, ped = sample_objects
        frames = (make_frame(objects=(car, barrel), index=0),
                  make_frame(objects=(car, barrel, ped), index=1,
                             timestamp=0.3))
        stats = compute_stats(frames)
        assert stats.counts[("vehicle", "ID", "harmful")] == 2
        assert stats.counts[("static", "OOD", "harmless")] == 2
        assert stats.counts[("pedestrian", "ID", "harmless")] == 1
        assert stats.total() == 5
        assert stats.count(category="vehicle") == 2
        assert stats.count(distribution="ID") == 3
        assert stats.count(label="harmless") == 3
        assert stats.ood_id_row_ratio() == pytest.approx(2.0 / 3.0)

    def test_ratio_needs_id_rows(self, sample_objects):
        _, barrel, _ = sample_objects
        stats = compute_stats((make_frame(objects=(barrel,)),))
        with pytest.raises(InvalidInputError, match="ratio undefined"):
            stats.ood_id_row_ratio()

    def test_text_table(self, sample_objects):
        car, barrel, ped = sample_objects
        stats = compute_stats((make_frame(objects=(car, barrel, ped)),))
        text = stats.as_text()
        assert "category" in text.splitlines()[0]
        assert text.splitlines()[-1].startswith("total")
        # cells with no rows stay out of the table
        assert "  OOD" not in [ln for ln in text.splitlines()
                               if ln.startswith("vehicle")]


class TestSplitDataset:
    def specs(self, n):
        return [ScenarioSpec(seed=i, duration=0.3) for i in range(n)]

    def test_basic_partition(self):
        out = split_dataset(self.specs(10), {"train": 0.8, "test": 0.2},
                            seed=5)
        assert len(out["train"].scenario_seeds) == 8
        assert len(out["test"].scenario_seeds) == 2
        train = set(out["train"].scenario_seeds)
        test = set(out["test"].scenario_seeds)
        assert train.isdisjoint(test)
        assert train | test == set(range(10))

    def test_deterministic(self):
        a = split_dataset(self.specs(10), {"train": 0.8, "test": 0.2}, seed=5)
        b = split_dataset(self.specs(10), {"train": 0.8, "test": 0.2}, seed=5)
        assert a == b

    def test_three_way_no_leakage(self):
        ratios = {"train": 0.6, "validation": 0.2, "test": 0.2}
        out = split_dataset(self.specs(100), ratios, seed=9)
        seeds = [set(m.scenario_seeds) for m in out.values()]
        assert sum(len(s) for s in seeds) == 100
        assert set().union(*seeds) == set(range(100))
        assert [len(out[k].scenario_seeds)
                for k in ("train", "validation", "test")] == [60, 20, 20]

    def test_every_split_nonempty(self):
        out = split_dataset(self.specs(3),
                            {"train": 0.98, "validation": 0.01, "test": 0.01},
                            seed=1)
        assert all(len(m.scenario_seeds) >= 1 for m in out.values())

    def test_errors(self):
        with pytest.raises(InvalidInputError, match="cannot fill"):
            split_dataset(self.specs(1), {"train": 0.5, "test": 0.5}, seed=1)
        with pytest.raises(InvalidInputError, match="sum to 1"):
            split_dataset(self.specs(4), {"train": 0.5, "test": 0.2}, seed=1)
        with pytest.raises(InvalidInputError, match="unknown split"):
            split_dataset(self.specs(4), {"train": 0.5, "dev": 0.5}, seed=1)
        dup = [ScenarioSpec(seed=1, duration=0.3),
               ScenarioSpec(seed=1, duration=0.6)]
        with pytest.raises(InvalidInputError, match="unique"):
            split_dataset(dup, {"train": 0.5, "test": 0.5}, seed=1)

    def test_zone_params_carried(self):
        params = ZoneParams(min_safe_distance=6.0)
        out = split_dataset(self.specs(4), {"train": 0.5, "test": 0.5},
                            seed=2, zone_params=params)
        assert out["train"].zone_params == params
