import numpy as np
import pytest

from scenemix.ablations import (
    CutoutSpec,
    InstanceDb,
    InstancePlacement,
    build_instance_db,
    crop_cube_fraction,
    crop_sphere,
    cutout,
    isolate_instances,
    mix_instances,
    noise_near_surface,
    noise_uniform,
    remove_inside_boxes,
    sample_cutout_boxes,
)
from scenemix.core import PointCloud, aabb_of, random_cloud
from scenemix.errors import (
    EmptyCrop,
    EmptyInstanceSet,
    InconsistentInstance,
    MissingAttribute,
)


def instance_scene(rng, sizes=(30, 50, 20), labels=(3, 7, 3), background=40):
    """Scene with several blob instances plus instance-less background."""
    parts, inst, lab = [], [], []
    for i, (n, label) in enumerate(zip(sizes, labels), start=1):
        center = rng.uniform(0.0, 8.0, 3)
        parts.append(center + rng.normal(0.0, 0.3, (n, 3)))
        inst += [i] * n
        lab += [label] * n
    parts.append(rng.uniform(0.0, 8.0, (background, 3)))
    inst += [0] * background
    lab += [0] * background
    return PointCloud(
        positions=np.concatenate(parts),
        labels=np.array(lab),
        instances=np.array(inst),
    )


def position_set(cloud):
    return {tuple(p) for p in cloud.positions}


class TestCutout:
    def test_cut_count_matches_frequency(self, stream):
        cloud = random_cloud(stream("cut-n"), 10_000)
        boxes = sample_cutout_boxes(cloud, CutoutSpec((0.05, 2.0), 1.0), stream("cut-n-rng"))
        assert len(boxes) == 1
        boxes = sample_cutout_boxes(cloud, CutoutSpec((0.05, 0.5), 33.0), stream("cut-33"))
        assert len(boxes) == 33

    def test_zero_edges_remove_nothing(self, stream):
        cloud = random_cloud(stream("cut-0"), 1000)
        out = cutout(cloud, CutoutSpec((0.0, 0.0), 10.0), stream("cut-0-rng"))
        assert np.array_equal(out.positions, cloud.positions)

    def test_partition_against_brute_force(self, stream):
        cloud = random_cloud(stream("cut-part"), 2000)
        spec = CutoutSpec((0.2, 1.5), 10.0)
        boxes = sample_cutout_boxes(cloud, spec, stream("cut-part-rng"))
        survivors = remove_inside_boxes(cloud, boxes)

        def strictly_inside(p):
            return any(np.all(p > lo) and np.all(p < hi) for lo, hi in boxes)

        expected_keep = [i for i, p in enumerate(cloud.positions) if not strictly_inside(p)]
        assert np.array_equal(survivors.positions, cloud.positions[expected_keep])
        assert np.array_equal(survivors.labels, cloud.labels[expected_keep])
        # Partition: survivors + removed = original, removed all inside boxes.
        removed = [i for i in range(len(cloud)) if i not in set(expected_keep)]
        assert len(survivors) + len(removed) == len(cloud)
        for i in removed:
            assert strictly_inside(cloud.positions[i])
        for p in survivors.positions:
            assert not strictly_inside(p)

    def test_repeated_cutout_removes_superset(self, stream):
        cloud = random_cloud(stream("cut-2x"), 3000)
        spec = CutoutSpec((0.3, 1.0), 5.0)
        once = cutout(cloud, spec, stream("cut-2x-a"))
        twice = cutout(once, spec, stream("cut-2x-b"))
        assert position_set(twice) <= position_set(once) <= position_set(cloud)

    def test_cutting_everything_is_allowed(self, stream):
        cloud = random_cloud(stream("cut-all"), 100, extent=(0.1, 0.1, 0.1))
        out = cutout(cloud, CutoutSpec((50.0, 50.0), 1000.0), stream("cut-all-rng"))
        assert len(out) == 0


class TestNoiseNearSurface:
    def test_count_and_totals(self, stream):
        cloud = random_cloud(stream("nns"), 1000)
        out = noise_near_surface(cloud, stream("nns-rng"), fraction=0.2, radius=0.5)
        assert len(out) == 1200
        assert out.loss_mask.sum() == cloud.loss_mask.sum()

    def test_zero_fraction_identity(self, stream):
        cloud = random_cloud(stream("nns0"), 500)
        out = noise_near_surface(cloud, stream("nns0-rng"), fraction=0.0, radius=0.5)
        assert out is cloud

    def test_added_points_within_radius_of_an_original(self, stream):
        cloud = random_cloud(stream("nns-r"), 400)
        out = noise_near_surface(cloud, stream("nns-r-rng"), fraction=0.25, radius=0.5)
        added = out.positions[len(cloud):]
        deltas = added[:, None, :] - cloud.positions[None, :, :]
        nearest = np.sqrt((deltas ** 2).sum(axis=2)).min(axis=1)
        assert np.all(nearest <= 0.5 + 1e-12)

    def test_originals_untouched_and_added_unsupervised(self, stream):
        cloud = random_cloud(stream("nns-o"), 300)
        out = noise_near_surface(cloud, stream("nns-o-rng"), 0.2, 0.5, ignore_label=255)
        n = len(cloud)
        assert np.array_equal(out.positions[:n], cloud.positions)
        assert np.array_equal(out.colors[:n], cloud.colors)
        assert np.array_equal(out.labels[:n], cloud.labels)
        assert np.all(out.labels[n:] == 255)
        assert not out.loss_mask[n:].any()


class TestNoiseUniform:
    def test_exact_grid_extent(self, stream):
        cloud = PointCloud(positions=[(0.0, 0.0, 0.0), (1.2, 0.6, 0.6)])
        out = noise_uniform(cloud, stream("nu"), cell=0.6, offset=0.0)
        assert len(out) == len(cloud) + 2

    def test_zero_offset_lands_on_cell_centers(self, stream):
        cloud = PointCloud(positions=[(0.0, 0.0, 0.0), (1.2, 0.6, 0.6)])
        out = noise_uniform(cloud, stream("nu0"), cell=0.6, offset=0.0)
        added = out.positions[2:]
        expected = {(0.3, 0.3, 0.3), (0.9, 0.3, 0.3)}
        assert {tuple(np.round(p, 12)) for p in added} == expected

    def test_count_matches_grid_formula(self, stream):
        rng = stream("nu-count")
        for trial in range(10):
            cloud = random_cloud(rng.split(trial), 100,
                                 extent=(1.0 + trial * 0.37, 2.0, 1.3))
            out = noise_uniform(cloud, rng.split(f"rng{trial}"), cell=0.6, offset=0.1)
            extent = aabb_of(cloud).extent
            expected = int(np.prod(np.ceil(extent / 0.6 - 1e-9)))
            assert len(out) - len(cloud) == expected

    def test_offsets_bounded(self, stream):
        cloud = random_cloud(stream("nu-b"), 200, extent=(3.0, 3.0, 3.0))
        out = noise_uniform(cloud, stream("nu-b-rng"), cell=0.6, offset=0.1)
        added = out.positions[len(cloud):]
        box = aabb_of(cloud)
        counts = np.ceil(box.extent / 0.6 - 1e-9).astype(int)
        centers = np.stack(np.meshgrid(
            *[box.min_corner[d] + (np.arange(counts[d]) + 0.5) * 0.6 for d in range(3)],
            indexing="ij"), axis=-1).reshape(-1, 3)
        assert np.all(np.linalg.norm(added - centers, axis=1) <= 0.1 * np.sqrt(3) + 1e-12)


class TestInstanceDb:
    def test_entry_per_instance(self, stream):
        scene = instance_scene(stream("db"))
        db = build_instance_db([scene])
        assert len(db) == 3
        assert [e.label for e in db.entries] == [3, 7, 3]

    def test_entries_centered(self, stream):
        db = build_instance_db([instance_scene(stream("db-c"))])
        for entry in db.entries:
            assert np.linalg.norm(entry.cloud.positions.mean(axis=0)) < 1e-9

    def test_partition_counts(self, stream):
        scene = instance_scene(stream("db-p"), sizes=(10, 25, 40))
        db = build_instance_db([scene])
        assert sum(len(e.cloud) for e in db.entries) == int((scene.instances > 0).sum())

    def test_reconstruction_with_recorded_centroids(self, stream):
        scene = instance_scene(stream("db-r"))
        db = build_instance_db([scene])
        rebuilt = np.concatenate([
            entry.cloud.positions + entry.centroid for entry in db.entries
        ])
        original = scene.positions[scene.instances > 0]
        assert np.allclose(np.sort(rebuilt, axis=0), np.sort(original, axis=0), atol=1e-12)

    def test_conflicting_labels_rejected(self, stream):
        rng = stream("db-bad")
        scene = PointCloud(
            positions=rng.uniform(0, 1, (4, 3)),
            labels=[1, 2, 1, 1],
            instances=[1, 1, 2, 2],
        )
        with pytest.raises(InconsistentInstance):
            build_instance_db([scene])

    def test_missing_arrays_rejected(self, stream):
        cloud = random_cloud(stream("db-m"), 10, with_labels=True)
        with pytest.raises(MissingAttribute):
            build_instance_db([cloud])

    def test_save_load_round_trip(self, stream, tmp_path):
        db = build_instance_db([instance_scene(stream("db-io"))])
        db.save(tmp_path / "db")
        loaded = InstanceDb.load(tmp_path / "db")
        assert len(loaded) == len(db)
        for saved, again in zip(db.entries, loaded.entries):
            assert saved.label == again.label
            assert saved.scene_id == again.scene_id
            assert np.allclose(saved.cloud.positions, again.cloud.positions, atol=1e-6)


class TestMixInstances:
    def test_ratio_one_places_one_per_instance(self, stream):
        scene = instance_scene(stream("mi"), sizes=(10,) * 10, labels=(1,) * 10)
        db = build_instance_db([instance_scene(stream("mi-db"))])
        out = mix_instances(scene, db, 1.0, InstancePlacement.FREE, stream("mi-rng"))
        new_ids = np.setdiff1d(np.unique(out.instances), np.unique(scene.instances))
        assert len(new_ids) == 10

    def test_ratio_half_rounds(self, stream):
        scene = instance_scene(stream("mi2"), sizes=(10,) * 10, labels=(2,) * 10)
        db = build_instance_db([instance_scene(stream("mi2-db"))])
        out = mix_instances(scene, db, 0.5, InstancePlacement.FREE, stream("mi2-rng"))
        new_ids = np.setdiff1d(np.unique(out.instances), np.unique(scene.instances))
        assert len(new_ids) == 5

    def test_ratio_zero_identity(self, stream):
        scene = instance_scene(stream("mi0"))
        db = build_instance_db([instance_scene(stream("mi0-db"))])
        out = mix_instances(scene, db, 0.0, InstancePlacement.FREE, stream("mi0-rng"))
        assert out is scene

    def test_overlapping_placement_lands_on_existing_centroids(self, stream):
        scene = instance_scene(stream("mi-ov"))
        db = build_instance_db([instance_scene(stream("mi-ov-db"))])
        out = mix_instances(scene, db, 1.0, InstancePlacement.OVERLAPPING, stream("mi-ov-rng"))
        existing_centroids = np.stack([
            scene.positions[scene.instances == i].mean(axis=0)
            for i in np.unique(scene.instances) if i > 0
        ])
        for new_id in np.setdiff1d(np.unique(out.instances), np.unique(scene.instances)):
            placed_centroid = out.positions[out.instances == new_id].mean(axis=0)
            nearest = np.linalg.norm(existing_centroids - placed_centroid, axis=1).min()
            assert nearest < 1e-9

    def test_free_placement_inside_scene_box(self, stream):
        scene = instance_scene(stream("mi-fr"))
        db = build_instance_db([instance_scene(stream("mi-fr-db"))])
        out = mix_instances(scene, db, 1.0, InstancePlacement.FREE, stream("mi-fr-rng"))
        box = aabb_of(scene)
        for new_id in np.setdiff1d(np.unique(out.instances), np.unique(scene.instances)):
            placed_centroid = out.positions[out.instances == new_id].mean(axis=0)
            assert np.all(placed_centroid >= box.min_corner - 1e-9)
            assert np.all(placed_centroid <= box.max_corner + 1e-9)

    def test_placed_points_keep_semantic_labels(self, stream):
        scene = instance_scene(stream("mi-lab"))
        db = build_instance_db([instance_scene(stream("mi-lab-db"), labels=(11, 12, 13))])
        out = mix_instances(scene, db, 1.0, InstancePlacement.FREE, stream("mi-lab-rng"))
        for new_id in np.setdiff1d(np.unique(out.instances), np.unique(scene.instances)):
            labels = np.unique(out.labels[out.instances == new_id])
            assert len(labels) == 1 and labels[0] in (11, 12, 13)

    def test_no_instances_rejected(self, stream):
        rng = stream("mi-none")
        scene = PointCloud(positions=rng.uniform(0, 1, (10, 3)),
                           labels=np.zeros(10, dtype=np.int64),
                           instances=np.zeros(10, dtype=np.int64))
        db = build_instance_db([instance_scene(stream("mi-none-db"))])
        with pytest.raises(EmptyInstanceSet):
            mix_instances(scene, db, 1.0, InstancePlacement.FREE, stream("mi-none-rng"))


class TestCrops:
    def test_full_fraction_identity(self, stream):
        cloud = random_cloud(stream("cc1"), 300)
        out = crop_cube_fraction(cloud, 1.0, stream("cc1-rng"))
        assert np.array_equal(out.positions, cloud.positions)

    @pytest.mark.parametrize("fraction", [0.25, 1 / 16])
    def test_uniform_density_retention(self, stream, fraction):
        rng = stream(f"cc-{fraction}")
        n = 20_000
        cloud = random_cloud(rng, n, extent=(1.0, 1.0, 1.0))
        counts = []
        for trial in range(5):
            out = crop_cube_fraction(cloud, fraction, rng.split(trial))
            counts.append(len(out))
        mean_kept = np.mean(counts)
        assert abs(mean_kept - fraction * n) <= 0.1 * fraction * n

    def test_survivors_inside_crop_box(self, stream):
        cloud = random_cloud(stream("cc-in"), 2000)
        rng = stream("cc-in-rng")
        out = crop_cube_fraction(cloud, 0.3, rng)
        # Replay the box draw to check the filter exactly.
        replay = stream("cc-in-rng")
        box = aabb_of(cloud)
        edge = 0.3 ** (1 / 3) * box.extent
        lo = box.min_corner + replay.uniform(0.0, 1.0, 3) * (box.extent - edge)
        hi = lo + edge
        keep = np.all(cloud.positions >= lo, axis=1) & np.all(cloud.positions <= hi, axis=1)
        assert np.array_equal(out.positions, cloud.positions[keep])

    def test_sphere_radius_covers_everything(self, stream):
        cloud = random_cloud(stream("cs-all"), 200, extent=(1.0, 1.0, 1.0))
        out = crop_sphere(cloud, stream("cs-all-rng"), radius=10.0)
        assert np.array_equal(out.positions, cloud.positions)

    def test_sphere_tiny_radius_keeps_center(self, stream):
        cloud = random_cloud(stream("cs-tiny"), 200)
        out = crop_sphere(cloud, stream("cs-tiny-rng"), radius=1e-12)
        assert len(out) >= 1

    def test_sphere_matches_distance_filter(self, stream):
        cloud = random_cloud(stream("cs-f"), 1500)
        out = crop_sphere(cloud, stream("cs-f-rng"), radius=1.0)
        replay = stream("cs-f-rng")
        center = cloud.positions[int(replay.integers(0, len(cloud)))]
        keep = np.linalg.norm(cloud.positions - center, axis=1) <= 1.0
        assert np.array_equal(out.positions, cloud.positions[keep])

    def test_sphere_monotone_in_radius(self, stream):
        cloud = random_cloud(stream("cs-m"), 800)
        small = crop_sphere(cloud, stream("cs-m-rng"), radius=0.5)
        large = crop_sphere(cloud, stream("cs-m-rng"), radius=1.5)
        assert position_set(small) <= position_set(large)

    def test_empty_crop_after_retries(self, stream):
        cloud = PointCloud(positions=[(0.0, 0.0, 0.0), (100.0, 100.0, 100.0)])
        with pytest.raises(EmptyCrop):
            crop_cube_fraction(cloud, 1e-9, stream("cc-empty"))


class TestIsolateInstances:
    def test_sizes_partition(self, stream):
        scene = instance_scene(stream("iso"), sizes=(3, 5), labels=(1, 2), background=7)
        parts = isolate_instances(scene)
        assert [len(p) for p in parts] == [3, 5]
        merged = np.concatenate([p.positions for p in parts])
        assert np.array_equal(merged, scene.positions[scene.instances > 0])

    def test_single_id_per_output(self, stream):
        scene = instance_scene(stream("iso-1"))
        for part in isolate_instances(scene):
            assert len(np.unique(part.instances)) == 1

    def test_first_appearance_order(self, stream):
        scene = PointCloud(
            positions=np.arange(12, dtype=float).reshape(4, 3),
            labels=[1, 1, 2, 2],
            instances=[5, 5, 2, 2],
        )
        parts = isolate_instances(scene)
        assert [int(p.instances[0]) for p in parts] == [5, 2]

    def test_missing_instances_rejected(self, stream):
        with pytest.raises(MissingAttribute):
            isolate_instances(random_cloud(stream("iso-m"), 10))
