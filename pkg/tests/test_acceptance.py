"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; the whole suite is designed to finish well under a minute.
"""

import json
import shutil

import numpy as np

from scenemix.ablations import (
    CutoutSpec,
    InstancePlacement,
    build_instance_db,
    crop_cube_fraction,
    mix_instances,
    noise_near_surface,
    noise_uniform,
    remove_inside_boxes,
    sample_cutout_boxes,
)
from scenemix.core import (
    PointCloud,
    aabb_of,
    centroid,
    derive_stream,
    random_cloud,
)
from scenemix.io import (
    PackedLabel,
    read_kitti_bin,
    read_kitti_labels,
    read_ply,
    write_kitti_bin,
    write_kitti_labels,
    write_ply,
)
from scenemix.mixing import (
    FarApart,
    MixPolicy,
    NearbyNoOverlap,
    Overlap,
    compose_batch,
    mix,
    mix_k,
    mix_unlabeled,
)
from scenemix.pipeline import parse_config, run
from scenemix.transforms import (
    AugmentParams,
    build_elastic_field,
    center_at_origin,
    elastic_distort,
    random_flip,
    random_rotate,
    random_scale,
    voxelize,
)


def announce(number: int, text: str):
    print(f"[PASS] criterion {number:2d}: {text}")


def centered(rng, n, **kwargs):
    cloud, _ = center_at_origin(random_cloud(rng, n, **kwargs))
    return cloud


def test_criterion_01_mixing_cardinality_and_alignment():
    rng = derive_stream(101, 0, 0, "acceptance1")
    for trial in range(200):
        na = int(rng.split(f"na{trial}").integers(10, 10_001))
        nb = int(rng.split(f"nb{trial}").integers(10, 10_001))
        a = random_cloud(rng.split(f"a{trial}"), na)
        b = random_cloud(rng.split(f"b{trial}"), nb)
        sample = mix(a, b, Overlap(), rng.split(f"mix{trial}"))
        assert len(sample.cloud) == na + nb
        assert np.array_equal(sample.cloud.labels,
                              np.concatenate([a.labels, b.labels]))
    announce(1, "mix cardinality |A|+|B| and exact label concatenation, 200 pairs")


def test_criterion_02_placement_contract():
    rng = derive_stream(102, 0, 0, "acceptance2")
    gap = 0.4
    distance = 500.0
    for trial in range(100):
        a = centered(rng.split(f"a{trial}"), 120)
        b = centered(rng.split(f"b{trial}"), 110)

        overlap = mix(a, b, Overlap(), rng.split(f"ov{trial}"))
        box_a = aabb_of(overlap.cloud.select(overlap.provenance == 0))
        box_b = aabb_of(overlap.cloud.select(overlap.provenance == 1))
        assert box_a.intersection_volume(box_b) > 0.0

        nearby = mix(a, b, NearbyNoOverlap(gap), rng.split(f"nb{trial}"))
        box_a = aabb_of(nearby.cloud.select(nearby.provenance == 0))
        box_b = aabb_of(nearby.cloud.select(nearby.provenance == 1))
        assert box_a.intersection(box_b) is None
        assert gap <= box_a.gap_to(box_b) <= gap + 0.01

        far = mix(a, b, FarApart(distance), rng.split(f"fa{trial}"))
        part_a = far.cloud.select(far.provenance == 0)
        part_b = far.cloud.select(far.provenance == 1)
        d = np.linalg.norm(centroid(part_b) - centroid(part_a))
        assert abs(d - distance) < 1e-9
        assert aabb_of(part_a).intersection(aabb_of(part_b)) is None
    announce(2, "overlap volume > 0; nearby gap in [g, g+1cm]; far centers at d +/- 1e-9")


def test_criterion_03_rigid_isometry_and_scale_interval():
    rng = derive_stream(103, 0, 0, "acceptance3")
    cloud = random_cloud(rng.split("cloud"), 3000)
    i = rng.split("i").integers(0, len(cloud), 1000)
    j = rng.split("j").integers(0, len(cloud), 1000)
    keep = i != j
    i, j = i[keep], j[keep]
    before = np.linalg.norm(cloud.positions[i] - cloud.positions[j], axis=1)

    flipped, _ = random_flip(cloud, rng.split("flip"),
                             AugmentParams(flip_prob_per_horizontal_axis=1.0))
    after = np.linalg.norm(flipped.positions[i] - flipped.positions[j], axis=1)
    assert np.max(np.abs(after - before) / before) < 1e-9

    rotated, _ = random_rotate(cloud, rng.split("rot"), AugmentParams())
    after = np.linalg.norm(rotated.positions[i] - rotated.positions[j], axis=1)
    assert np.max(np.abs(after - before) / before) < 1e-9

    scaled, record = random_scale(cloud, rng.split("scale"), AugmentParams())
    after = np.linalg.norm(scaled.positions[i] - scaled.positions[j], axis=1)
    assert np.max(np.abs(after - before * record.scale_factor) / before) < 1e-9

    tiny = PointCloud(positions=[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)])
    params = AugmentParams(scale=(0.9, 1.1))
    draws = rng.split("draws")
    factors = np.array([
        random_scale(tiny, draws.split(t), params)[1].scale_factor
        for t in range(10_000)
    ])
    assert factors.min() >= 0.9 and factors.max() <= 1.1
    announce(3, "flip/rotate isometric to 1e-9; scale exact by s, s in [0.9, 1.1] over 1e4")


def test_criterion_04_elastic_distortion_oracle():
    rng = derive_stream(104, 0, 0, "acceptance4")
    cloud = random_cloud(rng.split("cloud"), 400)
    field = build_elastic_field(aabb_of(cloud), 0.25, 0.6, rng.split("field"))
    queries = cloud.positions[rng.split("q").integers(0, len(cloud), 300)]
    got = field.evaluate(queries)
    for q, value in zip(queries, got):
        local = (q - field.origin) / field.granularity
        base = np.floor(local).astype(int)
        frac = local - base
        expected = np.zeros(3)
        for corner in range(8):
            dx, dy, dz = (corner >> 2) & 1, (corner >> 1) & 1, corner & 1
            weight = ((frac[0] if dx else 1 - frac[0])
                      * (frac[1] if dy else 1 - frac[1])
                      * (frac[2] if dz else 1 - frac[2]))
            expected = expected + weight * field.displacement[
                base[0] + dx, base[1] + dy, base[2] + dz]
        assert np.all(np.abs(value - expected) < 1e-12)

    unchanged = elastic_distort(cloud, rng.split("zero"), 0.3, 0.0)
    assert np.array_equal(unchanged.positions, cloud.positions)
    announce(4, "trilinear evaluation matches 8-corner brute force to 1e-12; magnitude 0 is identity")


def test_criterion_05_noise_counts_and_distances():
    rng = derive_stream(105, 0, 0, "acceptance5")
    cloud = random_cloud(rng.split("cloud"), 1000)

    near = noise_near_surface(cloud, rng.split("near"), fraction=0.2, radius=0.5)
    n_added = len(near) - len(cloud)
    assert n_added == round(0.2 * len(cloud))
    added = near.positions[len(cloud):]
    deltas = added[:, None, :] - cloud.positions[None, :, :]
    nearest = np.sqrt((deltas ** 2).sum(axis=2)).min(axis=1)
    assert np.all(nearest <= 0.5 + 1e-12)

    grid = noise_uniform(cloud, rng.split("grid"), cell=0.6, offset=0.1)
    extent = aabb_of(cloud).extent
    expected = int(np.prod(np.ceil(extent / 0.6)))
    assert len(grid) - len(cloud) == expected
    box = aabb_of(cloud)
    counts = np.ceil(extent / 0.6).astype(int)
    centers = np.stack(np.meshgrid(
        *[box.min_corner[d] + (np.arange(counts[d]) + 0.5) * 0.6 for d in range(3)],
        indexing="ij"), axis=-1).reshape(-1, 3)
    offsets = np.linalg.norm(grid.positions[len(cloud):] - centers, axis=1)
    assert np.all(offsets <= 0.1 * np.sqrt(3) + 1e-12)
    announce(5, "near-surface adds round(0.2N) within 0.5m; grid noise count and offsets exact")


def test_criterion_06_cutout_partition():
    rng = derive_stream(106, 0, 0, "acceptance6")
    cloud = random_cloud(rng.split("cloud"), 10_000)
    spec = CutoutSpec(edge_range=(0.05, 2.0), cuts_per_10k=1.0)
    boxes = sample_cutout_boxes(cloud, spec, rng.split("boxes"))
    assert len(boxes) == round(1.0 * len(cloud) / 1e4) == 1

    spec = CutoutSpec(edge_range=(0.2, 1.5), cuts_per_10k=8.0)
    boxes = sample_cutout_boxes(cloud, spec, rng.split("boxes8"))
    assert len(boxes) == 8
    survivors = remove_inside_boxes(cloud, boxes)

    def strictly_inside(p):
        return any(np.all(p > lo) and np.all(p < hi) for lo, hi in boxes)

    survivor_keys = [tuple(p) for p in survivors.positions]
    original_keys = [tuple(p) for p in cloud.positions]
    removed_keys = []
    surviving = set(survivor_keys)
    for key in original_keys:
        if key not in surviving:
            removed_keys.append(key)
    assert sorted(survivor_keys + removed_keys) == sorted(original_keys)
    for key in removed_keys:
        assert strictly_inside(np.array(key))
    for key in survivor_keys:
        assert not strictly_inside(np.array(key))
    announce(6, "cutout removes exactly the strict interiors; count = round(cuts_per_10k*N/1e4)")


def test_criterion_07_unlabeled_mixing():
    rng = derive_stream(107, 0, 0, "acceptance7")
    a = centered(rng.split("a"), 700)
    b = centered(rng.split("b"), 900, with_labels=False)
    sample = mix_unlabeled(a, b, 255, rng.split("mix"))
    assert int(sample.cloud.loss_mask.sum()) == len(a)
    assert np.all(sample.cloud.labels[len(a):] == 255)
    assert np.array_equal(sample.cloud.labels[:len(a)], a.labels)
    announce(7, "unlabeled mixing: |A| supervised points, partner all ignore sentinel")


def test_criterion_08_batch_point_parity():
    rng = derive_stream(108, 0, 0, "acceptance8")
    sizes = [800, 950, 700, 1200, 1000, 850]
    scenes = [centered(rng.split(i), n) for i, n in enumerate(sizes)]
    samples = compose_batch(scenes, MixPolicy(scene_count=2), rng.split("compose"))
    assert len(samples) == 3
    assert sum(len(s.cloud) for s in samples) == sum(sizes)
    announce(8, "six scenes at k=2 give three samples with the exact baseline point total")


def test_criterion_09_pipeline_determinism_across_workers(tmp_path):
    scene_dir = tmp_path / "scenes"
    scene_dir.mkdir()
    for i in range(20):
        cloud = random_cloud(derive_stream(55, i, 0, "corpus"), 250)
        (scene_dir / f"scene_{i:03d}.ply").write_bytes(write_ply(cloud))

    out_dir = tmp_path / "out"
    config = parse_config(json.dumps({
        "dataset": {"format": "ply", "root": str(scene_dir)},
        "output": {"directory": str(out_dir)},
        "master_seed": 2024,
        "epochs": 2,
    }))

    def run_and_collect(workers):
        if out_dir.exists():
            shutil.rmtree(out_dir)
        run(config, workers=workers)
        return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}

    serial = run_and_collect(1)
    parallel = run_and_collect(8)
    assert serial.keys() == parallel.keys()
    for name in serial:
        assert serial[name] == parallel[name], f"{name} differs across worker counts"
    announce(9, "1-worker and 8-worker runs byte-identical over a 20-scene corpus")


def test_criterion_10_codec_round_trips():
    rng = derive_stream(110, 0, 0, "acceptance10")
    for trial in range(1000):
        r = rng.split(trial)
        n = int(r.integers(1, 17))
        positions = r.uniform(-100, 100, (n, 3)).astype(np.float32).astype(np.float64)
        colors = r.integers(0, 256, (n, 3)).astype(np.float64) / 255.0
        labels = r.integers(0, 1 << 16, n)
        cloud = PointCloud(positions=positions, colors=colors, labels=labels)

        ply_bytes = write_ply(cloud)
        assert write_ply(read_ply(ply_bytes)) == ply_bytes

        bin_bytes = r.uniform(-80, 80, (n, 4)).astype("<f4").tobytes()
        assert write_kitti_bin(read_kitti_bin(bin_bytes)) == bin_bytes

        raw = r.integers(0, 2 ** 32, n).astype("<u4").tobytes()
        semantics, instances = read_kitti_labels(raw, n)
        assert write_kitti_labels(semantics, instances) == raw

        semantic = int(r.integers(0, 1 << 16))
        instance = int(r.integers(0, 1 << 16))
        packed = PackedLabel.pack(semantic, instance)
        assert (packed.semantic, packed.instance) == (semantic, instance)
        assert PackedLabel.pack(packed.semantic, packed.instance).raw == packed.raw
    announce(10, "PLY binary, lidar bin and label codecs byte-stable over 1000 fuzz cases")


def test_criterion_11_voxelization_oracle():
    rng = derive_stream(111, 0, 0, "acceptance11")
    for trial in range(100):
        cloud = random_cloud(rng.split(trial), 300, extent=(1.5, 1.5, 1.0))
        for cell in (0.02, 0.05, 0.15):
            out = voxelize(cloud, cell)
            seen, keep = set(), []
            for idx, p in enumerate(cloud.positions):
                key = tuple(int(np.floor(v / cell)) for v in p)
                if key not in seen:
                    seen.add(key)
                    keep.append(idx)
            assert np.array_equal(out.positions, cloud.positions[keep])
            assert np.array_equal(out.labels, cloud.labels[keep])
    announce(11, "voxelize equals first-per-cell scan on 100 clouds at 2/5/15 cm")


def test_criterion_12_ablation_shapes():
    rng = derive_stream(112, 0, 0, "acceptance12")

    for k in (1, 2, 3, 4, 7, 8):
        sizes = [int(rng.split(f"n{k}-{i}").integers(50, 200)) for i in range(k)]
        scenes = [centered(rng.split(f"s{k}-{i}"), n) for i, n in enumerate(sizes)]
        sample = mix_k(scenes, rng.split(f"mix{k}"))
        assert len(sample.cloud) == sum(sizes)

    blobs, inst, labels = [], [], []
    blob_rng = rng.split("blobs")
    for i in range(1, 11):
        center = blob_rng.uniform(0.0, 6.0, 3)
        blobs.append(center + blob_rng.normal(0.0, 0.2, (20, 3)))
        inst += [i] * 20
        labels += [i % 4] * 20
    scene = PointCloud(positions=np.concatenate(blobs),
                       labels=np.array(labels), instances=np.array(inst))
    db = build_instance_db([scene])
    for ratio in (1.0, 0.5):
        out = mix_instances(scene, db, ratio, InstancePlacement.FREE,
                            rng.split(f"mi{ratio}"))
        new_ids = np.setdiff1d(np.unique(out.instances), np.unique(scene.instances))
        assert len(new_ids) == round(ratio * 10)

    n = 20_000
    uniform = random_cloud(rng.split("uniform"), n, extent=(1.0, 1.0, 1.0))
    for fraction in (0.25, 1 / 16):
        counts = [
            len(crop_cube_fraction(uniform, fraction, rng.split(f"crop{fraction}-{t}")))
            for t in range(5)
        ]
        assert abs(np.mean(counts) - fraction * n) <= 0.1 * fraction * n
    announce(12, "mix_k counts for k in {1,2,3,4,7,8}; instance ratios exact; crop density within 10%")
