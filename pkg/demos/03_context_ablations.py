"""Tour of the context-change procedures.

Runs cutout, the two synthetic-noise patterns, volume and sphere crops,
instance isolation, and single-instance mixing from an instance database,
printing the point bookkeeping for each.
"""

import numpy as np

from scenemix import (
    CutoutSpec,
    InstancePlacement,
    PointCloud,
    build_instance_db,
    crop_cube_fraction,
    crop_sphere,
    cutout,
    derive_stream,
    isolate_instances,
    mix_instances,
    mix_unlabeled,
    noise_near_surface,
    noise_uniform,
    random_cloud,
)

rng = derive_stream(11, 0, 0, "demo3")


def blob_scene(tag, n_instances=6, points_each=60, background=500):
    r = rng.split(tag)
    parts, inst, lab = [], [], []
    for i in range(1, n_instances + 1):
        center = r.uniform(0.0, 8.0, 3)
        parts.append(center + r.normal(0.0, 0.25, (points_each, 3)))
        inst += [i] * points_each
        lab += [i % 5 + 1] * points_each
    parts.append(r.uniform(0.0, 8.0, (background, 3)))
    inst += [0] * background
    lab += [0] * background
    return PointCloud(positions=np.concatenate(parts),
                      labels=np.array(lab), instances=np.array(inst))


scene = blob_scene("scene")
print(f"scene: {len(scene)} points, "
      f"{len(np.unique(scene.instances)) - 1} instances + background")

# CutOut at the mild and aggressive ends of the studied grid (on a dense
# cloud, since the cut count is normalized per 10^4 points).
dense = random_cloud(rng.split("dense"), 20_000, extent=(8.0, 8.0, 3.0),
                     with_colors=False)
for edges, freq in [((0.05, 2.0), 1.0), ((0.05, 0.5), 33.0)]:
    out = cutout(dense, CutoutSpec(edges, freq), rng.split(f"cut{freq}"))
    n_cuts = round(freq * len(dense) / 1e4)
    print(f"cutout edges {edges} freq {freq:>4}: {n_cuts} cuboids "
          f"removed {len(dense) - len(out)} points")

# Noise patterns: near-surface corruption vs a uniform grid fill.
near = noise_near_surface(scene, rng.split("near"), fraction=0.2, radius=0.5)
print(f"near-surface noise: +{len(near) - len(scene)} points, "
      f"supervised count unchanged: {near.loss_mask.sum() == scene.loss_mask.sum()}")
grid = noise_uniform(scene, rng.split("grid"), cell=0.6, offset=0.1)
print(f"uniform grid noise: +{len(grid) - len(scene)} points, all ignore-labeled")

# Context crops.
for fraction in (1 / 16, 1 / 4):
    kept = crop_cube_fraction(scene, fraction, rng.split(f"cube{fraction}"))
    print(f"volume crop {fraction:.4f}: kept {len(kept)}/{len(scene)} points")
for radius in (0.5, 2.0):
    kept = crop_sphere(scene, rng.split(f"sphere{radius}"), radius)
    print(f"sphere crop r={radius} m: kept {len(kept)}/{len(scene)} points")

# Isolated objects, as used to probe context dependence at test time.
parts = isolate_instances(scene)
print(f"isolated {len(parts)} single objects, sizes {[len(p) for p in parts]}")

# Instance database and single-instance mixing.
db = build_instance_db([blob_scene("db-a"), blob_scene("db-b")])
print(f"instance database: {len(db)} entries from 2 scenes")
for ratio in (0.5, 1.0):
    for placement in (InstancePlacement.OVERLAPPING, InstancePlacement.FREE):
        out = mix_instances(scene, db, ratio, placement,
                            rng.split(f"mi-{ratio}-{placement.value}"))
        added = len(np.unique(out.instances)) - len(np.unique(scene.instances))
        print(f"instance mixing ratio {ratio} {placement.value:<11}: "
              f"+{added} objects, +{len(out) - len(scene)} points")

# Mixing against an unlabeled partner: only the labeled scene is supervised.
partner = random_cloud(rng.split("partner"), 2000,
                       with_colors=False, with_labels=False)
sample = mix_unlabeled(scene, partner, 255, rng.split("unlabeled"))
print(f"unlabeled mixing: {len(sample.cloud)} points, "
      f"{int(sample.cloud.loss_mask.sum())} supervised (= scene size {len(scene)})")
