"""Walk one scene through the standard per-scene augmentation chain.

Each step draws from its own derived stream, so any step can be replayed
in isolation from (seed, scene, epoch, op-tag) alone. The printed records
are exactly what the pipeline writes into its manifest.
"""

import numpy as np

from scenemix import AugmentParams, derive_stream, random_cloud
from scenemix.transforms import (
    apply_elastic_chain,
    center_at_origin,
    color_augment,
    random_flip,
    random_rotate,
    random_scale,
    random_subsample,
    voxelize,
)

SEED, SCENE_ID, EPOCH = 42, 3, 0
params = AugmentParams()

cloud = random_cloud(derive_stream(SEED, SCENE_ID, EPOCH, "make"), 5000,
                     extent=(8.0, 6.0, 2.7))
print(f"input scene: {len(cloud)} points, "
      f"extent {np.round(cloud.positions.max(0) - cloud.positions.min(0), 2)}")

cloud, translation = center_at_origin(cloud)
print(f"center:    subtracted centroid {np.round(translation, 3)}")

cloud, rec = random_flip(cloud, derive_stream(SEED, SCENE_ID, EPOCH, "flip"), params)
print(f"flip:      horizontal axes flipped = {rec.flips}")

cloud, rec = random_rotate(cloud, derive_stream(SEED, SCENE_ID, EPOCH, "rotate"), params)
print(f"rotate:    yaw {rec.up_angle:.3f} rad, tilt ({rec.tilt_x:+.4f}, {rec.tilt_y:+.4f}) rad")

cloud, scale_rec = random_scale(cloud, derive_stream(SEED, SCENE_ID, EPOCH, "scale"), params)
print(f"scale:     factor {scale_rec.scale_factor:.4f}")

before = len(cloud)
cloud = random_subsample(cloud, derive_stream(SEED, SCENE_ID, EPOCH, "subsample"), params)
print(f"subsample: kept {len(cloud)} of {before} points")

moved = apply_elastic_chain(cloud, derive_stream(SEED, SCENE_ID, EPOCH, "elastic"),
                            params.elastic)
shift = np.linalg.norm(moved.positions - cloud.positions, axis=1)
print(f"elastic:   mean displacement {shift.mean():.3f} m, max {shift.max():.3f} m")
cloud = moved

recolored = color_augment(cloud, derive_stream(SEED, SCENE_ID, EPOCH, "color"), params)
delta = np.abs(recolored.colors - cloud.colors).mean()
print(f"color:     mean channel change {delta:.3f}, range "
      f"[{recolored.colors.min():.2f}, {recolored.colors.max():.2f}]")
cloud = recolored

for cell in (0.02, 0.05, 0.15):
    print(f"voxelize:  {cell * 100:>4.0f} cm grid keeps {len(voxelize(cloud, cell))} points")

replay = random_scale(cloud, derive_stream(SEED, SCENE_ID, EPOCH, "scale"), params)[1]
print(f"\nreplaying the scale step from its seed path gives the same draw: "
      f"{replay.scale_factor == scale_rec.scale_factor}")
