"""Per-scene augmentations and voxel quantization.

The standard chain for one scene is: center at the origin, random
horizontal flips, random rotation (free yaw, slight tilt), random uniform
scaling, random sub-sampling, elastic distortion, and color augmentation
when colors exist. Each operation takes an :class:`~scenemix.core.RngStream`
and returns a new cloud (plus a draw record for the rigid ops), leaving the
input untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import Aabb, AugmentParams, PointCloud, RngStream, aabb_of, centroid
from .errors import EmptyCloud, MissingAttribute

UP_AXIS = 2              # z is up
HORIZONTAL_AXES = (0, 1)


@dataclass(frozen=True)
class RigidAugmentRecord:
    """Parameters actually drawn by one rigid augmentation step."""

    flips: tuple[bool, bool] = (False, False)
    up_angle: float = 0.0
    tilt_x: float = 0.0
    tilt_y: float = 0.0
    scale_factor: float = 1.0
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def as_dict(self) -> dict:
        return {
            "flips": list(self.flips),
            "up_angle": self.up_angle,
            "tilt_x": self.tilt_x,
            "tilt_y": self.tilt_y,
            "scale_factor": self.scale_factor,
            "translation": list(self.translation),
        }


def center_at_origin(cloud: PointCloud) -> tuple[PointCloud, np.ndarray]:
    """Translate the cloud so its centroid is the origin.

    Returns the new cloud and the subtracted centroid.
    """
    c = centroid(cloud)  # raises EmptyCloud
    return cloud.replace(positions=cloud.positions - c), c


def random_flip(cloud: PointCloud, rng: RngStream,
                params: AugmentParams) -> tuple[PointCloud, RigidAugmentRecord]:
    """Independently negate each horizontal axis with the configured probability."""
    draws = rng.random(len(HORIZONTAL_AXES))
    flips = draws < params.flip_prob_per_horizontal_axis
    positions = cloud.positions.copy()
    for axis, flip in zip(HORIZONTAL_AXES, flips):
        if flip:
            positions[:, axis] = -positions[:, axis]
    record = RigidAugmentRecord(flips=(bool(flips[0]), bool(flips[1])))
    return cloud.replace(positions=positions), record


def _rotation_matrix(up_angle: float, tilt_x: float, tilt_y: float) -> np.ndarray:
    cu, su = np.cos(up_angle), np.sin(up_angle)
    cx, sx = np.cos(tilt_x), np.sin(tilt_x)
    cy, sy = np.cos(tilt_y), np.sin(tilt_y)
    r_up = np.array([[cu, -su, 0.0], [su, cu, 0.0], [0.0, 0.0, 1.0]])
    r_x = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    r_y = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    return r_up @ r_x @ r_y


def random_rotate(cloud: PointCloud, rng: RngStream,
                  params: AugmentParams) -> tuple[PointCloud, RigidAugmentRecord]:
    """Rotate about the centroid: free yaw around up, slight tilt around x and y."""
    up_angle = float(rng.uniform(*params.up_axis_rotation))
    tilt_x = float(rng.uniform(*params.tilt_rotation))
    tilt_y = float(rng.uniform(*params.tilt_rotation))
    c = centroid(cloud)
    rot = _rotation_matrix(up_angle, tilt_x, tilt_y)
    positions = (cloud.positions - c) @ rot.T + c
    record = RigidAugmentRecord(up_angle=up_angle, tilt_x=tilt_x, tilt_y=tilt_y)
    return cloud.replace(positions=positions), record


def random_scale(cloud: PointCloud, rng: RngStream,
                 params: AugmentParams) -> tuple[PointCloud, RigidAugmentRecord]:
    """Scale uniformly about the centroid by a factor drawn from the scale interval."""
    factor = float(rng.uniform(*params.scale))
    c = centroid(cloud)
    positions = (cloud.positions - c) * factor + c
    return cloud.replace(positions=positions), RigidAugmentRecord(scale_factor=factor)


def random_subsample(cloud: PointCloud, rng: RngStream, params: AugmentParams) -> PointCloud:
    """Keep a random fraction of points, preserving their relative order."""
    n = len(cloud)
    ratio = float(rng.uniform(*params.subsample_keep))
    keep = int(round(ratio * n))
    if keep >= n:
        return cloud
    indices = np.sort(rng.choice(n, size=keep, replace=False))
    return cloud.select(indices)


@dataclass(frozen=True)
class ElasticField:
    """Smoothed random displacement sampled on a coarse node grid.

    ``displacement`` has shape ``(*dims, 3)``; node (i, j, k) sits at
    ``origin + granularity * (i, j, k)``. Evaluation is trilinear, so node
    positions return their stored vector exactly and the field is
    continuous in between.
    """

    origin: np.ndarray
    granularity: float
    dims: tuple[int, int, int]
    displacement: np.ndarray

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Trilinearly interpolated displacement at each query point."""
        local = (np.asarray(points, dtype=np.float64) - self.origin) / self.granularity
        # Snap almost-integral coordinates so node queries return the stored
        # vector exactly despite float round-off in the grid arithmetic.
        nearest = np.rint(local)
        local = np.where(np.abs(local - nearest) < 1e-9, nearest, local)
        dims = np.asarray(self.dims)
        cell = np.clip(np.floor(local).astype(np.int64), 0, dims - 2)
        frac = local - cell

        out = np.zeros((len(local), 3))
        for corner in range(8):
            shift = np.array([(corner >> 2) & 1, (corner >> 1) & 1, corner & 1])
            weight = np.prod(np.where(shift == 1, frac, 1.0 - frac), axis=1)
            idx = cell + shift
            out += weight[:, None] * self.displacement[idx[:, 0], idx[:, 1], idx[:, 2]]
        return out


def build_elastic_field(box: Aabb, granularity: float, magnitude: float,
                        rng: RngStream) -> ElasticField:
    """Sample a displacement field on a grid covering ``box`` padded by one cell.

    Per-node unit Gaussian noise is smoothed with three passes of a width-3
    axis-separable box blur, then scaled by ``magnitude``.
    """
    if granularity <= 0.0:
        raise ValueError("granularity must be > 0")
    if magnitude < 0.0:
        raise ValueError("magnitude must be >= 0")

    origin = box.min_corner - granularity
    span = box.extent + 2.0 * granularity
    dims = tuple(int(np.ceil(s / granularity)) + 1 for s in span)

    noise = rng.normal(size=(*dims, 3))
    for _ in range(3):
        for axis in range(3):
            noise = ndimage.uniform_filter1d(noise, size=3, axis=axis, mode="constant")
    return ElasticField(origin=origin, granularity=float(granularity), dims=dims,
                        displacement=noise * magnitude)


def elastic_distort(cloud: PointCloud, rng: RngStream, granularity: float,
                    magnitude: float) -> PointCloud:
    """Displace every point by a smooth random field; attributes are untouched."""
    if len(cloud) == 0:
        raise EmptyCloud("elastic distortion of an empty cloud")
    field = build_elastic_field(aabb_of(cloud), granularity, magnitude, rng)
    if magnitude == 0.0:
        return cloud
    return cloud.replace(positions=cloud.positions + field.evaluate(cloud.positions))


def apply_elastic_chain(cloud: PointCloud, rng: RngStream,
                        pairs=None) -> PointCloud:
    """Apply a sequence of (granularity, magnitude) distortions in order."""
    if pairs is None:
        pairs = AugmentParams().elastic
    for i, (granularity, magnitude) in enumerate(pairs):
        cloud = elastic_distort(cloud, rng.split(i), granularity, magnitude)
    return cloud


def color_augment(cloud: PointCloud, rng: RngStream, params: AugmentParams) -> PointCloud:
    """Scene-level brightness and contrast, then per-point jitter, clamped to [0, 1]."""
    if cloud.colors is None:
        raise MissingAttribute("color augmentation needs colors")
    brightness = float(rng.uniform(*params.color_brightness))
    contrast = float(rng.uniform(*params.color_contrast))

    # Identity draws skip their arithmetic so collapsed ranges stay bitwise
    # neutral; the draws above still happen, keeping replay stable.
    colors = cloud.colors
    if brightness != 0.0:
        colors = colors + brightness
    if contrast != 1.0:
        mean = colors.mean(axis=0)
        colors = mean + (colors - mean) * contrast
    if params.color_jitter_sigma > 0.0:
        colors = colors + rng.normal(0.0, params.color_jitter_sigma, colors.shape)
    return cloud.replace(colors=np.clip(colors, 0.0, 1.0))


def voxelize(cloud: PointCloud, cell_size: float) -> PointCloud:
    """Keep the first point (in input order) of every occupied grid cell."""
    if cell_size <= 0.0:
        raise ValueError("cell_size must be > 0")
    if len(cloud) == 0:
        return cloud
    cells = np.floor(cloud.positions / cell_size).astype(np.int64)
    # Stable lexicographic sort groups equal cells while keeping input order.
    order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    sorted_cells = cells[order]
    first = np.ones(len(cells), dtype=bool)
    first[1:] = np.any(sorted_cells[1:] != sorted_cells[:-1], axis=1)
    return cloud.select(np.sort(order[first]))
