"""Domain types, deterministic randomness and basic geometry.

Everything downstream (codecs, transforms, mixing, the pipeline) works on
the immutable :class:`PointCloud` value type and draws randomness only
through :class:`RngStream`, so that any result is a pure function of the
master seed and the derivation path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace as _dc_replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import AttributeMismatch, EmptyCloud

# Sentinel written into label arrays for points excluded from supervision.
DEFAULT_IGNORE_LABEL = 255

_OPTIONAL_ARRAYS = ("colors", "features", "labels", "instances")


def _as_positions(values) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"positions must have shape (n, 3), got {a.shape}")
    return a


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PointCloud:
    """Parallel per-point arrays for one scene.

    positions are metric 64-bit coordinates, colors are RGB in [0, 1],
    features hold one scalar per point (e.g. reflectance), labels are
    non-negative semantic ids (possibly the ignore sentinel), instances
    are object ids where 0 means "no instance", and loss_mask flags the
    points that contribute to supervision.

    All arrays are read-only after construction; transforms return new
    clouds. Every present array has exactly ``len(cloud)`` rows and point
    order is stable under any operation that does not add/remove points.
    """

    positions: np.ndarray
    colors: np.ndarray | None = None
    features: np.ndarray | None = None
    labels: np.ndarray | None = None
    instances: np.ndarray | None = None
    loss_mask: np.ndarray | None = None

    def __post_init__(self):
        pos = _frozen(_as_positions(self.positions))
        object.__setattr__(self, "positions", pos)
        n = len(pos)

        def check(name, a, dtype, cols=None):
            if a is None:
                return None
            a = np.asarray(a, dtype=dtype)
            want = (n,) if cols is None else (n, cols)
            if a.shape != want:
                raise ValueError(f"{name} must have shape {want}, got {a.shape}")
            return _frozen(a)

        object.__setattr__(self, "colors", check("colors", self.colors, np.float64, 3))
        object.__setattr__(self, "features", check("features", self.features, np.float64))
        object.__setattr__(self, "labels", check("labels", self.labels, np.int64))
        object.__setattr__(self, "instances", check("instances", self.instances, np.int64))
        mask = self.loss_mask
        if mask is None:
            # Supervised by default exactly when labels exist.
            mask = np.full(n, self.labels is not None, dtype=bool)
        object.__setattr__(self, "loss_mask", check("loss_mask", mask, bool))

    def __len__(self) -> int:
        return len(self.positions)

    def replace(self, **changes) -> "PointCloud":
        """Return a copy with the given arrays swapped (re-validated)."""
        return _dc_replace(self, **changes)

    def select(self, index) -> "PointCloud":
        """Return the sub-cloud at ``index`` (mask or integer indices).

        All present parallel arrays are filtered with the same index, so
        per-point alignment is preserved by construction.
        """
        def take(a):
            return None if a is None else a[index]

        return PointCloud(
            positions=self.positions[index],
            colors=take(self.colors),
            features=take(self.features),
            labels=take(self.labels),
            instances=take(self.instances),
            loss_mask=take(self.loss_mask),
        )

    def attribute_signature(self) -> tuple[bool, bool, bool, bool]:
        """Which optional arrays are present (colors, features, labels, instances)."""
        return tuple(getattr(self, k) is not None for k in _OPTIONAL_ARRAYS)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box with inclusive metric corners."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.asarray(self.min_corner, dtype=np.float64).reshape(3).copy())
        hi = _frozen(np.asarray(self.max_corner, dtype=np.float64).reshape(3).copy())
        if np.any(lo > hi):
            raise ValueError(f"min_corner must be <= max_corner, got {lo} > {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.max_corner - self.min_corner

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def intersection(self, other: "Aabb") -> "Aabb | None":
        lo = np.maximum(self.min_corner, other.min_corner)
        hi = np.minimum(self.max_corner, other.max_corner)
        if np.any(lo > hi):
            return None
        return Aabb(lo, hi)

    def intersection_volume(self, other: "Aabb") -> float:
        box = self.intersection(other)
        return 0.0 if box is None else box.volume

    def gap_to(self, other: "Aabb") -> float:
        """Euclidean separation between the two boxes (0 when they touch/overlap)."""
        per_axis = np.maximum(
            0.0,
            np.maximum(self.min_corner - other.max_corner, other.min_corner - self.max_corner),
        )
        return float(np.linalg.norm(per_axis))

    def translated(self, offset) -> "Aabb":
        offset = np.asarray(offset, dtype=np.float64)
        return Aabb(self.min_corner + offset, self.max_corner + offset)


def centroid(cloud: PointCloud) -> np.ndarray:
    """Arithmetic mean of the point positions."""
    if len(cloud) == 0:
        raise EmptyCloud("centroid of an empty cloud")
    return cloud.positions.mean(axis=0)


def aabb_of(cloud: PointCloud) -> Aabb:
    """Componentwise min/max box of the point positions."""
    if len(cloud) == 0:
        raise EmptyCloud("bounding box of an empty cloud")
    return Aabb(cloud.positions.min(axis=0), cloud.positions.max(axis=0))


def translate(cloud: PointCloud, offset) -> PointCloud:
    """Shift every position by ``offset``; attributes are untouched."""
    offset = np.asarray(offset, dtype=np.float64).reshape(3)
    return cloud.replace(positions=cloud.positions + offset)


def concat(clouds: Sequence[PointCloud], *, labels_fill: int | None = None) -> PointCloud:
    """Concatenate clouds in argument order into one cloud.

    All clouds must agree on which optional arrays are present. The one
    sanctioned exception: when ``labels_fill`` is given, clouds without
    labels get that sentinel (their loss masks already default to false),
    so labeled and raw scenes can be merged.
    """
    clouds = list(clouds)
    if not clouds:
        raise EmptyCloud("concat of zero clouds")

    has_labels = [c.labels is not None for c in clouds]
    if any(has_labels) and not all(has_labels) and labels_fill is None:
        raise AttributeMismatch("labels present on some clouds only; pass labels_fill")

    for name in ("colors", "features", "instances"):
        presence = [getattr(c, name) is not None for c in clouds]
        if any(presence) and not all(presence):
            raise AttributeMismatch(f"{name} present on some clouds only")

    def stack(name):
        parts = [getattr(c, name) for c in clouds]
        if parts[0] is None:
            return None
        return np.concatenate(parts)

    labels = None
    if any(has_labels):
        labels = np.concatenate([
            c.labels if c.labels is not None else np.full(len(c), labels_fill, dtype=np.int64)
            for c in clouds
        ])

    return PointCloud(
        positions=np.concatenate([c.positions for c in clouds]),
        colors=stack("colors"),
        features=stack("features"),
        labels=labels,
        instances=stack("instances"),
        loss_mask=np.concatenate([c.loss_mask for c in clouds]),
    )


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream keyed by (master seed, scene, epoch, op tag).

    The underlying generator is counter-based (Philox) with its key derived
    by hashing the full path, so identical paths replay identical sequences
    regardless of thread schedule or which other streams were consumed.
    Use :func:`derive_stream` to create streams and :meth:`split` to derive
    independent sub-streams without consuming state.
    """

    master_seed: int
    scene_id: int
    epoch: int
    op_tag: str

    @property
    def path(self) -> str:
        return f"{self.master_seed}/{self.scene_id}/{self.epoch}/{self.op_tag}"

    @cached_property
    def generator(self) -> np.random.Generator:
        digest = hashlib.sha256(self.path.encode("utf-8")).digest()
        key = int.from_bytes(digest[:16], "little")
        return np.random.Generator(np.random.Philox(key=key))

    def split(self, tag) -> "RngStream":
        """Independent child stream; a pure function of the path, no state used."""
        return RngStream(self.master_seed, self.scene_id, self.epoch, f"{self.op_tag}/{tag}")

    # Draw helpers so call sites never touch numpy's global state.
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def random(self, size=None):
        return self.generator.random(size)

    def choice(self, n, size=None, replace=True):
        return self.generator.choice(n, size=size, replace=replace)

    def permutation(self, n) -> np.ndarray:
        return self.generator.permutation(n)


def derive_stream(master_seed: int, scene_id: int, epoch: int, op_tag: str) -> RngStream:
    """Create the stream for one (scene, epoch, op) slot of a run."""
    return RngStream(int(master_seed), int(scene_id), int(epoch), str(op_tag))


@dataclass(frozen=True)
class AugmentParams:
    """Per-scene augmentation ranges.

    Angles are radians, lengths are meters. The defaults follow the usual
    indoor-scene setup: tilt limited to a 1/64-turn either way, scale drawn
    from [0.9, 1.1], full yaw range around the up axis.
    """

    flip_prob_per_horizontal_axis: float = 0.5
    up_axis_rotation: tuple[float, float] = (0.0, 2.0 * np.pi)
    tilt_rotation: tuple[float, float] = (-np.pi / 64, np.pi / 64)
    scale: tuple[float, float] = (0.9, 1.1)
    subsample_keep: tuple[float, float] = (0.8, 1.0)
    elastic: tuple[tuple[float, float], ...] = ((0.2, 0.4), (0.8, 1.6))
    color_brightness: tuple[float, float] = (-0.2, 0.2)
    color_contrast: tuple[float, float] = (0.8, 1.25)
    color_jitter_sigma: float = 0.05

    def __post_init__(self):
        for name in ("up_axis_rotation", "tilt_rotation", "scale", "subsample_keep",
                     "color_brightness", "color_contrast"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} interval has lower > upper: [{lo}, {hi}]")
        if not 0.0 <= self.flip_prob_per_horizontal_axis <= 1.0:
            raise ValueError("flip_prob_per_horizontal_axis must be in [0, 1]")
        lo, hi = self.subsample_keep
        if not (0.0 < lo and hi <= 1.0):
            raise ValueError("subsample_keep must lie in (0, 1]")
        if self.scale[0] <= 0.0:
            raise ValueError("scale interval must be positive")
        for granularity, magnitude in self.elastic:
            if granularity <= 0.0:
                raise ValueError("elastic granularity must be > 0")
            if magnitude < 0.0:
                raise ValueError("elastic magnitude must be >= 0")
        if self.color_jitter_sigma < 0.0:
            raise ValueError("color_jitter_sigma must be >= 0")


def random_cloud(rng: RngStream, n: int, *, extent=(4.0, 4.0, 2.5), with_colors: bool = True,
                 with_labels: bool = True, with_instances: bool = False,
                 n_classes: int = 13, n_instances: int = 5) -> PointCloud:
    """Synthetic uniform test scene; handy for demos and property tests."""
    extent = np.asarray(extent, dtype=np.float64)
    positions = rng.uniform(0.0, 1.0, (n, 3)) * extent
    colors = rng.uniform(0.0, 1.0, (n, 3)) if with_colors else None
    labels = rng.integers(0, n_classes, n).astype(np.int64) if with_labels else None
    instances = None
    if with_instances:
        instances = rng.integers(1, n_instances + 1, n).astype(np.int64)
    return PointCloud(positions=positions, colors=colors, labels=labels, instances=instances)
