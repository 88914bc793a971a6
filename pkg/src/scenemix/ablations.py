"""Alternative context-change procedures.

These are the companions to scene mixing: cutting out random cuboids,
corrupting scenes with synthetic noise points, cropping sub-volumes or
spheres, isolating single objects, and mixing individual instances drawn
from a database instead of whole scenes. Synthetic noise points never get
supervision: they carry the ignore label and a false loss mask.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_IGNORE_LABEL,
    PointCloud,
    RngStream,
    aabb_of,
    concat,
    translate,
)
from .errors import (
    EmptyCloud,
    EmptyCrop,
    EmptyInstanceSet,
    InconsistentInstance,
    MissingAttribute,
    ParseError,
)
from . import io as scene_io

# Guard against "exactly divisible" extents drifting one float ulp above an
# integer multiple of the cell and gaining a spurious grid layer.
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class CutoutSpec:
    """Cuboid removal parameters: edge length range and cuts per 10^4 points."""

    edge_range: tuple[float, float] = (0.05, 2.0)
    cuts_per_10k: float = 1.0

    def __post_init__(self):
        lo, hi = self.edge_range
        if not (0.0 <= lo <= hi):
            raise ValueError("edge_range must satisfy 0 <= lower <= upper")
        if self.cuts_per_10k < 0.0:
            raise ValueError("cuts_per_10k must be >= 0")


def sample_cutout_boxes(cloud: PointCloud, spec: CutoutSpec, rng: RngStream) -> np.ndarray:
    """Draw the cut cuboids for a cloud: shape (n_cuts, 2, 3) of (min, max)."""
    n_cuts = int(round(spec.cuts_per_10k * len(cloud) / 1e4))
    if n_cuts == 0:
        return np.empty((0, 2, 3))
    box = aabb_of(cloud)
    centers = rng.uniform(box.min_corner, box.max_corner, (n_cuts, 3))
    edges = rng.uniform(spec.edge_range[0], spec.edge_range[1], (n_cuts, 3))
    return np.stack([centers - edges / 2.0, centers + edges / 2.0], axis=1)


def remove_inside_boxes(cloud: PointCloud, boxes: np.ndarray) -> PointCloud:
    """Drop every point strictly inside any of the boxes."""
    if len(boxes) == 0 or len(cloud) == 0:
        return cloud
    removed = np.zeros(len(cloud), dtype=bool)
    for lo, hi in boxes:
        inside = np.all(cloud.positions > lo, axis=1) & np.all(cloud.positions < hi, axis=1)
        removed |= inside
    return cloud.select(~removed)


def cutout(cloud: PointCloud, spec: CutoutSpec, rng: RngStream) -> PointCloud:
    """Remove all points strictly inside randomly sampled axis-aligned cuboids."""
    return remove_inside_boxes(cloud, sample_cutout_boxes(cloud, spec, rng))


def _append_synthetic(cloud: PointCloud, positions: np.ndarray,
                      ignore_label: int,
                      colors: np.ndarray | None = None,
                      features: np.ndarray | None = None) -> PointCloud:
    """Append unsupervised synthetic points, matching the cloud's attribute set."""
    m = len(positions)
    added = PointCloud(
        positions=positions,
        colors=(colors if colors is not None else np.zeros((m, 3)))
        if cloud.colors is not None else None,
        features=(features if features is not None else np.zeros(m))
        if cloud.features is not None else None,
        labels=np.full(m, ignore_label, dtype=np.int64) if cloud.labels is not None else None,
        instances=np.zeros(m, dtype=np.int64) if cloud.instances is not None else None,
        loss_mask=np.zeros(m, dtype=bool),
    )
    return concat([cloud, added])


def noise_near_surface(cloud: PointCloud, rng: RngStream, fraction: float = 0.2,
                       radius: float = 0.5,
                       ignore_label: int = DEFAULT_IGNORE_LABEL) -> PointCloud:
    """Append noise points near the surface.

    Adds round(fraction * n) points, each a uniformly chosen original point
    displaced by a uniform draw from the radius ball. Appearance (color,
    feature) is copied from the source point; supervision is masked.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must be in [0, 1]")
    if radius < 0.0:
        raise ValueError("radius must be >= 0")
    n_add = int(round(fraction * len(cloud)))
    if n_add == 0:
        return cloud

    source = rng.integers(0, len(cloud), n_add)
    directions = rng.normal(size=(n_add, 3))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    directions = directions / np.where(norms == 0.0, 1.0, norms)
    radii = radius * rng.random(n_add) ** (1.0 / 3.0)
    positions = cloud.positions[source] + directions * radii[:, None]

    return _append_synthetic(
        cloud, positions, ignore_label,
        colors=cloud.colors[source] if cloud.colors is not None else None,
        features=cloud.features[source] if cloud.features is not None else None,
    )


def noise_uniform(cloud: PointCloud, rng: RngStream, cell: float = 0.6,
                  offset: float = 0.1,
                  ignore_label: int = DEFAULT_IGNORE_LABEL) -> PointCloud:
    """Append one noise point per cell of a grid covering the bounding box.

    Each point sits at its cell center plus a uniform per-axis offset in
    [-offset, offset]. Added points are unsupervised.
    """
    if cell <= 0.0:
        raise ValueError("cell must be > 0")
    if offset < 0.0:
        raise ValueError("offset must be >= 0")
    box = aabb_of(cloud)
    counts = np.ceil(box.extent / cell - _GRID_EPS).astype(np.int64)
    if np.any(counts == 0):
        return cloud

    axes = [box.min_corner[d] + (np.arange(counts[d]) + 0.5) * cell for d in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    positions = grid + rng.uniform(-offset, offset, grid.shape)
    return _append_synthetic(cloud, positions, ignore_label)


# ---------------------------------------------------------------------------
# Instance database

@dataclass(frozen=True)
class InstanceEntry:
    """One stored object: semantic label, centered points, source scene id.

    ``centroid`` is the world-space centroid subtracted when the entry was
    built; adding it back reconstructs the original points. Entries loaded
    from disk carry a zero centroid (placement never needs the original).
    """

    label: int
    cloud: PointCloud
    scene_id: int
    centroid: np.ndarray | None = None

    def __post_init__(self):
        c = self.centroid if self.centroid is not None else np.zeros(3)
        c = np.asarray(c, dtype=np.float64).reshape(3).copy()
        c.flags.writeable = False
        object.__setattr__(self, "centroid", c)


@dataclass(frozen=True)
class InstanceDb:
    """Immutable collection of centered single-object clouds."""

    entries: tuple[InstanceEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def save(self, directory: str | Path) -> None:
        """Write one PLY per entry plus an index of (label, scene id, file)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lines = []
        for i, entry in enumerate(self.entries):
            name = f"instance_{i:05d}.ply"
            (directory / name).write_bytes(scene_io.write_ply(entry.cloud))
            lines.append(f"{entry.label} {entry.scene_id} {name}")
        (directory / "index.txt").write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "InstanceDb":
        directory = Path(directory)
        entries = []
        for lineno, line in enumerate((directory / "index.txt").read_text().splitlines(), 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 3:
                raise ParseError(lineno, f"expected 'label scene_id file', got {line!r}")
            label, scene_id, name = int(fields[0]), int(fields[1]), fields[2]
            cloud = scene_io.read_ply((directory / name).read_bytes())
            entries.append(InstanceEntry(label=label, cloud=cloud, scene_id=scene_id))
        return cls(entries=tuple(entries))


def _instance_ids_in_order(instances: np.ndarray) -> np.ndarray:
    """Distinct instance ids > 0 in first-appearance order."""
    ids, first = np.unique(instances, return_index=True)
    keep = ids > 0
    return ids[keep][np.argsort(first[keep])]


def build_instance_db(scenes: Sequence[PointCloud]) -> InstanceDb:
    """Collect every labeled instance of every scene, re-centered at its centroid.

    Instance id 0 means "no instance" and is skipped. An instance whose
    points disagree on the semantic label is rejected.
    """
    entries = []
    for scene_id, scene in enumerate(scenes):
        if scene.labels is None or scene.instances is None:
            raise MissingAttribute("instance database needs labels and instance ids")
        for instance_id in _instance_ids_in_order(scene.instances):
            part = scene.select(scene.instances == instance_id)
            distinct = np.unique(part.labels)
            if len(distinct) != 1:
                raise InconsistentInstance(
                    f"scene {scene_id} instance {instance_id} has labels {distinct.tolist()}"
                )
            center = part.positions.mean(axis=0)
            entries.append(InstanceEntry(label=int(distinct[0]),
                                         cloud=translate(part, -center),
                                         scene_id=scene_id, centroid=center))
    return InstanceDb(entries=tuple(entries))


class InstancePlacement(enum.Enum):
    """Where sampled instances land: on an existing instance or anywhere."""

    OVERLAPPING = "overlapping"
    FREE = "free"


def mix_instances(scene: PointCloud, db: InstanceDb, ratio: float,
                  placement: InstancePlacement, rng: RngStream) -> PointCloud:
    """Concatenate round(ratio * instance count) database objects into the scene.

    Objects are drawn uniformly with replacement. OVERLAPPING drops each one
    onto the centroid of a random existing instance; FREE puts it at a
    uniform location in the scene's bounding box (overlaps allowed). Placed
    points keep their semantic labels and get fresh instance ids.
    """
    if scene.instances is None:
        raise MissingAttribute("instance mixing needs instance ids on the scene")
    if ratio < 0.0:
        raise ValueError("ratio must be >= 0")
    if len(db) == 0:
        raise EmptyInstanceSet("instance database is empty")
    existing = _instance_ids_in_order(scene.instances)
    if len(existing) == 0:
        raise EmptyInstanceSet("scene has no instances")

    n_add = int(round(ratio * len(existing)))
    if n_add == 0:
        return scene

    picks = rng.integers(0, len(db), n_add)
    if placement is InstancePlacement.OVERLAPPING:
        anchor_ids = existing[rng.integers(0, len(existing), n_add)]
        targets = np.stack([
            scene.positions[scene.instances == i].mean(axis=0) for i in anchor_ids
        ])
    elif placement is InstancePlacement.FREE:
        box = aabb_of(scene)
        targets = rng.uniform(box.min_corner, box.max_corner, (n_add, 3))
    else:
        raise TypeError(f"unknown placement {placement!r}")

    next_id = int(scene.instances.max()) + 1
    placed = []
    for j, (pick, target) in enumerate(zip(picks, targets)):
        entry = db.entries[int(pick)]
        moved = translate(entry.cloud, target)
        moved = moved.replace(
            instances=np.full(len(moved), next_id + j, dtype=np.int64),
            loss_mask=np.ones(len(moved), dtype=bool),
        )
        placed.append(moved)
    return concat([scene, *placed])


# ---------------------------------------------------------------------------
# Context crops and instance isolation

def crop_cube_fraction(cloud: PointCloud, fraction: float, rng: RngStream,
                       max_attempts: int = 10) -> PointCloud:
    """Keep the points inside a random box of the given volume fraction.

    The box edges are the bounding box extents scaled by fraction^(1/3), so
    the box volume is exactly fraction times the bounding volume. Placement
    is uniform inside the bounding box; empty draws are retried.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    box = aabb_of(cloud)
    edge = fraction ** (1.0 / 3.0) * box.extent
    slack = box.extent - edge
    for _ in range(max_attempts):
        lo = box.min_corner + rng.uniform(0.0, 1.0, 3) * slack
        hi = lo + edge
        keep = np.all(cloud.positions >= lo, axis=1) & np.all(cloud.positions <= hi, axis=1)
        if keep.any():
            return cloud.select(keep)
    raise EmptyCrop(f"no points inside any of {max_attempts} crop draws")


def crop_sphere(cloud: PointCloud, rng: RngStream, radius: float) -> PointCloud:
    """Keep the points within ``radius`` of a uniformly chosen original point."""
    if radius <= 0.0:
        raise ValueError("radius must be > 0")
    if len(cloud) == 0:
        raise EmptyCloud("cannot crop an empty cloud")
    center = cloud.positions[int(rng.integers(0, len(cloud)))]
    distance = np.linalg.norm(cloud.positions - center, axis=1)
    return cloud.select(distance <= radius)


def isolate_instances(cloud: PointCloud) -> list[PointCloud]:
    """Split out one cloud per instance id, in first-appearance order."""
    if cloud.instances is None:
        raise MissingAttribute("instance isolation needs instance ids")
    return [cloud.select(cloud.instances == i) for i in _instance_ids_in_order(cloud.instances)]
