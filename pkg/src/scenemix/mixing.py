"""Scene mixing: union of augmented scenes with placement control.

A mixed training sample is the union of two (or k) independently augmented
scenes with their label sequences concatenated; placement only moves
geometry, never touches attributes. Variants cover mixing against an
unlabeled partner (its points are masked out of supervision) and composing
whole batches with a share of entries left unmixed and an optional total
point budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_IGNORE_LABEL,
    PointCloud,
    RngStream,
    aabb_of,
    centroid,
    concat,
    translate,
)
from .errors import EmptyBatch, EmptyCloud, MissingAttribute

# Placement slack: the no-overlap gap may exceed the requested gap by this much.
GAP_SLACK = 0.01


@dataclass(frozen=True)
class Overlap:
    """Leave both scenes where they are (they share the origin when centered)."""


@dataclass(frozen=True)
class NearbyNoOverlap:
    """Push the second scene sideways until the boxes clear by ``gap`` meters."""

    gap: float = 0.5

    def __post_init__(self):
        if self.gap < 0.0:
            raise ValueError("gap must be >= 0")


@dataclass(frozen=True)
class FarApart:
    """Put the second scene's centroid exactly ``distance`` meters away."""

    distance: float = 500.0

    def __post_init__(self):
        if self.distance <= 0.0:
            raise ValueError("distance must be > 0")


Placement = Overlap | NearbyNoOverlap | FarApart


@dataclass(frozen=True)
class MixPolicy:
    """How a stream of scenes is composed into training samples."""

    placement: Placement = field(default_factory=Overlap)
    scene_count: int = 2
    unlabeled_second: bool = False
    non_mixed_ratio: float = 0.0
    point_budget: int | None = None
    ignore_label: int = DEFAULT_IGNORE_LABEL

    def __post_init__(self):
        if self.scene_count < 1:
            raise ValueError("scene_count must be >= 1")
        if not 0.0 <= self.non_mixed_ratio <= 1.0:
            raise ValueError("non_mixed_ratio must be in [0, 1]")
        if self.point_budget is not None and self.point_budget < 0:
            raise ValueError("point_budget must be >= 0")
        if self.ignore_label < 0:
            raise ValueError("ignore_label must be >= 0")


@dataclass(frozen=True)
class MixedSample:
    """One emitted training sample with per-point provenance.

    ``provenance[i]`` is the index of the source scene that contributed
    point i; source blocks are contiguous and keep their original order.
    """

    cloud: PointCloud
    provenance: np.ndarray
    seed_path: str
    source_ids: tuple[int, ...] = ()
    warning: str | None = None

    def __post_init__(self):
        prov = np.asarray(self.provenance, dtype=np.int64)
        if len(prov) != len(self.cloud):
            raise ValueError("provenance length must equal point count")
        prov.flags.writeable = False
        object.__setattr__(self, "provenance", prov)


def _horizontal_direction(rng: RngStream) -> np.ndarray:
    angle = float(rng.uniform(0.0, 2.0 * np.pi))
    return np.array([np.cos(angle), np.sin(angle), 0.0])


def _nearby_offset(a: PointCloud, b: PointCloud, gap: float, rng: RngStream) -> np.ndarray:
    """Horizontal offset for b so the boxes clear a and leave gap..gap+slack.

    The box separation grows continuously and monotonically once the boxes
    part, so a doubling search plus bisection lands inside the slack window.
    """
    direction = _horizontal_direction(rng)
    box_a, box_b = aabb_of(a), aabb_of(b)
    target_lo = gap + GAP_SLACK * 0.25
    target_hi = gap + GAP_SLACK * 0.75

    def separation(t: float) -> float:
        return box_a.gap_to(box_b.translated(t * direction))

    lo = 0.0
    hi = float(np.linalg.norm(box_a.extent) + np.linalg.norm(box_b.extent) + gap + 1.0)
    while separation(hi) < target_hi:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = separation(mid)
        if target_lo <= s <= target_hi:
            return mid * direction
        if s < target_lo:
            lo = mid
        else:
            hi = mid
    return hi * direction


def _place_second(a: PointCloud, b: PointCloud, placement: Placement,
                  rng: RngStream) -> PointCloud:
    if isinstance(placement, Overlap):
        return b
    if isinstance(placement, NearbyNoOverlap):
        return translate(b, _nearby_offset(a, b, placement.gap, rng))
    if isinstance(placement, FarApart):
        direction = _horizontal_direction(rng)
        offset = centroid(a) + placement.distance * direction - centroid(b)
        return translate(b, offset)
    raise TypeError(f"unknown placement {placement!r}")


def mix(scene_a: PointCloud, scene_b: PointCloud, placement: Placement,
        rng: RngStream) -> MixedSample:
    """Union of two scenes under the requested placement.

    Attributes travel with their points untouched; the combined label
    sequence is labels(A) followed by labels(B) for every placement mode.
    Both scenes should already be augmented and centered (Overlap relies
    on centering for the boxes to intersect).
    """
    if len(scene_a) == 0 or len(scene_b) == 0:
        raise EmptyCloud("mix requires two non-empty scenes")
    placed_b = _place_second(scene_a, scene_b, placement, rng)
    cloud = concat([scene_a, placed_b])
    provenance = np.repeat([0, 1], [len(scene_a), len(scene_b)])
    return MixedSample(cloud=cloud, provenance=provenance, seed_path=rng.path)


def mix_k(scenes: Sequence[PointCloud], rng: RngStream) -> MixedSample:
    """Union of k centered scenes; k=1 passes the scene through unchanged."""
    scenes = list(scenes)
    if not scenes:
        raise EmptyBatch("mix_k requires at least one scene")
    for s in scenes:
        if len(s) == 0:
            raise EmptyCloud("mix_k requires non-empty scenes")
    cloud = scenes[0] if len(scenes) == 1 else concat(scenes)
    provenance = np.repeat(np.arange(len(scenes)), [len(s) for s in scenes])
    return MixedSample(cloud=cloud, provenance=provenance, seed_path=rng.path)


def mix_unlabeled(labeled_a: PointCloud, raw_b: PointCloud,
                  ignore_label: int = DEFAULT_IGNORE_LABEL,
                  rng: RngStream | None = None) -> MixedSample:
    """Overlap-mix a labeled scene with an unlabeled partner.

    Partner points all receive the ignore sentinel and a false loss mask,
    so the loss is computed only for the labeled scene's points. The
    partner's instance array is zero-filled when the labeled scene has one.
    """
    if labeled_a.labels is None:
        raise MissingAttribute("first scene must carry labels")
    if len(labeled_a) == 0 or len(raw_b) == 0:
        raise EmptyCloud("mix requires two non-empty scenes")

    masked = raw_b.replace(
        labels=np.full(len(raw_b), ignore_label, dtype=np.int64),
        loss_mask=np.zeros(len(raw_b), dtype=bool),
    )
    if labeled_a.instances is not None and masked.instances is None:
        masked = masked.replace(instances=np.zeros(len(masked), dtype=np.int64))

    cloud = concat([labeled_a, masked])
    provenance = np.repeat([0, 1], [len(labeled_a), len(raw_b)])
    path = rng.path if rng is not None else ""
    return MixedSample(cloud=cloud, provenance=provenance, seed_path=path)


def _plan_groups(n: int, policy: MixPolicy,
                 rng: RngStream) -> tuple[list[tuple[int, ...]], set[int]]:
    """Partition stream positions 0..n-1 into pass-through singles and k-groups.

    round(non_mixed_ratio * n) positions are drawn to stay unmixed; the rest
    are grouped consecutively in input order. Returns the groups ordered by
    their first member, plus the intentionally unmixed positions.
    """
    n_unmixed = int(round(policy.non_mixed_ratio * n))
    unmixed: set[int] = set()
    if n_unmixed > 0:
        unmixed = {int(i) for i in rng.choice(n, size=n_unmixed, replace=False)}

    groups: list[tuple[int, ...]] = [(i,) for i in sorted(unmixed)]
    pending: list[int] = []
    for i in range(n):
        if i in unmixed:
            continue
        pending.append(i)
        if len(pending) == policy.scene_count:
            groups.append(tuple(pending))
            pending = []
    if pending:
        groups.append(tuple(pending))
    groups.sort(key=lambda g: g[0])
    return groups, unmixed


def compose_batch(scenes: Sequence[PointCloud], policy: MixPolicy,
                  rng: RngStream) -> list[MixedSample]:
    """Compose a stream of augmented scenes into emitted samples.

    Consecutive non-pass-through scenes are grouped ``scene_count`` at a
    time and mixed under the policy placement (k > 2 always overlaps). A
    leftover scene that cannot fill a pair is emitted unmixed and flagged.
    When a point budget is set, trailing samples are withheld so the batch
    total stays within it; points are never dropped inside a sample.
    """
    scenes = list(scenes)
    if not scenes:
        raise EmptyBatch("compose_batch received no scenes")

    groups, intentional = _plan_groups(len(scenes), policy, rng)
    samples: list[MixedSample] = []
    total = 0
    for group in groups:
        stream = rng.split(f"entry{group[0]}")
        members = [scenes[i] for i in group]
        warning = None
        if len(group) == 1:
            sample = mix_k(members, stream)
            if policy.scene_count > 1 and group[0] not in intentional:
                warning = "unpaired scene emitted unmixed"
        elif len(group) == 2:
            if policy.unlabeled_second:
                sample = mix_unlabeled(members[0], members[1], policy.ignore_label, stream)
            else:
                sample = mix(members[0], members[1], policy.placement, stream)
        else:
            sample = mix_k(members, stream)

        sample = MixedSample(
            cloud=sample.cloud,
            provenance=sample.provenance,
            seed_path=sample.seed_path,
            source_ids=group,
            warning=warning,
        )
        if policy.point_budget is not None and total + len(sample.cloud) > policy.point_budget:
            break
        total += len(sample.cloud)
        samples.append(sample)
    return samples
