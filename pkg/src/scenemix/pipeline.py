"""Declarative configuration and deterministic orchestration.

A run reads a scene corpus, augments every scene through a configured op
chain, composes mixed samples per the mix policy, writes them to disk and
logs one manifest record per emitted sample. Every random draw flows
through a stream derived from (master seed, scene id, epoch, op tag), so a
run's outputs are byte-identical for a fixed config and seed, independent
of worker count.
"""

from __future__ import annotations

import colorsys
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import io as scene_io
from .ablations import (
    CutoutSpec,
    crop_cube_fraction,
    crop_sphere,
    noise_near_surface,
    noise_uniform,
    remove_inside_boxes,
    sample_cutout_boxes,
)
from .core import (
    DEFAULT_IGNORE_LABEL,
    PointCloud,
    RngStream,
    derive_stream,
)
from .errors import ConfigError, EmptyBatch, SceneMixError, StatsError
from .mixing import FarApart, MixPolicy, MixedSample, NearbyNoOverlap, Overlap, compose_batch
from .transforms import (
    AugmentParams,
    apply_elastic_chain,
    center_at_origin,
    color_augment,
    random_flip,
    random_rotate,
    random_scale,
    random_subsample,
    voxelize,
)

log = logging.getLogger("scenemix")

_TWO_PI = 2.0 * np.pi
_TILT = np.pi / 64

# Default chain: the standard augmentation list applied to every scene.
DEFAULT_CHAIN: tuple[dict, ...] = (
    {"op": "center"},
    {"op": "flip"},
    {"op": "rotate"},
    {"op": "scale"},
    {"op": "subsample"},
    {"op": "elastic"},
    {"op": "color"},
)


# ---------------------------------------------------------------------------
# Config schema

@dataclass(frozen=True)
class DatasetConfig:
    format: str
    root: str
    subset_fraction: float = 1.0
    subset_seed: int | None = None


@dataclass(frozen=True)
class OutputConfig:
    format: str = "ply"
    directory: str = "scenemix_out"
    preview_count: int = 0


@dataclass(frozen=True)
class ChainStep:
    op: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineConfig:
    dataset: DatasetConfig
    chain: tuple[ChainStep, ...]
    mix: MixPolicy
    output: OutputConfig
    master_seed: int = 0
    epochs: int = 1

    def to_dict(self) -> dict:
        placement = self.mix.placement
        if isinstance(placement, Overlap):
            placement_name, gap, distance = "overlap", 0.5, 500.0
        elif isinstance(placement, NearbyNoOverlap):
            placement_name, gap, distance = "nearby", placement.gap, 500.0
        else:
            placement_name, gap, distance = "far", 0.5, placement.distance
        return {
            "dataset": {
                "format": self.dataset.format,
                "root": self.dataset.root,
                "subset_fraction": self.dataset.subset_fraction,
                "subset_seed": self.dataset.subset_seed,
            },
            "chain": [{"op": s.op, **s.params} for s in self.chain],
            "mix": {
                "placement": placement_name,
                "gap": gap,
                "distance": distance,
                "scene_count": self.mix.scene_count,
                "unlabeled_second": self.mix.unlabeled_second,
                "non_mixed_ratio": self.mix.non_mixed_ratio,
                "point_budget": self.mix.point_budget,
                "ignore_label": self.mix.ignore_label,
            },
            "output": {
                "format": self.output.format,
                "directory": self.output.directory,
                "preview_count": self.output.preview_count,
            },
            "master_seed": self.master_seed,
            "epochs": self.epochs,
        }


def serialize_config(config: PipelineConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)


def _fail(path: str, message: str):
    raise ConfigError(path, message)


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _require_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, f"expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, path: str, allowed: Iterable[str]):
    allowed = set(allowed)
    for key in obj:
        if key not in allowed:
            _fail(_join(path, key), "unknown key")


def _number(obj: dict, key: str, path: str, default=None, *, lo=None, hi=None,
            lo_open=False, integer=False, optional=False):
    if key not in obj:
        if default is None and not optional:
            _fail(_join(path, key), "required key missing")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(_join(path, key), f"expected a number, got {v!r}")
    if integer and int(v) != v:
        _fail(_join(path, key), f"expected an integer, got {v!r}")
    if lo is not None and (v <= lo if lo_open else v < lo):
        bound = f"> {lo}" if lo_open else f">= {lo}"
        _fail(_join(path, key), f"must be {bound}, got {v}")
    if hi is not None and v > hi:
        _fail(_join(path, key), f"must be <= {hi}, got {v}")
    return int(v) if integer else float(v)


def _pair(obj: dict, key: str, path: str, default, *, lo=None, hi=None, lo_open=False):
    if key not in obj:
        return tuple(default)
    v = obj[key]
    if not isinstance(v, (list, tuple)) or len(v) != 2 \
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        _fail(_join(path, key), f"expected [lower, upper], got {v!r}")
    a, b = float(v[0]), float(v[1])
    if a > b:
        _fail(_join(path, key), f"interval has lower > upper: [{a}, {b}]")
    if lo is not None and (a <= lo if lo_open else a < lo):
        bound = f"> {lo}" if lo_open else f">= {lo}"
        _fail(_join(path, key), f"lower bound must be {bound}, got {a}")
    if hi is not None and b > hi:
        _fail(_join(path, key), f"upper bound must be <= {hi}, got {b}")
    return (a, b)


def _string(obj: dict, key: str, path: str, default=None, *, choices=None):
    if key not in obj:
        if default is None:
            _fail(_join(path, key), "required key missing")
        return default
    v = obj[key]
    if not isinstance(v, str):
        _fail(_join(path, key), f"expected a string, got {v!r}")
    if choices is not None and v not in choices:
        _fail(_join(path, key), f"must be one of {sorted(choices)}, got {v!r}")
    return v


def _bool(obj: dict, key: str, path: str, default: bool) -> bool:
    if key not in obj:
        return default
    v = obj[key]
    if not isinstance(v, bool):
        _fail(_join(path, key), f"expected a boolean, got {v!r}")
    return v


def _parse_chain_step(raw, index: int) -> ChainStep:
    path = f"chain[{index}]"
    raw = _require_mapping(raw, path)
    op = _string(raw, "op", path)

    if op == "center":
        _reject_unknown(raw, path, {"op"})
        return ChainStep("center", {})
    if op == "flip":
        _reject_unknown(raw, path, {"op", "prob"})
        return ChainStep("flip", {"prob": _number(raw, "prob", path, 0.5, lo=0.0, hi=1.0)})
    if op == "rotate":
        _reject_unknown(raw, path, {"op", "up_range", "tilt_range"})
        return ChainStep("rotate", {
            "up_range": list(_pair(raw, "up_range", path, (0.0, _TWO_PI))),
            "tilt_range": list(_pair(raw, "tilt_range", path, (-_TILT, _TILT))),
        })
    if op == "scale":
        _reject_unknown(raw, path, {"op", "range"})
        return ChainStep("scale", {
            "range": list(_pair(raw, "range", path, (0.9, 1.1), lo=0.0, lo_open=True)),
        })
    if op == "subsample":
        _reject_unknown(raw, path, {"op", "keep"})
        return ChainStep("subsample", {
            "keep": list(_pair(raw, "keep", path, (0.8, 1.0), lo=0.0, lo_open=True, hi=1.0)),
        })
    if op == "elastic":
        _reject_unknown(raw, path, {"op", "pairs"})
        pairs = raw.get("pairs", [[0.2, 0.4], [0.8, 1.6]])
        if not isinstance(pairs, list) or not pairs:
            _fail(f"{path}.pairs", "expected a non-empty list of [granularity, magnitude]")
        clean = []
        for j, pair in enumerate(pairs):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                _fail(f"{path}.pairs[{j}]", f"expected [granularity, magnitude], got {pair!r}")
            g, m = float(pair[0]), float(pair[1])
            if g <= 0.0:
                _fail(f"{path}.pairs[{j}]", f"granularity must be > 0, got {g}")
            if m < 0.0:
                _fail(f"{path}.pairs[{j}]", f"magnitude must be >= 0, got {m}")
            clean.append([g, m])
        return ChainStep("elastic", {"pairs": clean})
    if op == "color":
        _reject_unknown(raw, path, {"op", "brightness", "contrast", "jitter_sigma"})
        return ChainStep("color", {
            "brightness": list(_pair(raw, "brightness", path, (-0.2, 0.2))),
            "contrast": list(_pair(raw, "contrast", path, (0.8, 1.25), lo=0.0)),
            "jitter_sigma": _number(raw, "jitter_sigma", path, 0.05, lo=0.0),
        })
    if op == "voxelize":
        _reject_unknown(raw, path, {"op", "cell_size"})
        return ChainStep("voxelize", {
            "cell_size": _number(raw, "cell_size", path, 0.05, lo=0.0, lo_open=True),
        })
    if op == "cutout":
        _reject_unknown(raw, path, {"op", "edge_range", "cuts_per_10k"})
        return ChainStep("cutout", {
            "edge_range": list(_pair(raw, "edge_range", path, (0.05, 2.0), lo=0.0)),
            "cuts_per_10k": _number(raw, "cuts_per_10k", path, 1.0, lo=0.0),
        })
    if op == "noise_near_surface":
        _reject_unknown(raw, path, {"op", "fraction", "radius"})
        return ChainStep("noise_near_surface", {
            "fraction": _number(raw, "fraction", path, 0.2, lo=0.0, hi=1.0),
            "radius": _number(raw, "radius", path, 0.5, lo=0.0),
        })
    if op == "noise_uniform":
        _reject_unknown(raw, path, {"op", "cell", "offset"})
        return ChainStep("noise_uniform", {
            "cell": _number(raw, "cell", path, 0.6, lo=0.0, lo_open=True),
            "offset": _number(raw, "offset", path, 0.1, lo=0.0),
        })
    if op == "crop_cube":
        _reject_unknown(raw, path, {"op", "fraction"})
        return ChainStep("crop_cube", {
            "fraction": _number(raw, "fraction", path, 0.25, lo=0.0, lo_open=True, hi=1.0),
        })
    if op == "crop_sphere":
        _reject_unknown(raw, path, {"op", "radius"})
        return ChainStep("crop_sphere", {
            "radius": _number(raw, "radius", path, 2.0, lo=0.0, lo_open=True),
        })
    _fail(f"{path}.op", f"unknown op {op!r}")


def _parse_mix(raw) -> MixPolicy:
    raw = _require_mapping(raw, "mix")
    _reject_unknown(raw, "mix", {
        "placement", "gap", "distance", "scene_count", "unlabeled_second",
        "non_mixed_ratio", "point_budget", "ignore_label",
    })
    name = _string(raw, "placement", "mix", "overlap",
                   choices={"overlap", "nearby", "far"})
    gap = _number(raw, "gap", "mix", 0.5, lo=0.0)
    distance = _number(raw, "distance", "mix", 500.0, lo=0.0, lo_open=True)
    placement = {"overlap": Overlap(), "nearby": NearbyNoOverlap(gap),
                 "far": FarApart(distance)}[name]
    budget = None
    if raw.get("point_budget") is not None:
        budget = _number(raw, "point_budget", "mix", None, lo=0, integer=True)
    return MixPolicy(
        placement=placement,
        scene_count=_number(raw, "scene_count", "mix", 2, lo=1, integer=True),
        unlabeled_second=_bool(raw, "unlabeled_second", "mix", False),
        non_mixed_ratio=_number(raw, "non_mixed_ratio", "mix", 0.0, lo=0.0, hi=1.0),
        point_budget=budget,
        ignore_label=_number(raw, "ignore_label", "mix", DEFAULT_IGNORE_LABEL,
                             lo=0, integer=True),
    )


def parse_config(text: str) -> PipelineConfig:
    """Parse and strictly validate a JSON pipeline configuration.

    Unknown keys and out-of-range values are rejected with the offending
    path; every omitted setting is filled with its documented default so
    the returned config is fully explicit.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    raw = _require_mapping(raw, "<root>")
    _reject_unknown(raw, "", {"dataset", "chain", "mix", "output", "master_seed", "epochs"})

    if "dataset" not in raw:
        _fail("dataset", "required key missing")
    ds = _require_mapping(raw["dataset"], "dataset")
    _reject_unknown(ds, "dataset", {"format", "root", "subset_fraction", "subset_seed"})
    subset_seed = None
    if ds.get("subset_seed") is not None:
        subset_seed = _number(ds, "subset_seed", "dataset", None, integer=True)
    dataset = DatasetConfig(
        format=_string(ds, "format", "dataset", choices={"ply", "kitti", "xyzrgb"}),
        root=_string(ds, "root", "dataset"),
        subset_fraction=_number(ds, "subset_fraction", "dataset", 1.0,
                                lo=0.0, lo_open=True, hi=1.0),
        subset_seed=subset_seed,
    )

    chain_raw = raw.get("chain", [dict(step) for step in DEFAULT_CHAIN])
    if not isinstance(chain_raw, list):
        _fail("chain", f"expected a list of steps, got {type(chain_raw).__name__}")
    chain = tuple(_parse_chain_step(step, i) for i, step in enumerate(chain_raw))

    mix = _parse_mix(raw.get("mix", {}))

    out_raw = _require_mapping(raw.get("output", {}), "output")
    _reject_unknown(out_raw, "output", {"format", "directory", "preview_count"})
    output = OutputConfig(
        format=_string(out_raw, "format", "output", "ply", choices={"ply", "kitti"}),
        directory=_string(out_raw, "directory", "output", "scenemix_out"),
        preview_count=_number(out_raw, "preview_count", "output", 0, lo=0, integer=True),
    )

    return PipelineConfig(
        dataset=dataset,
        chain=chain,
        mix=mix,
        output=output,
        master_seed=_number(raw, "master_seed", "", None, integer=True),
        epochs=_number(raw, "epochs", "", 1, lo=1, integer=True),
    )


# ---------------------------------------------------------------------------
# Manifest

MANIFEST_NAME = "manifest.jsonl"


@dataclass
class BatchManifest:
    """Provenance log of a run: one JSON record per line, one sample per record."""

    records: list[dict] = field(default_factory=list)

    def add(self, record: dict) -> None:
        self.records.append(record)

    def samples(self) -> list[dict]:
        return [r for r in self.records if r.get("type") == "sample"]

    def skips(self) -> list[dict]:
        return [r for r in self.records if r.get("type") == "skip"]

    def dumps(self) -> str:
        return "".join(
            json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
            for r in self.records
        )

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def parse(cls, text: str) -> "BatchManifest":
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StatsError(lineno, str(exc)) from None
            if not isinstance(record, dict):
                raise StatsError(lineno, "record is not an object")
            records.append(record)
        return cls(records=records)

    @classmethod
    def load(cls, path: str | Path) -> "BatchManifest":
        return cls.parse(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Chain execution

def _apply_step(cloud: PointCloud, step: ChainStep, stream: RngStream) -> tuple[PointCloud, dict]:
    p = step.params
    record: dict[str, Any] = {}
    if step.op == "center":
        cloud, translation = center_at_origin(cloud)
        record["translation"] = [float(v) for v in translation]
    elif step.op == "flip":
        cloud, rec = random_flip(cloud, stream,
                                 AugmentParams(flip_prob_per_horizontal_axis=p["prob"]))
        record["flips"] = list(rec.flips)
    elif step.op == "rotate":
        cloud, rec = random_rotate(cloud, stream, AugmentParams(
            up_axis_rotation=tuple(p["up_range"]), tilt_rotation=tuple(p["tilt_range"])))
        record.update(up_angle=rec.up_angle, tilt_x=rec.tilt_x, tilt_y=rec.tilt_y)
    elif step.op == "scale":
        cloud, rec = random_scale(cloud, stream, AugmentParams(scale=tuple(p["range"])))
        record["scale_factor"] = rec.scale_factor
    elif step.op == "subsample":
        cloud = random_subsample(cloud, stream,
                                 AugmentParams(subsample_keep=tuple(p["keep"])))
    elif step.op == "elastic":
        cloud = apply_elastic_chain(cloud, stream, [tuple(q) for q in p["pairs"]])
    elif step.op == "color":
        if cloud.colors is None:
            record["skipped"] = "no colors"
        else:
            cloud = color_augment(cloud, stream, AugmentParams(
                color_brightness=tuple(p["brightness"]),
                color_contrast=tuple(p["contrast"]),
                color_jitter_sigma=p["jitter_sigma"]))
    elif step.op == "voxelize":
        cloud = voxelize(cloud, p["cell_size"])
    elif step.op == "cutout":
        spec = CutoutSpec(edge_range=tuple(p["edge_range"]), cuts_per_10k=p["cuts_per_10k"])
        boxes = sample_cutout_boxes(cloud, spec, stream)
        cloud = remove_inside_boxes(cloud, boxes)
        record["boxes"] = [[list(map(float, corner)) for corner in box] for box in boxes]
    elif step.op == "noise_near_surface":
        cloud = noise_near_surface(cloud, stream, p["fraction"], p["radius"])
    elif step.op == "noise_uniform":
        cloud = noise_uniform(cloud, stream, p["cell"], p["offset"])
    elif step.op == "crop_cube":
        cloud = crop_cube_fraction(cloud, p["fraction"], stream)
    elif step.op == "crop_sphere":
        cloud = crop_sphere(cloud, stream, p["radius"])
    else:
        raise ConfigError(f"chain op {step.op!r}", "not registered")
    return cloud, record


def run_chain(cloud: PointCloud, chain: Sequence[ChainStep], master_seed: int,
              scene_id: int, epoch: int,
              timings: dict | None = None) -> tuple[PointCloud, list[dict]]:
    """Apply the op chain to one scene, logging one record per stage."""
    records = []
    for k, step in enumerate(chain):
        stream = derive_stream(master_seed, scene_id, epoch, f"step{k}:{step.op}")
        points_in = len(cloud)
        started = time.perf_counter()
        cloud, record = _apply_step(cloud, step, stream)
        if timings is not None:
            timings[step.op] = timings.get(step.op, 0.0) + time.perf_counter() - started
        records.append({
            "op": step.op, "points_in": points_in, "points_out": len(cloud), **record,
        })
    return cloud, records


# ---------------------------------------------------------------------------
# The run itself

def _discover_scenes(config: PipelineConfig) -> list[Path]:
    root = Path(config.dataset.root)
    pattern = "*" + scene_io.scene_extension(config.dataset.format)
    return sorted(root.glob(pattern))


def _select_subset(n: int, config: PipelineConfig) -> list[int]:
    fraction = config.dataset.subset_fraction
    if fraction >= 1.0:
        return list(range(n))
    count = int(round(fraction * n))
    seed = config.dataset.subset_seed
    if seed is None:
        seed = config.master_seed
    stream = derive_stream(seed, 0, 0, "subset")
    return sorted(int(i) for i in stream.choice(n, size=count, replace=False))


def _sample_name(epoch: int, index: int, ext: str) -> str:
    return f"epoch{epoch:03d}_sample{index:05d}{ext}"


def _write_sample(sample: MixedSample, path: Path, fmt: str) -> list[Path]:
    cloud = sample.cloud
    if fmt == "ply":
        path.write_bytes(scene_io.write_ply(cloud))
        return [path]
    data = scene_io.write_kitti_bin(cloud)
    path.write_bytes(data)
    written = [path]
    if cloud.labels is not None:
        label_path = path.with_suffix(".label")
        label_path.write_bytes(scene_io.write_kitti_labels(cloud.labels, cloud.instances))
        written.append(label_path)
    return written


def _augment_one(job) -> dict:
    """Worker body: load and augment a single scene; never raises."""
    position, scene_id, path, config, epoch = job
    timings: dict[str, float] = {}
    try:
        cloud = scene_io.load_scene(path, config.dataset.format)
        cloud, op_records = run_chain(cloud, config.chain, config.master_seed,
                                      scene_id, epoch, timings)
        if len(cloud) == 0:
            return {"position": position, "scene_id": scene_id, "path": path,
                    "timings": timings, "error": "scene empty after augmentation"}
        return {"position": position, "scene_id": scene_id, "path": path,
                "timings": timings, "cloud": cloud, "ops": op_records}
    except SceneMixError as exc:
        return {"position": position, "scene_id": scene_id, "path": path,
                "timings": timings, "error": f"{type(exc).__name__}: {exc}"}


def run(config: PipelineConfig, workers: int = 1) -> BatchManifest:
    """Execute the full pipeline and return (and write) its manifest.

    Per epoch: scenes are shuffled with a seeded stream, augmented through
    the chain (optionally on a worker pool; results are collected in order,
    so worker count never changes any output byte), composed per the mix
    policy and serialized. Unreadable scenes are logged and skipped; a run
    that finds no scenes at all is fatal.
    """
    scene_paths = _discover_scenes(config)
    if not scene_paths:
        raise EmptyBatch(f"no {config.dataset.format!r} scenes under {config.dataset.root!r}")

    subset = _select_subset(len(scene_paths), config)
    out_dir = Path(config.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = ".ply" if config.output.format == "ply" else ".bin"

    manifest = BatchManifest()
    manifest.add({
        "type": "header",
        "config": config.to_dict(),
        "scene_count": len(scene_paths),
        "subset_size": len(subset),
    })

    timings: dict[str, float] = {}
    total_points = 0
    skip_count = 0
    started = time.perf_counter()

    for epoch in range(config.epochs):
        shuffle = derive_stream(config.master_seed, 0, epoch, "shuffle")
        order = [subset[i] for i in shuffle.permutation(len(subset))]
        jobs = [(pos, scene_id, scene_paths[scene_id], config, epoch)
                for pos, scene_id in enumerate(order)]

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_augment_one, jobs))
        else:
            results = [_augment_one(job) for job in jobs]

        kept = []
        for result in results:
            for op, seconds in result["timings"].items():
                timings[op] = timings.get(op, 0.0) + seconds
            if "error" in result:
                skip_count += 1
                manifest.add({
                    "type": "skip", "epoch": epoch,
                    "scene_id": result["scene_id"],
                    "file": result["path"].name,
                    "error": result["error"],
                })
                log.warning("skipping scene %s: %s", result["path"].name, result["error"])
            else:
                kept.append(result)
        if not kept:
            raise EmptyBatch(f"no readable scenes in epoch {epoch}")

        compose_stream = derive_stream(config.master_seed, 0, epoch, "compose")
        samples = compose_batch([r["cloud"] for r in kept], config.mix, compose_stream)

        for index, sample in enumerate(samples):
            name = _sample_name(epoch, index, ext)
            _write_sample(sample, out_dir / name, config.output.format)
            total_points += len(sample.cloud)
            members = [kept[pos] for pos in sample.source_ids]
            record = {
                "type": "sample",
                "epoch": epoch,
                "sample_index": index,
                "file": name,
                "source_scene_ids": [m["scene_id"] for m in members],
                "points": len(sample.cloud),
                "seed_path": sample.seed_path,
                "ops": {str(m["scene_id"]): m["ops"] for m in members},
            }
            if sample.warning:
                record["warning"] = sample.warning
            manifest.add(record)

    manifest.write(out_dir / MANIFEST_NAME)
    if config.output.preview_count > 0:
        preview(config, config.output.preview_count)
    elapsed = time.perf_counter() - started
    log.info("run complete: %d points across %d samples, %d skipped, %.2fs total",
             total_points, len(manifest.samples()), skip_count, elapsed)
    for op, seconds in sorted(timings.items()):
        log.info("  op %-18s %.3fs", op, seconds)
    return manifest


def provenance_palette(k: int) -> np.ndarray:
    """k visually distinct colors, quantized to the 8-bit grid PLY uses."""
    hues = [colorsys.hsv_to_rgb(i / max(k, 1), 0.85, 0.95) for i in range(k)]
    return np.round(np.asarray(hues) * 255.0) / 255.0


def preview(config: PipelineConfig, n: int) -> list[Path]:
    """Write the first n mixed samples of epoch 0 as provenance-colored PLY."""
    if n < 1:
        raise ValueError("preview needs n >= 1")
    scene_paths = _discover_scenes(config)
    if not scene_paths:
        raise EmptyBatch(f"no {config.dataset.format!r} scenes under {config.dataset.root!r}")
    subset = _select_subset(len(scene_paths), config)

    shuffle = derive_stream(config.master_seed, 0, 0, "shuffle")
    order = [subset[i] for i in shuffle.permutation(len(subset))]
    kept = []
    for pos, scene_id in enumerate(order):
        result = _augment_one((pos, scene_id, scene_paths[scene_id], config, 0))
        if "error" not in result:
            kept.append(result)

    compose_stream = derive_stream(config.master_seed, 0, 0, "compose")
    samples = compose_batch([r["cloud"] for r in kept], config.mix, compose_stream)

    out_dir = Path(config.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for index, sample in enumerate(samples[:n]):
        palette = provenance_palette(int(sample.provenance.max()) + 1)
        colored = PointCloud(positions=sample.cloud.positions,
                             colors=palette[sample.provenance])
        path = out_dir / f"preview_{index:05d}.ply"
        path.write_bytes(scene_io.write_ply(colored))
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Statistics

@dataclass(frozen=True)
class StatsReport:
    """Aggregate counts over a manifest; `params` maps draw name -> summary."""

    samples: int
    total_points: int
    skipped: int
    warnings: int
    params: dict

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "total_points": self.total_points,
            "skipped": self.skipped,
            "warnings": self.warnings,
            "params": self.params,
        }


_SCALAR_DRAWS = ("scale_factor", "up_angle", "tilt_x", "tilt_y")


def stats(manifest: BatchManifest | str | Path) -> StatsReport:
    """Aggregate a manifest into a machine-readable report."""
    if not isinstance(manifest, BatchManifest):
        manifest = BatchManifest.load(manifest)

    samples = manifest.samples()
    values: dict[str, list[float]] = {}
    flip_count = 0
    cut_boxes = 0
    for sample in samples:
        for op_records in sample.get("ops", {}).values():
            for record in op_records:
                for key in _SCALAR_DRAWS:
                    if key in record:
                        values.setdefault(key, []).append(float(record[key]))
                if "flips" in record:
                    flip_count += sum(bool(f) for f in record["flips"])
                if "boxes" in record:
                    cut_boxes += len(record["boxes"])

    params = {}
    for key, series in sorted(values.items()):
        arr = np.asarray(series)
        params[key] = {
            "count": int(arr.size),
            "min": float(arr.min()),
            "max": float(arr.max()),
            "mean": float(arr.mean()),
        }
    params["flips_applied"] = {"count": flip_count}
    params["cut_boxes"] = {"count": cut_boxes}

    return StatsReport(
        samples=len(samples),
        total_points=sum(int(s["points"]) for s in samples),
        skipped=len(manifest.skips()),
        warnings=sum(1 for s in samples if s.get("warning")),
        params=params,
    )
