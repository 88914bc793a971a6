"""scenemix: deterministic point-cloud scene mixing and augmentation.

The library builds training samples for 3D semantic segmentation by taking
the union of independently augmented scenes, alongside the usual per-scene
augmentations, context-ablation procedures, dataset codecs, and a
reproducible batch pipeline with provenance manifests.
"""

from .core import (
    Aabb,
    AugmentParams,
    DEFAULT_IGNORE_LABEL,
    PointCloud,
    RngStream,
    aabb_of,
    centroid,
    concat,
    derive_stream,
    random_cloud,
    translate,
)
from .errors import SceneMixError
from .io import (
    PackedLabel,
    PlyHeader,
    read_kitti_bin,
    read_kitti_labels,
    read_ply,
    read_xyzrgb_text,
    write_kitti_bin,
    write_kitti_labels,
    write_ply,
)
from .transforms import (
    ElasticField,
    RigidAugmentRecord,
    apply_elastic_chain,
    build_elastic_field,
    center_at_origin,
    color_augment,
    elastic_distort,
    random_flip,
    random_rotate,
    random_scale,
    random_subsample,
    voxelize,
)
from .mixing import (
    FarApart,
    MixPolicy,
    MixedSample,
    NearbyNoOverlap,
    Overlap,
    compose_batch,
    mix,
    mix_k,
    mix_unlabeled,
)
from .ablations import (
    CutoutSpec,
    InstanceDb,
    InstanceEntry,
    InstancePlacement,
    build_instance_db,
    crop_cube_fraction,
    crop_sphere,
    cutout,
    isolate_instances,
    mix_instances,
    noise_near_surface,
    noise_uniform,
)
from .pipeline import (
    BatchManifest,
    PipelineConfig,
    StatsReport,
    parse_config,
    preview,
    run,
    serialize_config,
    stats,
)

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "AugmentParams",
    "BatchManifest",
    "CutoutSpec",
    "DEFAULT_IGNORE_LABEL",
    "ElasticField",
    "FarApart",
    "InstanceDb",
    "InstanceEntry",
    "InstancePlacement",
    "MixPolicy",
    "MixedSample",
    "NearbyNoOverlap",
    "Overlap",
    "PackedLabel",
    "PipelineConfig",
    "PlyHeader",
    "PointCloud",
    "RigidAugmentRecord",
    "RngStream",
    "SceneMixError",
    "StatsReport",
    "aabb_of",
    "apply_elastic_chain",
    "build_elastic_field",
    "build_instance_db",
    "center_at_origin",
    "centroid",
    "color_augment",
    "compose_batch",
    "concat",
    "crop_cube_fraction",
    "crop_sphere",
    "cutout",
    "derive_stream",
    "elastic_distort",
    "isolate_instances",
    "mix",
    "mix_instances",
    "mix_k",
    "mix_unlabeled",
    "noise_near_surface",
    "noise_uniform",
    "parse_config",
    "preview",
    "random_cloud",
    "random_flip",
    "random_rotate",
    "random_scale",
    "random_subsample",
    "read_kitti_bin",
    "read_kitti_labels",
    "read_ply",
    "read_xyzrgb_text",
    "run",
    "serialize_config",
    "stats",
    "translate",
    "voxelize",
    "write_kitti_bin",
    "write_kitti_labels",
    "write_ply",
]
