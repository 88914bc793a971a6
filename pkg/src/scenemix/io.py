"""Bit-exact readers and writers for the supported scene formats.

Covered formats: the PLY vertex subset used by indoor scene datasets
(ascii and binary little-endian), lidar ``.bin`` files of packed
x/y/z/reflectance float32 records with their ``.label`` companions
(semantic id in the low 16 bits, instance id in the high 16 bits of a
uint32), and whitespace ``x y z r g b`` room files.

All codecs are pure functions over byte buffers: readers never reorder
points, writers are byte-deterministic, and binary round trips are exact
for values representable in 32 bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud
from .errors import (
    CountMismatch,
    EmptyCloud,
    MissingProperty,
    ParseError,
    Truncated,
    UnsupportedEncoding,
)

# PLY scalar kinds -> little-endian numpy dtype codes.
_PLY_KINDS = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
}

ASCII = "ascii"
BINARY_LE = "binary-little-endian"


@dataclass(frozen=True)
class PlyHeader:
    """Parsed PLY header: encoding, vertex count and vertex properties."""

    encoding: str
    count: int
    properties: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class PackedLabel:
    """One uint32 label word: semantic id low 16 bits, instance id high 16."""

    raw: int

    @property
    def semantic(self) -> int:
        return self.raw & 0xFFFF

    @property
    def instance(self) -> int:
        return (self.raw >> 16) & 0xFFFF

    @classmethod
    def pack(cls, semantic: int, instance: int) -> "PackedLabel":
        if not 0 <= semantic < 1 << 16:
            raise ValueError(f"semantic id {semantic} does not fit in 16 bits")
        if not 0 <= instance < 1 << 16:
            raise ValueError(f"instance id {instance} does not fit in 16 bits")
        return cls((instance << 16) | semantic)


# ---------------------------------------------------------------------------
# PLY

def _parse_ply_header(data: bytes) -> tuple[PlyHeader, list[tuple[str, int, list]], int]:
    """Return (header, all elements as (name, count, props), payload offset)."""
    end = data.find(b"end_header")
    if end < 0:
        raise ParseError(1, "no end_header in PLY input")
    newline = data.find(b"\n", end)
    if newline < 0:
        raise Truncated("PLY header not terminated by newline")
    offset = newline + 1

    lines = data[:end].decode("ascii", errors="replace").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(1, "input does not start with 'ply'")

    encoding = None
    elements: list[tuple[str, int, list]] = []
    for lineno, raw_line in enumerate(lines[1:], start=2):
        tokens = raw_line.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        if tokens[0] == "format":
            if tokens[1] == "ascii":
                encoding = ASCII
            elif tokens[1] == "binary_little_endian":
                encoding = BINARY_LE
            else:
                raise UnsupportedEncoding(f"PLY format {tokens[1]!r}")
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(lineno, "property before any element")
            if tokens[1] == "list":
                elements[-1][2].append(("list", tokens[-1]))
            else:
                if tokens[1] not in _PLY_KINDS:
                    raise ParseError(lineno, f"unknown property kind {tokens[1]!r}")
                elements[-1][2].append((tokens[2], tokens[1]))
        else:
            raise ParseError(lineno, f"unknown header keyword {tokens[0]!r}")

    if encoding is None:
        raise UnsupportedEncoding("PLY header has no format line")
    vertex = next((e for e in elements if e[0] == "vertex"), None)
    if vertex is None:
        raise MissingProperty("PLY input has no vertex element")
    header = PlyHeader(encoding=encoding, count=vertex[1], properties=tuple(vertex[2]))
    return header, elements, offset


def read_ply(data: bytes) -> PointCloud:
    """Decode a PLY scene file.

    Positions come from x/y/z (required), colors from uchar red/green/blue
    when present, labels from an integer ``label`` property when present.
    Other vertex properties and all face data are skipped.
    """
    header, elements, offset = _parse_ply_header(data)

    names = [name for name, _ in header.properties]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise MissingProperty(f"vertex element lacks property {axis!r}")
    if any(name == "list" for name, _ in header.properties):
        raise UnsupportedEncoding("list property inside the vertex element")

    if header.encoding == ASCII:
        records = _read_ascii_vertices(data[offset:], header)
    else:
        records = _read_binary_vertices(data[offset:], header, elements)

    def column(name):
        return records[name] if name in names else None

    positions = np.stack(
        [records["x"], records["y"], records["z"]], axis=1
    ).astype(np.float64)

    colors = None
    if all(c in names for c in ("red", "green", "blue")):
        kinds = {name: kind for name, kind in header.properties}
        if all(kinds[c] in ("uchar", "uint8") for c in ("red", "green", "blue")):
            rgb = np.stack([records["red"], records["green"], records["blue"]], axis=1)
            colors = rgb.astype(np.float64) / 255.0

    labels = None
    label_col = column("label")
    if label_col is not None and np.issubdtype(label_col.dtype, np.integer):
        labels = label_col.astype(np.int64)

    return PointCloud(positions=positions, colors=colors, labels=labels)


def _read_binary_vertices(payload: bytes, header: PlyHeader, elements) -> dict[str, np.ndarray]:
    dtype = np.dtype([(name, _PLY_KINDS[kind]) for name, kind in header.properties])

    # Skip any scalar-only elements stored before the vertex element.
    skip = 0
    for name, count, props in elements:
        if name == "vertex":
            break
        if any(p[0] == "list" for p in props):
            raise UnsupportedEncoding(f"element {name!r} with list property precedes vertices")
        skip += count * np.dtype([(n, _PLY_KINDS[k]) for n, k in props]).itemsize

    needed = header.count * dtype.itemsize
    if len(payload) - skip < needed:
        raise Truncated(
            f"vertex payload holds {len(payload) - skip} bytes, "
            f"{needed} required for {header.count} points"
        )
    table = np.frombuffer(payload, dtype=dtype, count=header.count, offset=skip)
    return {name: table[name] for name, _ in header.properties}


def _read_ascii_vertices(payload: bytes, header: PlyHeader) -> dict[str, np.ndarray]:
    rows = []
    for line in payload.decode("ascii", errors="replace").splitlines():
        if not line.strip():
            continue
        rows.append(line.split())
        if len(rows) == header.count:
            break
    if len(rows) < header.count:
        raise Truncated(f"{len(rows)} ascii vertex lines, {header.count} declared")

    out: dict[str, np.ndarray] = {}
    for i, (name, kind) in enumerate(header.properties):
        values = [row[i] for row in rows]
        out[name] = np.asarray(values, dtype=np.dtype(_PLY_KINDS[kind]))
    return out


def write_ply(cloud: PointCloud, encoding: str = BINARY_LE) -> bytes:
    """Encode a cloud as PLY (positions float32, colors uchar, label uint32)."""
    if len(cloud) == 0:
        raise EmptyCloud("cannot write an empty PLY")
    if encoding not in (ASCII, BINARY_LE):
        raise UnsupportedEncoding(f"unsupported PLY encoding {encoding!r}")

    fields = [("x", "float"), ("y", "float"), ("z", "float")]
    if cloud.colors is not None:
        fields += [("red", "uchar"), ("green", "uchar"), ("blue", "uchar")]
    if cloud.labels is not None:
        fields += [("label", "uint")]

    format_name = "ascii" if encoding == ASCII else "binary_little_endian"
    header = ["ply", f"format {format_name} 1.0", f"element vertex {len(cloud)}"]
    header += [f"property {kind} {name}" for name, kind in fields]
    header += ["end_header", ""]
    head = "\n".join(header).encode("ascii")

    positions = cloud.positions.astype(np.float32)
    rgb = None
    if cloud.colors is not None:
        rgb = np.clip(np.rint(cloud.colors * 255.0), 0, 255).astype(np.uint8)
    labels = None
    if cloud.labels is not None:
        if np.any(cloud.labels < 0) or np.any(cloud.labels >= 1 << 32):
            raise ValueError("labels must fit in uint32 for PLY output")
        labels = cloud.labels.astype(np.uint32)

    if encoding == BINARY_LE:
        table = np.empty(len(cloud), dtype=np.dtype([(n, _PLY_KINDS[k]) for n, k in fields]))
        table["x"], table["y"], table["z"] = positions[:, 0], positions[:, 1], positions[:, 2]
        if rgb is not None:
            table["red"], table["green"], table["blue"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
        if labels is not None:
            table["label"] = labels
        return head + table.tobytes()

    def fmt(v32):
        return np.format_float_positional(v32, unique=True, trim="-")

    lines = []
    for i in range(len(cloud)):
        parts = [fmt(positions[i, 0]), fmt(positions[i, 1]), fmt(positions[i, 2])]
        if rgb is not None:
            parts += [str(v) for v in rgb[i]]
        if labels is not None:
            parts.append(str(labels[i]))
        lines.append(" ".join(parts))
    return head + ("\n".join(lines) + "\n").encode("ascii")


# ---------------------------------------------------------------------------
# Lidar bin + label pairs

def read_kitti_bin(data: bytes) -> PointCloud:
    """Decode packed x/y/z/reflectance float32 records (16 bytes per point)."""
    if len(data) % 16 != 0:
        raise Truncated(f"payload of {len(data)} bytes is not a multiple of 16")
    table = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    if table.size == 0:
        return PointCloud(positions=np.empty((0, 3)), features=np.empty(0))
    return PointCloud(
        positions=table[:, :3].astype(np.float64),
        features=table[:, 3].astype(np.float64),
    )


def write_kitti_bin(cloud: PointCloud) -> bytes:
    """Encode positions + feature channel (zeros when absent) as packed float32."""
    table = np.zeros((len(cloud), 4), dtype="<f4")
    table[:, :3] = cloud.positions.astype(np.float32)
    if cloud.features is not None:
        table[:, 3] = cloud.features.astype(np.float32)
    return table.tobytes()


def read_kitti_labels(data: bytes, point_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Decode one packed uint32 per point into (semantic, instance) arrays."""
    if len(data) != 4 * point_count:
        raise CountMismatch(
            f"label payload is {len(data)} bytes, expected {4 * point_count} "
            f"for {point_count} points"
        )
    raw = np.frombuffer(data, dtype="<u4")
    semantics = (raw & 0xFFFF).astype(np.int64)
    instances = (raw >> 16).astype(np.int64)
    return semantics, instances


def write_kitti_labels(labels: np.ndarray, instances: np.ndarray | None = None) -> bytes:
    """Encode semantic/instance ids into packed uint32 words."""
    labels = np.asarray(labels, dtype=np.int64)
    if instances is None:
        instances = np.zeros_like(labels)
    instances = np.asarray(instances, dtype=np.int64)
    if labels.shape != instances.shape:
        raise CountMismatch("labels and instances differ in length")
    if np.any((labels < 0) | (labels >= 1 << 16)) or np.any((instances < 0) | (instances >= 1 << 16)):
        raise ValueError("semantic and instance ids must fit in 16 bits")
    raw = (instances.astype(np.uint32) << 16) | labels.astype(np.uint32)
    return raw.astype("<u4").tobytes()


# ---------------------------------------------------------------------------
# Whitespace x y z r g b rooms

def read_xyzrgb_text(text: str) -> PointCloud:
    """Decode ``x y z r g b`` lines; colors 0..255 are normalized to [0, 1]."""
    positions, colors = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(lineno, f"expected 6 fields, got {len(fields)}")
        try:
            values = [float(v) for v in fields]
        except ValueError:
            raise ParseError(lineno, f"non-numeric field in {line!r}") from None
        r, g, b = values[3:]
        if not all(0 <= v <= 255 for v in (r, g, b)):
            raise ParseError(lineno, "color component outside 0..255")
        positions.append(values[:3])
        colors.append([r / 255.0, g / 255.0, b / 255.0])
    return PointCloud(
        positions=np.asarray(positions, dtype=np.float64).reshape(-1, 3),
        colors=np.asarray(colors, dtype=np.float64).reshape(-1, 3),
    )


# ---------------------------------------------------------------------------
# Path-level helpers used by the pipeline

def load_scene(path: str | Path, fmt: str) -> PointCloud:
    """Read one scene file of the given format ('ply', 'kitti' or 'xyzrgb').

    For 'kitti', a sibling ``.label`` file is merged in when present.
    """
    path = Path(path)
    if fmt == "ply":
        return read_ply(path.read_bytes())
    if fmt == "kitti":
        cloud = read_kitti_bin(path.read_bytes())
        label_path = path.with_suffix(".label")
        if label_path.exists():
            labels, instances = read_kitti_labels(label_path.read_bytes(), len(cloud))
            cloud = cloud.replace(labels=labels, instances=instances, loss_mask=None)
        return cloud
    if fmt == "xyzrgb":
        return read_xyzrgb_text(path.read_text())
    raise UnsupportedEncoding(f"unknown dataset format {fmt!r}")


def scene_extension(fmt: str) -> str:
    return {"ply": ".ply", "kitti": ".bin", "xyzrgb": ".txt"}[fmt]
