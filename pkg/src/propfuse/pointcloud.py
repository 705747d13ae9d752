"""Splat point cloud I/O.

The native format is PLY (binary little-endian or ASCII) with per-vertex
properties ``x y z scale_0 scale_1 scale_2 opacity segment_id``. Scales are
Gaussian standard deviations in meters, opacity lies in [0, 1], and
``segment_id`` is an integer matched to observation segment ids by its
decimal string form; -1 marks unlabeled points. Rotation properties
(``rot_*``), if present, are ignored with a warning: occupancy uses the
axis-aligned diagonal covariance only. A JSON fallback with the same fields
is accepted and written for hand-edited fixtures.

Coordinates are assumed metric; reconstructions without a metric scale
calibration will produce masses in the wrong units.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

UNLABELED_SEGMENT = -1

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_REQUIRED = ("x", "y", "z", "scale_0", "scale_1", "scale_2", "opacity", "segment_id")


@dataclass(frozen=True, slots=True)
class SplatPoint:
    """A single Gaussian splat; bulk data lives in :class:`PointCloud` arrays."""

    position: tuple[float, float, float]
    scale: tuple[float, float, float]
    opacity: float
    segment_id: int = UNLABELED_SEGMENT

    def __post_init__(self) -> None:
        if not all(s > 0 for s in self.scale):
            raise ValidationError(f"scale components must be positive, got {self.scale}")
        if not 0.0 <= self.opacity <= 1.0:
            raise ValidationError(f"opacity must lie in [0, 1], got {self.opacity}")


@dataclass(frozen=True)
class PointCloud:
    positions: np.ndarray  # (n, 3) float64
    scales: np.ndarray     # (n, 3) float64, strictly positive
    opacities: np.ndarray  # (n,) float64 in [0, 1]
    segment_ids: np.ndarray  # (n,) int64, UNLABELED_SEGMENT marks unlabeled

    def __post_init__(self) -> None:
        positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        scales = np.asarray(self.scales, dtype=np.float64).reshape(-1, 3)
        opacities = np.asarray(self.opacities, dtype=np.float64).reshape(-1)
        segment_ids = np.asarray(self.segment_ids, dtype=np.int64).reshape(-1)
        n = positions.shape[0]
        if not (scales.shape[0] == opacities.size == segment_ids.size == n):
            raise ValidationError("point cloud arrays have mismatched lengths")
        if not np.all(np.isfinite(positions)):
            raise ValidationError("point positions must be finite")
        if not np.all(scales > 0):
            raise ValidationError("scale components must be positive")
        if np.any(opacities < 0) or np.any(opacities > 1):
            raise ValidationError("opacities must lie in [0, 1]")
        for name, arr in (
            ("positions", positions), ("scales", scales),
            ("opacities", opacities), ("segment_ids", segment_ids),
        ):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_points(cls, points: Iterable[SplatPoint]) -> "PointCloud":
        points = list(points)
        return cls(
            np.array([p.position for p in points], dtype=np.float64).reshape(-1, 3),
            np.array([p.scale for p in points], dtype=np.float64).reshape(-1, 3),
            np.array([p.opacity for p in points], dtype=np.float64),
            np.array([p.segment_id for p in points], dtype=np.int64),
        )

    def translated(self, offset: Sequence[float]) -> "PointCloud":
        shift = np.asarray(offset, dtype=np.float64).reshape(3)
        return PointCloud(self.positions + shift, self.scales, self.opacities, self.segment_ids)

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.segment_ids != UNLABELED_SEGMENT

    @property
    def unlabeled_count(self) -> int:
        return int((~self.labeled_mask).sum())


def _from_columns(columns: dict[str, np.ndarray]) -> PointCloud:
    missing = [name for name in _REQUIRED if name not in columns]
    if missing:
        raise ValidationError(f"point cloud is missing properties: {missing}")
    return PointCloud(
        np.stack([columns["x"], columns["y"], columns["z"]], axis=1).astype(np.float64),
        np.stack(
            [columns["scale_0"], columns["scale_1"], columns["scale_2"]], axis=1
        ).astype(np.float64),
        columns["opacity"].astype(np.float64),
        np.asarray(columns["segment_id"]).astype(np.int64),
    )


def _parse_ply_header(blob: bytes):
    end = blob.find(b"end_header")
    if not blob.startswith(b"ply") or end < 0:
        raise ValidationError("not a PLY file (missing ply/end_header)")
    end = blob.index(b"\n", end) + 1
    header = blob[:end].decode("ascii", errors="replace").splitlines()
    fmt = None
    count = None
    fields: list[tuple[str, str]] = []
    in_vertex = False
    for line in header[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise ValidationError("list properties are not supported for vertices")
            fields.append((parts[2], parts[1]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValidationError(f"unsupported PLY format {fmt!r}")
    if count is None:
        raise ValidationError("PLY file has no vertex element")
    return fmt, count, fields, end


def _warn_ignored(fields: Sequence[tuple[str, str]]) -> None:
    rotations = [name for name, _ in fields if name.startswith("rot_")]
    if rotations:
        warnings.warn(
            "rotation properties present in point cloud are ignored; occupancy "
            "uses axis-aligned splat scales only",
            stacklevel=3,
        )


def load_ply(path: str | Path) -> PointCloud:
    blob = Path(path).read_bytes()
    fmt, count, fields, body_start = _parse_ply_header(blob)
    _warn_ignored(fields)
    names = [name for name, _ in fields]
    if fmt == "binary_little_endian":
        dtype = np.dtype([(name, "<" + _PLY_TYPES[kind]) for name, kind in fields])
        body = blob[body_start : body_start + dtype.itemsize * count]
        if len(body) < dtype.itemsize * count:
            raise ValidationError(
                f"PLY body truncated: expected {dtype.itemsize * count} bytes, "
                f"got {len(body)}"
            )
        table = np.frombuffer(body, dtype=dtype, count=count)
        columns = {name: np.asarray(table[name]) for name in names}
    else:
        text = blob[body_start:].decode("ascii", errors="replace").split()
        width = len(fields)
        if len(text) < width * count:
            raise ValidationError("ASCII PLY body truncated")
        grid = np.array(text[: width * count], dtype=np.float64).reshape(count, width)
        columns = {name: grid[:, i] for i, (name, _) in enumerate(fields)}
    return _from_columns(columns)


def save_ply(cloud: PointCloud, path: str | Path, binary: bool = True) -> None:
    n = len(cloud)
    header = [
        "ply",
        "format binary_little_endian 1.0" if binary else "format ascii 1.0",
        f"element vertex {n}",
    ]
    header += [f"property double {name}" for name in _REQUIRED[:7]]
    header += ["property int segment_id", "end_header"]
    columns = cloud.positions.T.tolist() + cloud.scales.T.tolist() + [cloud.opacities]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            dtype = np.dtype([(name, "<f8") for name in _REQUIRED[:7]] + [("segment_id", "<i4")])
            table = np.empty(n, dtype=dtype)
            for i, name in enumerate(_REQUIRED[:7]):
                table[name] = columns[i]
            table["segment_id"] = cloud.segment_ids
            fh.write(table.tobytes())
        else:
            for i in range(n):
                row = [repr(float(col[i])) for col in columns]
                row.append(str(int(cloud.segment_ids[i])))
                fh.write((" ".join(row) + "\n").encode("ascii"))


def load_json_cloud(path: str | Path) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"point cloud {path}: invalid JSON ({exc})") from exc
    points = data.get("points") if isinstance(data, dict) else None
    if not isinstance(points, list):
        raise ValidationError("JSON point cloud must contain a 'points' array")
    try:
        return PointCloud(
            np.array([p["position"] for p in points], dtype=np.float64).reshape(-1, 3),
            np.array([p["scale"] for p in points], dtype=np.float64).reshape(-1, 3),
            np.array([p["opacity"] for p in points], dtype=np.float64),
            np.array([p.get("segment_id", UNLABELED_SEGMENT) for p in points], dtype=np.int64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"JSON point cloud rows are malformed: {exc!r}") from exc


def save_json_cloud(cloud: PointCloud, path: str | Path) -> None:
    rows = [
        {
            "position": cloud.positions[i].tolist(),
            "scale": cloud.scales[i].tolist(),
            "opacity": float(cloud.opacities[i]),
            "segment_id": int(cloud.segment_ids[i]),
        }
        for i in range(len(cloud))
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"schema": 1, "points": rows}, fh)
        fh.write("\n")


def load_pointcloud(path: str | Path) -> PointCloud:
    """Dispatch on extension: .ply (binary or ASCII) or .json fallback."""
    suffix = Path(path).suffix.lower()
    if suffix == ".ply":
        return load_ply(path)
    if suffix == ".json":
        return load_json_cloud(path)
    raise ValidationError(f"unsupported point cloud format {suffix!r} (use .ply or .json)")
