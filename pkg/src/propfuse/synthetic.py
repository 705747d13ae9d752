"""Synthetic scenes with exact ground truth.

A scene spec fixes a material library, per-segment true materials,
per-material true property distributions, a class-confusion channel, and a
confidence distribution. Sampling draws, in a fixed order from one seeded
generator, the material truths (optionally from the library's own priors),
one realized truth per (segment, property), and a splat lattice per segment
box, so everything downstream is reproducible from the seed.

Geometry is axis-aligned boxes only: volumes and masses are analytic. The
lattice is inset from each box face by a margin solved so that the
occupancy isosurface at the reference threshold tracks the box surface on
average, which keeps voxelized volumes within a few percent of the analytic
value. Splat coordinates are quantized to 2^-20 m so rigid translations on
that grid are exact in float arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import MaterialLibrary
from .errors import ValidationError
from .ingest import ObservationRecord
from .pointcloud import PointCloud
from .session import FusionSession

SCENE_SCHEMA = 1

COORD_QUANTUM = 2.0**-20  # ~1 micrometer; keeps translation tests exact

_OBS_STREAM_TAG = 0x0B5


@dataclass(frozen=True)
class ConfidenceSpec:
    """Confidence distribution for emitted observations.

    Default Beta(8, 2): mean 0.8, resembling typical reported scores and
    always inside (0, 1].
    """

    kind: str = "beta"
    a: float = 8.0
    b: float = 2.0
    value: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("beta", "fixed"):
            raise ValidationError(f"confidence kind must be 'beta' or 'fixed', got {self.kind!r}")
        if self.kind == "beta" and not (self.a > 0 and self.b > 0):
            raise ValidationError("beta confidence needs positive a and b")
        if self.kind == "fixed" and not 0.0 < self.value <= 1.0:
            raise ValidationError("fixed confidence must lie in (0, 1]")

    def draw(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed":
            return self.value
        return float(rng.beta(self.a, self.b))

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"kind": "fixed", "value": self.value}
        return {"kind": "beta", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class GeometrySpec:
    splats_per_edge: int = 12
    splat_scale: float | None = None  # default: 0.4 * coarsest lattice pitch
    opacity: float = 1.0
    face_margin: float | None = None  # default: solved against occupancy_theta
    occupancy_theta: float = 0.05

    def __post_init__(self) -> None:
        if self.splats_per_edge < 2:
            raise ValidationError("geometry needs at least 2 splats per edge")
        if not 0.0 < self.opacity <= 1.0:
            raise ValidationError(f"opacity must lie in (0, 1], got {self.opacity}")
        if not 0.0 < self.occupancy_theta < self.opacity:
            raise ValidationError("occupancy_theta must lie in (0, opacity)")

    def to_dict(self) -> dict:
        return {
            "splats_per_edge": self.splats_per_edge,
            "splat_scale": self.splat_scale,
            "opacity": self.opacity,
            "face_margin": self.face_margin,
            "occupancy_theta": self.occupancy_theta,
        }


@dataclass(frozen=True)
class BoxSegmentSpec:
    segment_id: str
    material: str
    box_min: tuple[float, float, float]
    box_size: tuple[float, float, float]

    def __post_init__(self) -> None:
        try:
            int(self.segment_id)
        except ValueError:
            raise ValidationError(
                f"segment id {self.segment_id!r} must be a decimal integer "
                f"(point clouds carry integer segment ids)"
            ) from None
        if not all(s > 0 for s in self.box_size):
            raise ValidationError(f"box_size components must be positive, got {self.box_size}")

    @property
    def volume(self) -> float:
        return float(np.prod(self.box_size))


@dataclass(frozen=True)
class SceneSpec:
    library: MaterialLibrary
    segments: tuple[BoxSegmentSpec, ...]
    seed: int = 0
    truth_mode: str = "fixed"  # "fixed" or "prior"
    true_params: Mapping[str, Mapping[str, tuple[float, float]]] = field(default_factory=dict)
    confidence: ConfidenceSpec = field(default_factory=ConfidenceSpec)
    confusion_eta: float = 0.0
    confusion_matrix: tuple[tuple[float, ...], ...] | None = None
    geometry: GeometrySpec = field(default_factory=GeometrySpec)

    def __post_init__(self) -> None:
        if self.truth_mode not in ("fixed", "prior"):
            raise ValidationError(f"truth_mode must be 'fixed' or 'prior', got {self.truth_mode!r}")
        if not self.segments:
            raise ValidationError("a scene needs at least one segment")
        ids = [s.segment_id for s in self.segments]
        if len(set(ids)) != len(ids):
            raise ValidationError("segment ids must be unique")
        for seg in self.segments:
            self.library.index_of(seg.material)
        if not 0.0 <= self.confusion_eta < 1.0:
            raise ValidationError(f"confusion_eta must lie in [0, 1), got {self.confusion_eta}")
        if self.truth_mode == "fixed":
            for material in {s.material for s in self.segments}:
                table = self.true_params.get(material, {})
                for prop in self.library.property_names:
                    if prop not in table:
                        raise ValidationError(
                            f"fixed truth mode: missing true_params for "
                            f"({material!r}, {prop!r})"
                        )
                    mean, sd = table[prop]
                    if not sd > 0:
                        raise ValidationError(
                            f"true sd for ({material!r}, {prop!r}) must be positive, got {sd}"
                        )

    def confusion(self) -> np.ndarray:
        k = self.library.k
        if self.confusion_matrix is not None:
            matrix = np.asarray(self.confusion_matrix, dtype=np.float64)
            if matrix.shape != (k, k):
                raise ValidationError(f"confusion matrix must be {k}x{k}, got {matrix.shape}")
            if np.any(matrix < 0) or np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-9):
                raise ValidationError("confusion matrix rows must be probability vectors")
            return matrix
        if k == 1:
            return np.ones((1, 1))
        eta = self.confusion_eta
        matrix = np.full((k, k), eta / (k - 1))
        np.fill_diagonal(matrix, 1.0 - eta)
        return matrix

    def to_dict(self) -> dict:
        data = {
            "schema": SCENE_SCHEMA,
            "seed": self.seed,
            "library": self.library.to_dict(),
            "truth_mode": self.truth_mode,
            "true_params": {
                m: {p: {"mean": mean, "sd": sd} for p, (mean, sd) in table.items()}
                for m, table in self.true_params.items()
            },
            "confidence": self.confidence.to_dict(),
            "confusion_eta": self.confusion_eta,
            "segments": [
                {
                    "id": s.segment_id,
                    "material": s.material,
                    "box_min": list(s.box_min),
                    "box_size": list(s.box_size),
                }
                for s in self.segments
            ],
            "geometry": self.geometry.to_dict(),
        }
        if self.confusion_matrix is not None:
            data["confusion_matrix"] = [list(row) for row in self.confusion_matrix]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        if not isinstance(data, dict):
            raise ValidationError("scene spec must be a JSON object")
        if data.get("schema", SCENE_SCHEMA) != SCENE_SCHEMA:
            raise ValidationError(f"unsupported scene schema {data.get('schema')!r}")
        library = MaterialLibrary.from_dict(data["library"])
        true_params = {
            m: {p: (float(entry["mean"]), float(entry["sd"])) for p, entry in table.items()}
            for m, table in data.get("true_params", {}).items()
        }
        conf = data.get("confidence", {})
        confidence = ConfidenceSpec(
            kind=conf.get("kind", "beta"),
            a=float(conf.get("a", 8.0)),
            b=float(conf.get("b", 2.0)),
            value=float(conf.get("value", 1.0)),
        )
        segments = tuple(
            BoxSegmentSpec(
                segment_id=str(entry["id"]),
                material=entry["material"],
                box_min=tuple(float(v) for v in entry["box_min"]),
                box_size=tuple(float(v) for v in entry["box_size"]),
            )
            for entry in data.get("segments", [])
        )
        geo = data.get("geometry", {})
        geometry = GeometrySpec(
            splats_per_edge=int(geo.get("splats_per_edge", 12)),
            splat_scale=(None if geo.get("splat_scale") is None else float(geo["splat_scale"])),
            opacity=float(geo.get("opacity", 1.0)),
            face_margin=(None if geo.get("face_margin") is None else float(geo["face_margin"])),
            occupancy_theta=float(geo.get("occupancy_theta", 0.05)),
        )
        matrix = data.get("confusion_matrix")
        return cls(
            library=library,
            segments=segments,
            seed=int(data.get("seed", 0)),
            truth_mode=data.get("truth_mode", "fixed"),
            true_params=true_params,
            confidence=confidence,
            confusion_eta=float(data.get("confusion_eta", 0.0)),
            confusion_matrix=None if matrix is None else tuple(tuple(row) for row in matrix),
            geometry=geometry,
        )

    @classmethod
    def load(cls, path: str | Path) -> "SceneSpec":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"scene spec {path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.round(values / COORD_QUANTUM) * COORD_QUANTUM


def _face_margin(size: Sequence[float], geo: GeometrySpec, scale: float) -> float:
    """Solve the lattice inset so the theta-level influence surface sits on
    the box face on average (a small fixed point: the pitch depends on the
    margin and the dimple correction on the pitch)."""
    reach = scale * math.sqrt(2.0 * math.log(geo.opacity / geo.occupancy_theta))
    n = geo.splats_per_edge
    margin = reach
    for _ in range(6):
        pitches = [(s - 2.0 * margin) / (n - 1) for s in size]
        if min(pitches) <= 0:
            raise ValidationError(
                "face margin exceeds half the box size; use more splats per edge "
                "or a smaller splat scale"
            )
        mean_sq = sum(p * p for p in pitches) / len(pitches)
        margin = reach - (mean_sq / 3.0) / (2.0 * reach)
    max_pitch = max((s - 2.0 * margin) / (n - 1) for s in size)
    if reach < (math.sqrt(3.0) / 2.0) * max_pitch:
        raise ValidationError(
            f"splat scale {scale} too small to cover the lattice interstices "
            f"(pitch {max_pitch:.4g}); increase the scale or splats_per_edge"
        )
    return margin


def _segment_lattice(seg: BoxSegmentSpec, geo: GeometrySpec) -> tuple[np.ndarray, float]:
    n = geo.splats_per_edge
    scale = geo.splat_scale
    if scale is None:
        scale = 0.4 * max(seg.box_size) / (n - 1)
    margin = geo.face_margin
    if margin is None:
        margin = _face_margin(seg.box_size, geo, scale)
    axes = [
        np.linspace(lo + margin, lo + size - margin, n)
        for lo, size in zip(seg.box_min, seg.box_size)
    ]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return _quantize(grid), scale


@dataclass
class Scene:
    """A sampled scene: truths, geometry, and the exact analytic aggregates."""

    spec: SceneSpec
    material_truth: dict[str, dict[str, tuple[float, float]]]
    segment_truth: dict[str, dict[str, float]]
    segment_class: dict[str, int]
    confusion: np.ndarray
    cloud: PointCloud
    volumes: dict[str, float]
    extent: float
    analytic_mass_kg: float | None

    @property
    def library(self) -> MaterialLibrary:
        return self.spec.library

    @property
    def seed(self) -> int:
        return self.spec.seed

    def truth_dict(self) -> dict:
        return {
            "schema": SCENE_SCHEMA,
            "seed": self.seed,
            "extent_m": self.extent,
            "analytic_mass_kg": self.analytic_mass_kg,
            "materials": {
                m: {p: {"mean": mean, "sd": sd} for p, (mean, sd) in table.items()}
                for m, table in self.material_truth.items()
            },
            "segments": [
                {
                    "id": seg.segment_id,
                    "material": seg.material,
                    "volume_m3": self.volumes[seg.segment_id],
                    "truth": dict(self.segment_truth[seg.segment_id]),
                }
                for seg in self.spec.segments
            ],
        }


def sample_scene(spec: SceneSpec) -> Scene:
    """Deterministically realize a scene from its spec and seed."""
    rng = np.random.default_rng(spec.seed)
    lib = spec.library

    material_truth: dict[str, dict[str, tuple[float, float]]] = {}
    for material in lib.classes:
        table: dict[str, tuple[float, float]] = {}
        for prop in lib.property_names:
            if spec.truth_mode == "fixed":
                fixed = spec.true_params.get(material, {}).get(prop)
                if fixed is None:
                    prior = lib.prior(material, prop)
                    fixed = (prior.tau, math.sqrt(prior.aleatoric))
                table[prop] = (float(fixed[0]), float(fixed[1]))
            else:
                prior = lib.prior(material, prop)
                variance = 1.0 / rng.gamma(prior.alpha, 1.0 / prior.beta)
                mean = rng.normal(prior.tau, math.sqrt(variance / prior.kappa))
                table[prop] = (float(mean), float(math.sqrt(variance)))
        material_truth[material] = table

    segment_truth: dict[str, dict[str, float]] = {}
    segment_class: dict[str, int] = {}
    for seg in spec.segments:
        segment_class[seg.segment_id] = lib.index_of(seg.material)
        truths: dict[str, float] = {}
        for prop in lib.property_names:
            mean, sd = material_truth[seg.material][prop]
            truths[prop] = float(rng.normal(mean, sd))
        segment_truth[seg.segment_id] = truths

    positions = []
    scales = []
    opacities = []
    segment_ids = []
    for seg in spec.segments:
        lattice, scale = _segment_lattice(seg, spec.geometry)
        positions.append(lattice)
        count = lattice.shape[0]
        scales.append(np.full((count, 3), scale))
        opacities.append(np.full(count, spec.geometry.opacity))
        segment_ids.append(np.full(count, int(seg.segment_id), dtype=np.int64))
    cloud = PointCloud(
        np.concatenate(positions),
        np.concatenate(scales),
        np.concatenate(opacities),
        np.concatenate(segment_ids),
    )

    volumes = {seg.segment_id: seg.volume for seg in spec.segments}
    box_lo = np.min([seg.box_min for seg in spec.segments], axis=0)
    box_hi = np.max(
        [np.add(seg.box_min, seg.box_size) for seg in spec.segments], axis=0
    )
    extent = float((box_hi - box_lo).max())

    analytic_mass = None
    if lib.has_property("density"):
        analytic_mass = sum(
            volumes[seg.segment_id] * segment_truth[seg.segment_id]["density"]
            for seg in spec.segments
        )

    return Scene(
        spec=spec,
        material_truth=material_truth,
        segment_truth=segment_truth,
        segment_class=segment_class,
        confusion=spec.confusion(),
        cloud=cloud,
        volumes=volumes,
        extent=extent,
        analytic_mass_kg=analytic_mass,
    )


def emit_observations(scene: Scene, views: int) -> list[ObservationRecord]:
    """Draw one response per (view, segment) through the confusion and
    confidence channels.

    Property values are drawn from the *emitted* class's true distribution:
    a mislabeling reports values consistent with the wrong material, the way
    a confidently wrong captioner would. Emitting more views extends, never
    reshuffles, the stream of a smaller emission with the same seed.
    """
    if views < 1:
        raise ValidationError(f"views must be at least 1, got {views}")
    lib = scene.library
    rng = np.random.default_rng([scene.seed, _OBS_STREAM_TAG])
    k = lib.k
    records: list[ObservationRecord] = []
    for view in range(views):
        view_id = f"view{view:04d}"
        for seg in scene.spec.segments:
            z = scene.segment_class[seg.segment_id]
            emitted = int(rng.choice(k, p=scene.confusion[z]))
            material = lib.classes[emitted]
            confidence = scene.spec.confidence.draw(rng)
            properties = {
                prop: float(rng.normal(*scene.material_truth[material][prop]))
                for prop in lib.property_names
            }
            records.append(
                ObservationRecord(
                    view_id=view_id,
                    segment_id=seg.segment_id,
                    material=material,
                    confidence=confidence,
                    properties=properties,
                )
            )
    return records


@dataclass(frozen=True)
class CoverageRow:
    level: float
    cells: int
    covered: int
    prior_only: int

    @property
    def coverage(self) -> float:
        return self.covered / self.cells if self.cells else float("nan")

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "cells": self.cells,
            "covered": self.covered,
            "coverage": self.coverage,
            "prior_only": self.prior_only,
        }


@dataclass(frozen=True)
class CoverageTable:
    rows: tuple[CoverageRow, ...]

    def row(self, level: float) -> CoverageRow:
        for row in self.rows:
            if row.level == level:
                return row
        raise KeyError(level)

    def to_dict(self) -> dict:
        return {"levels": [row.to_dict() for row in self.rows]}


def calibration_score(
    session: FusionSession, scene: Scene, levels: Sequence[float] = (0.5, 0.9)
) -> CoverageTable:
    """Fraction of (segment, property) truths inside central credible
    intervals of the session's predictive mixtures. Cells whose segment never
    absorbed evidence are still scored (from priors) and counted prior-only.
    """
    rows = []
    for level in levels:
        cells = 0
        covered = 0
        prior_only = 0
        for seg in scene.spec.segments:
            seg_id = seg.segment_id
            fresh = seg_id not in session.segments
            for prop in scene.library.property_names:
                truth = scene.segment_truth[seg_id][prop]
                lo, hi = session.mixture(seg_id, prop).interval(level)
                cells += 1
                covered += int(lo <= truth <= hi)
                prior_only += int(fresh)
        rows.append(CoverageRow(float(level), cells, covered, prior_only))
    return CoverageTable(tuple(rows))
