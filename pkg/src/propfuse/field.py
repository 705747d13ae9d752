"""3D property fields over splat point clouds.

A field pairs a labeled point cloud with a fusion session. Per-point queries
answer directly from the point's segment beliefs; volume aggregates first
discretize the cloud into a voxel grid. A voxel is occupied when at least one
splat's opacity-weighted influence at the voxel center exceeds the occupancy
threshold, where influence is ``opacity * exp(-d^2 / 2)`` with ``d`` the
Mahalanobis distance under the splat's diagonal scales. Splat segment ids
are matched to session segment ids by their decimal string form; unlabeled
points (negative ids) are excluded from occupancy and aggregates, with their
count reported.

All geometry is computed relative to the cloud's own bounding box, so rigid
translation leaves voxel contents bit-identical whenever the translated
coordinates round the same way (exact for shifts on the coordinates' binary
grid, e.g. the synthetic scenes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .core import MaterialLibrary, PropertyKind, UNLABELED_COLOR
from .errors import NumericDomainError, ValidationError
from .nig import UncertaintyReport
from .pointcloud import PointCloud, UNLABELED_SEGMENT
from .session import FusionSession

DEFAULT_THETA_OCC = 0.05
#: Default voxel edge: longest bounding-box extent divided by this.
DEFAULT_EDGE_DIVISIONS = 64

_MAX_OFFSETS = 200_000  # guard against voxel edges far below the splat scale


@dataclass(frozen=True)
class PointQuery:
    mmse: float
    uncertainty: UncertaintyReport
    material_index: int
    material: str


class SemanticPointField:
    """A splat cloud whose segments carry fused material/property beliefs."""

    def __init__(self, cloud: PointCloud, session: FusionSession):
        self.cloud = cloud
        self.session = session

    @property
    def library(self) -> MaterialLibrary:
        return self.session.library

    @property
    def unlabeled_count(self) -> int:
        return self.cloud.unlabeled_count

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if len(self.cloud) == 0:
            raise ValidationError("field has no points")
        return self.cloud.positions.min(axis=0), self.cloud.positions.max(axis=0)

    def segment_key(self, segment_id: int) -> str:
        return str(int(segment_id))

    def query_point(self, index: int, property_name: str) -> PointQuery:
        """MMSE estimate, uncertainty split, and most probable material for one point."""
        if not 0 <= index < len(self.cloud):
            raise ValidationError(f"point index {index} out of range")
        segment = int(self.cloud.segment_ids[index])
        if segment == UNLABELED_SEGMENT:
            raise ValidationError(f"point {index} is unlabeled")
        key = self.segment_key(segment)
        mix = self.session.mixture(key, property_name)
        report = self.session.uncertainty(key, property_name)
        material_index = self.session.map_class(key)
        return PointQuery(
            mmse=mix.mmse(),
            uncertainty=report,
            material_index=material_index,
            material=self.library.classes[material_index],
        )


@dataclass(frozen=True)
class VoxelGrid:
    """Occupancy plus per-voxel property summaries on a regular grid."""

    origin: np.ndarray
    edge: float
    dims: tuple[int, int, int]
    occupied: np.ndarray          # flat bool, C order over dims
    values: np.ndarray            # flat float, NaN where unoccupied
    uncertainties: np.ndarray     # flat float, NaN where unoccupied
    dominant_segment: np.ndarray  # flat int64, -1 where unoccupied
    property_kind: PropertyKind
    theta_occ: float

    @property
    def occupied_count(self) -> int:
        return int(self.occupied.sum())

    def occupied_indices(self) -> np.ndarray:
        return np.argwhere(self.occupied.reshape(self.dims))

    def to_dict(self) -> dict:
        mask = self.occupied
        return {
            "schema": 1,
            "origin": self.origin.tolist(),
            "edge": self.edge,
            "dims": list(self.dims),
            "theta_occ": self.theta_occ,
            "property": {
                "name": self.property_kind.name,
                "units": self.property_kind.units,
            },
            "occupied": self.occupied_indices().tolist(),
            "values": self.values[mask].tolist(),
            "uncertainties": self.uncertainties[mask].tolist(),
            "segments": self.dominant_segment[mask].tolist(),
        }


def voxelize(
    field: SemanticPointField,
    voxel_edge: float,
    property_name: str,
    theta_occ: float = DEFAULT_THETA_OCC,
) -> VoxelGrid:
    """Discretize the field into occupancy plus influence-weighted summaries.

    Contributions are truncated at the occupancy isosurface: a splat only
    reaches voxels where its influence could exceed ``theta_occ``, so
    well-separated segments never blend.
    """
    if not voxel_edge > 0:
        raise ValidationError(f"voxel edge must be positive, got {voxel_edge}")
    if not 0.0 < theta_occ < 1.0:
        raise ValidationError(f"theta_occ must lie in (0, 1), got {theta_occ}")
    kind = field.library.property_kind(property_name)
    cloud = field.cloud
    if len(cloud) == 0:
        raise ValidationError("cannot voxelize an empty field")
    labeled = cloud.labeled_mask
    if not labeled.any():
        raise ValidationError("cannot voxelize a field with no labeled points")

    positions = cloud.positions[labeled]
    scales = cloud.scales[labeled]
    opacities = cloud.opacities[labeled]
    segments = cloud.segment_ids[labeled]

    # Per-splat reach of the theta-level influence surface, per axis.
    with np.errstate(divide="ignore"):
        ratio = np.where(opacities > theta_occ, opacities / theta_occ, 1.0)
    radius = np.sqrt(2.0 * np.log(ratio))  # zero for opacity <= theta
    reach = scales * radius[:, None]

    bounds_min = positions.min(axis=0)
    bounds_max = positions.max(axis=0)
    pad = float(reach.max(initial=0.0))
    # Relative frame: (p - bounds) is exact for grid-aligned translations,
    # the pad offset is a shared constant.
    rel = (positions - bounds_min) + pad
    span = (bounds_max - bounds_min) + 2.0 * pad
    dims = tuple(int(np.floor(s / voxel_edge)) + 1 for s in span)
    n_vox = int(np.prod(dims))

    per_axis = np.ceil(reach.max(axis=0, initial=0.0) / voxel_edge + 0.5).astype(int)
    if int(np.prod(2 * per_axis + 1)) > _MAX_OFFSETS:
        raise ValidationError(
            f"voxel edge {voxel_edge} is far below the splat scale; "
            f"the influence stencil would span {tuple(2 * per_axis + 1)} voxels"
        )

    max_infl = np.zeros(n_vox)
    infl_sum = np.zeros(n_vox)
    val_sum = np.zeros(n_vox)
    unc_sum = np.zeros(n_vox)
    best_seg_infl = np.zeros(n_vox)
    dominant = np.full(n_vox, UNLABELED_SEGMENT, dtype=np.int64)

    strides = np.array([dims[1] * dims[2], dims[2], 1], dtype=np.int64)
    offsets = [
        np.array(d, dtype=np.int64)
        for d in product(*(range(-m, m + 1) for m in per_axis))
    ]

    for segment in np.unique(segments):
        key = field.segment_key(segment)
        seg_value = field.session.mixture(key, property_name).mmse()
        seg_unc = field.session.uncertainty(key, property_name).total
        take = segments == segment
        pts = rel[take]
        scl = scales[take]
        opa = opacities[take]
        active = opa > theta_occ
        if not active.any():
            continue
        pts, scl, opa = pts[active], scl[active], opa[active]
        base = np.floor(pts / voxel_edge).astype(np.int64)
        seg_infl = np.zeros(n_vox)
        for d in offsets:
            idx = base + d
            ok = np.all((idx >= 0) & (idx < np.array(dims)), axis=1)
            if not ok.any():
                continue
            idx = idx[ok]
            centers = (idx + 0.5) * voxel_edge
            z2 = (((centers - pts[ok]) / scl[ok]) ** 2).sum(axis=1)
            infl = opa[ok] * np.exp(-0.5 * z2)
            flat = idx @ strides
            np.maximum.at(max_infl, flat, infl)
            infl_sum += np.bincount(flat, weights=infl, minlength=n_vox)
            seg_infl += np.bincount(flat, weights=infl, minlength=n_vox)
        val_sum += seg_infl * seg_value
        unc_sum += seg_infl * seg_unc
        better = seg_infl > best_seg_infl
        dominant[better] = segment
        best_seg_infl = np.maximum(best_seg_infl, seg_infl)

    occupied = max_infl > theta_occ
    values = np.full(n_vox, np.nan)
    uncertainties = np.full(n_vox, np.nan)
    values[occupied] = val_sum[occupied] / infl_sum[occupied]
    uncertainties[occupied] = unc_sum[occupied] / infl_sum[occupied]
    dominant[~occupied] = UNLABELED_SEGMENT

    origin = bounds_min - pad
    origin.flags.writeable = False
    return VoxelGrid(
        origin=origin,
        edge=float(voxel_edge),
        dims=dims,
        occupied=occupied,
        values=values,
        uncertainties=uncertainties,
        dominant_segment=dominant,
        property_kind=kind,
        theta_occ=float(theta_occ),
    )


@dataclass(frozen=True)
class MassEstimate:
    mass_kg: float
    variance_kg2: float
    occupied_voxels: int
    voxel_edge: float
    volume_m3: float

    @property
    def sd_kg(self) -> float:
        return math.sqrt(self.variance_kg2)

    def to_dict(self) -> dict:
        return {
            "mass_kg": self.mass_kg,
            "uncertainty_kg2": self.variance_kg2,
            "sd_kg": self.sd_kg,
            "occupied_voxels": self.occupied_voxels,
            "voxel_edge_m": self.voxel_edge,
            "volume_m3": self.volume_m3,
        }


def integrate_mass(grid: VoxelGrid) -> MassEstimate:
    """Sum density over occupied voxels; propagate uncertainty treating voxels
    of one segment as perfectly correlated and distinct segments as
    independent (sum of standard deviations within, of variances across).
    """
    if grid.property_kind.name != "density":
        raise NumericDomainError(
            f"mass integration needs a density grid, got {grid.property_kind.name!r} "
            f"({grid.property_kind.units or 'no units'})"
        )
    cell_volume = grid.edge**3
    mask = grid.occupied
    mass = float(grid.values[mask].sum()) * cell_volume
    variance = 0.0
    sds = np.sqrt(grid.uncertainties[mask])
    for segment in np.unique(grid.dominant_segment[mask]):
        seg_sd = float(sds[grid.dominant_segment[mask] == segment].sum()) * cell_volume
        variance += seg_sd * seg_sd
    return MassEstimate(
        mass_kg=mass,
        variance_kg2=variance,
        occupied_voxels=grid.occupied_count,
        voxel_edge=grid.edge,
        volume_m3=grid.occupied_count * cell_volume,
    )


def default_voxel_edge(field: SemanticPointField) -> float:
    lo, hi = field.bounds()
    extent = float((hi - lo).max())
    if extent <= 0:
        raise ValidationError("field extent is zero; pass an explicit voxel edge")
    return extent / DEFAULT_EDGE_DIVISIONS


@dataclass(frozen=True)
class MaterialMap:
    """Per-point display colors keyed by each segment's most probable material."""

    positions: np.ndarray
    colors: np.ndarray            # (n, 3) uint8
    material_indices: np.ndarray  # (n,) int64, -1 for unlabeled
    unlabeled_count: int

    def rows(self, library: MaterialLibrary):
        for i in range(self.positions.shape[0]):
            index = int(self.material_indices[i])
            yield {
                "x": float(self.positions[i, 0]),
                "y": float(self.positions[i, 1]),
                "z": float(self.positions[i, 2]),
                "r": int(self.colors[i, 0]),
                "g": int(self.colors[i, 1]),
                "b": int(self.colors[i, 2]),
                "material": library.classes[index] if index >= 0 else "",
            }


def export_material_map(field: SemanticPointField) -> MaterialMap:
    """Color every point by its segment's most probable material; unlabeled
    points receive the reserved sentinel color."""
    cloud = field.cloud
    n = len(cloud)
    colors = np.tile(np.array(UNLABELED_COLOR, dtype=np.uint8), (n, 1))
    material_indices = np.full(n, -1, dtype=np.int64)
    labeled = cloud.labeled_mask
    for segment in np.unique(cloud.segment_ids[labeled]):
        index = field.session.map_class(field.segment_key(segment))
        rgb = field.library.color(field.library.classes[index])
        take = cloud.segment_ids == segment
        colors[take] = np.array(rgb, dtype=np.uint8)
        material_indices[take] = index
    return MaterialMap(
        positions=cloud.positions,
        colors=colors,
        material_indices=material_indices,
        unlabeled_count=cloud.unlabeled_count,
    )
