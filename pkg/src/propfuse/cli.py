"""Command-line front end.

Subcommands: fuse, query, voxelize, mass, eval, simulate, inspect-snapshot.
Machine-readable JSON goes to stdout, human diagnostics to stderr. Exit
codes: 0 ok, 2 validation failure, 3 I/O or snapshot failure, 4 numeric
domain error. Options may come from a JSON config file (--config); explicit
flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .core import LIBRARY_SCHEMA, MaterialLibrary, PropertyPrior
from .errors import NumericDomainError, SnapshotError, ValidationError
from .field import (
    DEFAULT_THETA_OCC,
    SemanticPointField,
    default_voxel_edge,
    integrate_mass,
    voxelize,
)
from .ingest import OBSERVATION_SCHEMA, read_observations, write_observations
from .metrics import evaluate, read_pairs_csv, write_report_csv, write_report_json
from .pointcloud import load_pointcloud, save_ply
from .report import REPORT_SCHEMA, eval_scatter_figure, write_fuse_outputs, write_json
from .session import SNAPSHOT_SCHEMA, FusionConfig, FusionSession
from .synthetic import SCENE_SCHEMA, SceneSpec, emit_observations, sample_scene

_CONFIG_KEYS = {
    "evidence_strength", "alpha0", "var_floor", "backend",
    "voxel_edge", "theta_occ", "seed", "prior_overrides",
}


@dataclass
class RunConfig:
    evidence_strength: float = 1.0
    alpha0: object = 1.0
    var_floor: float = 1e-12
    backend: str = "nig"
    voxel_edge: float | None = None
    theta_occ: float = DEFAULT_THETA_OCC
    seed: int | None = None
    prior_overrides: dict | None = None

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunConfig":
        config = cls()
        path = getattr(args, "config", None)
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                try:
                    data = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"config {path}: invalid JSON ({exc})") from exc
            unknown = set(data) - _CONFIG_KEYS
            if unknown:
                raise ValidationError(f"config {path}: unknown keys {sorted(unknown)}")
            for key, value in data.items():
                setattr(config, key, value)
        for key in ("evidence_strength", "alpha0", "var_floor", "backend",
                    "voxel_edge", "theta_occ", "seed"):
            value = getattr(args, key, None)
            if value is not None:
                setattr(config, key, value)
        return config

    def fusion_config(self) -> FusionConfig:
        overrides = None
        if self.prior_overrides:
            overrides = {
                material: {
                    prop: PropertyPrior.from_value(raw) for prop, raw in table.items()
                }
                for material, table in self.prior_overrides.items()
            }
        return FusionConfig(
            evidence_strength=float(self.evidence_strength),
            alpha0=self.alpha0,
            var_floor=float(self.var_floor),
            backend=self.backend,
            prior_overrides=overrides,
        )


def _emit(data: dict) -> None:
    json.dump(data, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _load_field(snapshot_path: str, cloud_path: str) -> SemanticPointField:
    session = FusionSession.restore(Path(snapshot_path).read_bytes())
    cloud = load_pointcloud(cloud_path)
    return SemanticPointField(cloud, session)


def cmd_fuse(args: argparse.Namespace) -> int:
    config = RunConfig.resolve(args)
    library = MaterialLibrary.load(args.library)
    records, issues = read_observations(args.observations)
    for issue in issues:
        _info(f"{args.observations}:{issue.line}: {issue.message}")
    session = FusionSession(library, config.fusion_config())
    session.fuse(records)
    report = write_fuse_outputs(session, args.out_dir, figures=not args.no_figures)
    report["parse_issues"] = len(issues)
    counters = session.counters
    _info(
        f"fused {counters.absorbed} of {counters.seen} records "
        f"({counters.rejected} rejected, {len(issues)} parse issues) "
        f"into {len(session.segments)} segments -> {args.out_dir}"
    )
    _emit(report)
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    field = _load_field(args.snapshot, args.pointcloud)
    result = field.query_point(args.point_index, args.property)
    _emit(
        {
            "point_index": args.point_index,
            "segment_id": int(field.cloud.segment_ids[args.point_index]),
            "property": args.property,
            "mmse": result.mmse,
            "uncertainty": result.uncertainty.to_dict(),
            "map_material": result.material,
        }
    )
    return 0


def _resolved_edge(config: RunConfig, field: SemanticPointField) -> float:
    if config.voxel_edge is not None:
        return float(config.voxel_edge)
    edge = default_voxel_edge(field)
    _info(f"voxel edge not given; using extent/64 = {edge:.6g} m")
    return edge


def cmd_voxelize(args: argparse.Namespace) -> int:
    config = RunConfig.resolve(args)
    field = _load_field(args.snapshot, args.pointcloud)
    edge = _resolved_edge(config, field)
    grid = voxelize(field, edge, args.property, theta_occ=float(config.theta_occ))
    write_json(grid.to_dict(), args.out)
    _emit(
        {
            "out": str(args.out),
            "property": args.property,
            "voxel_edge_m": grid.edge,
            "theta_occ": grid.theta_occ,
            "dims": list(grid.dims),
            "occupied_voxels": grid.occupied_count,
            "unlabeled_points": field.unlabeled_count,
        }
    )
    return 0


def cmd_mass(args: argparse.Namespace) -> int:
    config = RunConfig.resolve(args)
    field = _load_field(args.snapshot, args.pointcloud)
    edge = _resolved_edge(config, field)
    grid = voxelize(field, edge, "density", theta_occ=float(config.theta_occ))
    estimate = integrate_mass(grid)
    payload = estimate.to_dict()
    payload["theta_occ"] = grid.theta_occ
    payload["unlabeled_points"] = field.unlabeled_count
    _emit(payload)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    ids, pairs = read_pairs_csv(args.pairs)
    report = evaluate(pairs, ids)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "metrics.csv")
    write_report_json(report, out / "metrics.json")
    if not args.no_figures:
        eval_scatter_figure(report, out / "metrics_scatter.png")
    _info(f"evaluated {report.n} pairs -> {out}")
    _emit(report.to_dict())
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = SceneSpec.load(args.scene)
    if args.seed is not None:
        spec = SceneSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    if args.views < 1:
        raise ValidationError(f"--views must be at least 1, got {args.views}")
    scene = sample_scene(spec)
    records = emit_observations(scene, args.views)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = write_observations(out / "observations.jsonl", records)
    write_json(scene.truth_dict(), out / "truth.json")
    scene.library.save(out / "library.json")
    save_ply(scene.cloud, out / "cloud.ply")
    _emit(
        {
            "out_dir": str(out),
            "seed": scene.seed,
            "views": args.views,
            "segments": len(spec.segments),
            "observation_lines": lines,
            "splats": len(scene.cloud),
            "extent_m": scene.extent,
            "analytic_mass_kg": scene.analytic_mass_kg,
            "files": ["observations.jsonl", "truth.json", "library.json", "cloud.ply"],
        }
    )
    return 0


def cmd_inspect_snapshot(args: argparse.Namespace) -> int:
    session = FusionSession.restore(Path(args.snapshot).read_bytes())
    _emit(
        {
            "schema": SNAPSHOT_SCHEMA,
            "backend": session.config.backend,
            "evidence_strength": session.config.evidence_strength,
            "materials": list(session.library.classes),
            "properties": list(session.library.property_names),
            "segments": session.segment_ids(),
            "counters": session.counters.to_dict(),
        }
    )
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--evidence-strength", dest="evidence_strength", type=float,
                        help="evidence strength multiplying each confidence (default 1.0)")
    parser.add_argument("--alpha0", type=float,
                        help="uniform prior concentration per class (default 1.0)")
    parser.add_argument("--var-floor", dest="var_floor", type=float,
                        help="variance floor for the moments backend (default 1e-12)")
    parser.add_argument("--backend", choices=("nig", "moments"),
                        help="posterior feeding the predictive mixture (default nig)")
    parser.add_argument("--voxel-edge", dest="voxel_edge", type=float,
                        help="voxel edge in meters (default: extent/64)")
    parser.add_argument("--theta-occ", dest="theta_occ", type=float,
                        help=f"occupancy threshold (default {DEFAULT_THETA_OCC})")
    parser.add_argument("--seed", type=int, help="seed override for simulate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propfuse",
        description="Fuse confidence-weighted material observations into "
                    "calibrated property fields and object-level estimates.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=(
            f"propfuse {__version__} (schemas: observations {OBSERVATION_SCHEMA}, "
            f"snapshot {SNAPSHOT_SCHEMA}, library {LIBRARY_SCHEMA}, "
            f"scene {SCENE_SCHEMA}, report {REPORT_SCHEMA})"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse an observation stream into belief snapshots")
    p.add_argument("observations", help="JSONL observation file")
    p.add_argument("library", help="material library JSON")
    p.add_argument("--out-dir", default="propfuse_out")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    _add_common(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("query", help="per-point property query against a snapshot")
    p.add_argument("snapshot")
    p.add_argument("pointcloud")
    p.add_argument("--point-index", dest="point_index", type=int, required=True)
    p.add_argument("--property", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("voxelize", help="discretize a field into an occupancy grid")
    p.add_argument("snapshot")
    p.add_argument("pointcloud")
    p.add_argument("--property", required=True)
    p.add_argument("--out", default="voxel_grid.json")
    _add_common(p)
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("mass", help="integrate density over the occupied volume")
    p.add_argument("snapshot")
    p.add_argument("pointcloud")
    _add_common(p)
    p.set_defaults(func=cmd_mass)

    p = sub.add_parser("eval", help="score predictions against ground truths")
    p.add_argument("pairs", help="CSV with header id,ground_truth,prediction")
    p.add_argument("--out-dir", default="eval_out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="sample a synthetic scene and emit observations")
    p.add_argument("scene", help="scene spec JSON")
    p.add_argument("--views", type=int, default=10)
    p.add_argument("--out-dir", default="sim_out")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("inspect-snapshot", help="summarize a belief snapshot")
    p.add_argument("snapshot")
    p.set_defaults(func=cmd_inspect_snapshot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericDomainError as exc:
        _info(f"error: {exc}")
        return 4
    except ValidationError as exc:
        _info(f"error: {exc}")
        return 2
    except (SnapshotError, OSError) as exc:
        _info(f"error: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
