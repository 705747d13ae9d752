"""Report serialization and the figures rendered alongside it.

The fuse report carries, per segment, the class posterior and per-property
point estimates with the uncertainty split; it is written as JSON plus a
flat CSV. Figures (class-posterior heatmap, predictive density curves,
evaluation scatter) are rendered headless to files next to the tabular
output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .metrics import MetricReport
from .session import FusionSession

REPORT_SCHEMA = 1

_DENSITY_CURVE_SEGMENTS = 12  # keep density figures readable


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def session_report(session: FusionSession) -> dict:
    """Machine-readable fuse summary: one entry per segment, sorted by id."""
    lib = session.library
    segments = []
    for segment_id in session.segment_ids():
        state = session.segments[segment_id]
        posterior = state.classes.class_posterior()
        map_index = state.classes.map_class()
        properties = {}
        for prop in lib.property_names:
            mix = session.mixture(segment_id, prop)
            report = session.uncertainty(segment_id, prop)
            properties[prop] = {"mmse": mix.mmse(), **report.to_dict()}
        segments.append(
            {
                "segment_id": segment_id,
                "observations": state.observations,
                "map_material": lib.classes[map_index],
                "class_posterior": {
                    material: float(p) for material, p in zip(lib.classes, posterior)
                },
                "properties": properties,
            }
        )
    return {
        "schema": REPORT_SCHEMA,
        "backend": session.config.backend,
        "materials": list(lib.classes),
        "properties": list(lib.property_names),
        "counters": session.counters.to_dict(),
        "segments": segments,
    }


def write_json(data: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_segment_csv(report: dict, path: str | Path) -> None:
    """Flatten the fuse report to one row per (segment, property)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "segment_id", "property", "map_material", "observations",
                "mmse", "aleatoric", "epistemic", "between_class", "total",
            ]
        )
        for entry in report["segments"]:
            for prop, stats in entry["properties"].items():
                writer.writerow(
                    [
                        entry["segment_id"], prop, entry["map_material"],
                        entry["observations"], stats["mmse"], stats["aleatoric"],
                        stats["epistemic"], stats["between_class"], stats["total"],
                    ]
                )


def class_posterior_figure(session: FusionSession, path: str | Path) -> Path:
    plt = _plt()
    lib = session.library
    ids = session.segment_ids()
    grid = np.array(
        [session.segments[s].classes.class_posterior() for s in ids]
    ).reshape(len(ids), lib.k)
    fig, ax = plt.subplots(
        figsize=(1.2 + 0.6 * lib.k, 1.2 + 0.35 * max(len(ids), 1)), constrained_layout=True
    )
    image = ax.imshow(grid, aspect="auto", vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(lib.k), lib.classes, rotation=45, ha="right")
    ax.set_yticks(range(len(ids)), ids)
    ax.set_xlabel("material")
    ax.set_ylabel("segment")
    fig.colorbar(image, ax=ax, label="posterior probability")
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def property_density_figure(
    session: FusionSession, property_name: str, path: str | Path
) -> Path:
    plt = _plt()
    ids = session.segment_ids()[:_DENSITY_CURVE_SEGMENTS]
    fig, ax = plt.subplots(figsize=(7, 4), constrained_layout=True)
    for segment_id in ids:
        mix = session.mixture(segment_id, property_name)
        lo, hi = mix.interval(0.99)
        xs = np.linspace(lo, hi, 400)
        ax.plot(xs, mix.density(xs), label=f"segment {segment_id}")
        ax.axvline(mix.mmse(), linestyle=":", linewidth=0.8, color="gray")
    kind = session.library.property_kind(property_name)
    units = f" [{kind.units}]" if kind.units else ""
    ax.set_xlabel(f"{property_name}{units}")
    ax.set_ylabel("predictive density")
    if ids:
        ax.legend(fontsize=7)
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def eval_scatter_figure(report: MetricReport, path: str | Path) -> Path:
    plt = _plt()
    truth = np.array([r.ground_truth for r in report.rows])
    pred = np.array([r.prediction for r in report.rows])
    fig, ax = plt.subplots(figsize=(5, 5), constrained_layout=True)
    ax.loglog(truth, pred, "o", markersize=4, alpha=0.7)
    span = [min(truth.min(), pred.min()), max(truth.max(), pred.max())]
    ax.loglog(span, span, "k--", linewidth=0.8)
    ax.set_xlabel("ground truth")
    ax.set_ylabel("prediction")
    ax.set_title(
        f"ADE {report.ade:.3g}  ALDE {report.alde:.3g}  "
        f"APE {report.ape:.3g}  MnRE {report.mnre:.3g}"
    )
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_fuse_outputs(
    session: FusionSession, out_dir: str | Path, figures: bool = True
) -> dict:
    """Write snapshot, JSON report, CSV table, and figures; returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = session_report(session)
    (out / "snapshot.json").write_bytes(session.snapshot())
    write_json(report, out / "report.json")
    write_segment_csv(report, out / "report.csv")
    if figures and session.segments:
        fig_dir = out / "figures"
        fig_dir.mkdir(exist_ok=True)
        class_posterior_figure(session, fig_dir / "class_posterior.png")
        for prop in session.library.property_names:
            property_density_figure(session, prop, fig_dir / f"density_{prop}.png")
    return report
