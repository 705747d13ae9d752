"""Error metrics between positive scalar predictions and ground truths.

Four complementary views of the same pair: absolute difference, absolute log
difference, absolute percentage error, and the minimum ratio (higher is
better, always in (0, 1]). Batch evaluation reports the unweighted mean of
each per-item metric; minimum ratio stays un-inverted in the aggregate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import NumericDomainError, ValidationError

CSV_HEADER = ("id", "ground_truth", "prediction")


def pair_metrics(truth: float, prediction: float) -> tuple[float, float, float, float]:
    """(ade, alde, ape, mnre) for one positive (truth, prediction) pair."""
    for name, value in (("ground truth", truth), ("prediction", prediction)):
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise NumericDomainError(f"{name} must be a positive finite number, got {value!r}")
    ade = abs(truth - prediction)
    alde = abs(math.log(truth) - math.log(prediction))
    ape = abs((truth - prediction) / truth)
    mnre = min(truth / prediction, prediction / truth)
    return ade, alde, ape, mnre


@dataclass(frozen=True)
class MetricRow:
    item_id: str
    ground_truth: float
    prediction: float
    ade: float
    alde: float
    ape: float
    mnre: float


@dataclass(frozen=True)
class MetricReport:
    rows: tuple[MetricRow, ...]
    ade: float
    alde: float
    ape: float
    mnre: float

    @property
    def n(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ade": self.ade,
            "alde": self.alde,
            "ape": self.ape,
            "mnre": self.mnre,
        }


def evaluate(
    pairs: Sequence[tuple[float, float]], ids: Sequence[str] | None = None
) -> MetricReport:
    """Per-item metrics plus unweighted means, in input order."""
    if ids is not None and len(ids) != len(pairs):
        raise ValidationError(f"got {len(ids)} ids for {len(pairs)} pairs")
    if not pairs:
        raise ValidationError("cannot evaluate an empty list of pairs")
    rows = []
    for i, (truth, prediction) in enumerate(pairs):
        item_id = ids[i] if ids is not None else str(i)
        try:
            ade, alde, ape, mnre = pair_metrics(truth, prediction)
        except NumericDomainError as exc:
            raise NumericDomainError(f"item {i} (id {item_id!r}): {exc}") from None
        rows.append(MetricRow(item_id, float(truth), float(prediction), ade, alde, ape, mnre))
    n = len(rows)
    return MetricReport(
        rows=tuple(rows),
        ade=sum(r.ade for r in rows) / n,
        alde=sum(r.alde for r in rows) / n,
        ape=sum(r.ape for r in rows) / n,
        mnre=sum(r.mnre for r in rows) / n,
    )


def read_pairs_csv(path: str | Path) -> tuple[list[str], list[tuple[float, float]]]:
    """Read an ``id,ground_truth,prediction`` CSV; malformed rows name their line."""
    ids: list[str] = []
    pairs: list[tuple[float, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty CSV") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValidationError(
                f"{path}: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ValidationError(f"{path}:{line_no}: expected 3 columns, got {len(row)}")
            try:
                truth = float(row[1])
                prediction = float(row[2])
            except ValueError:
                raise ValidationError(
                    f"{path}:{line_no}: non-numeric ground_truth or prediction"
                ) from None
            ids.append(row[0])
            pairs.append((truth, prediction))
    return ids, pairs


def write_report_csv(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "ground_truth", "prediction", "ade", "alde", "ape", "mnre"])
        for r in report.rows:
            writer.writerow(
                [r.item_id, r.ground_truth, r.prediction, r.ade, r.alde, r.ape, r.mnre]
            )


def write_report_json(report: MetricReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def evaluate_many(items: Iterable[tuple[str, float, float]]) -> MetricReport:
    """Convenience wrapper for (id, truth, prediction) triples."""
    items = list(items)
    return evaluate([(t, p) for _, t, p in items], [i for i, _, _ in items])
