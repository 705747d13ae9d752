"""Observation file parsing.

One JSONL line holds one view-segment response: a caption plus one or more
material candidates, each with a confidence and property estimates. Every
candidate becomes its own record sharing the line's segment and view ids.
Malformed lines or candidates never abort the stream; they are collected as
issues with their line number.

Line schema (``schema`` is required and versioned):

    {"schema": 1, "view_id": "v0", "segment_id": "3", "caption": "...",
     "candidates": [{"material": "wood", "confidence": 0.8,
                     "properties": {"density": 700.0}}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

OBSERVATION_SCHEMA = 1


@dataclass(frozen=True)
class ObservationRecord:
    """One material candidate from one view-segment response line."""

    view_id: str
    segment_id: str
    material: str
    confidence: float
    properties: Mapping[str, float] = field(default_factory=dict)
    caption: str | None = None
    source_line: int | None = None


@dataclass(frozen=True)
class ParseIssue:
    line: int
    message: str


def _identifier(value) -> str | None:
    if isinstance(value, str) and value:
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return None


def _parse_candidate(entry, line_no: int, index: int) -> tuple[dict | None, str | None]:
    if not isinstance(entry, dict):
        return None, f"candidate {index}: expected an object"
    material = entry.get("material")
    if not isinstance(material, str) or not material:
        return None, f"candidate {index}: missing material name"
    confidence = entry.get("confidence")
    if isinstance(confidence, bool) or not isinstance(confidence, (int, float)):
        return None, f"candidate {index}: confidence must be a number"
    if not 0.0 <= float(confidence) <= 1.0:
        return None, f"candidate {index}: confidence {confidence} outside [0, 1]"
    raw_props = entry.get("properties", {})
    if not isinstance(raw_props, dict):
        return None, f"candidate {index}: properties must be an object"
    properties: dict[str, float] = {}
    for name, value in raw_props.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return None, f"candidate {index}: property {name!r} must be a number"
        properties[str(name)] = float(value)
    return {
        "material": material,
        "confidence": float(confidence),
        "properties": properties,
    }, None


def parse_observation_lines(
    lines: Iterable[str],
) -> tuple[list[ObservationRecord], list[ParseIssue]]:
    """Parse JSONL content into records plus line-precise issues.

    Candidate-level problems reject only that candidate; its siblings on the
    same line survive. Blank lines are skipped.
    """
    records: list[ObservationRecord] = []
    issues: list[ParseIssue] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
        except (json.JSONDecodeError, RecursionError) as exc:
            issues.append(ParseIssue(line_no, f"invalid JSON: {exc}"))
            continue
        if not isinstance(data, dict):
            issues.append(ParseIssue(line_no, "expected a JSON object"))
            continue
        schema = data.get("schema")
        if schema != OBSERVATION_SCHEMA:
            issues.append(ParseIssue(line_no, f"unsupported schema {schema!r}"))
            continue
        view_id = _identifier(data.get("view_id"))
        segment_id = _identifier(data.get("segment_id"))
        if view_id is None or segment_id is None:
            issues.append(ParseIssue(line_no, "missing view_id or segment_id"))
            continue
        caption = data.get("caption")
        if caption is not None and not isinstance(caption, str):
            caption = None
        candidates = data.get("candidates")
        if not isinstance(candidates, list):
            issues.append(ParseIssue(line_no, "candidates must be an array"))
            continue
        for index, entry in enumerate(candidates):
            parsed, problem = _parse_candidate(entry, line_no, index)
            if problem is not None:
                issues.append(ParseIssue(line_no, problem))
                continue
            records.append(
                ObservationRecord(
                    view_id=view_id,
                    segment_id=segment_id,
                    material=parsed["material"],
                    confidence=parsed["confidence"],
                    properties=parsed["properties"],
                    caption=caption,
                    source_line=line_no,
                )
            )
    return records, issues


def read_observations(path: str | Path) -> tuple[list[ObservationRecord], list[ParseIssue]]:
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        return parse_observation_lines(fh)


def observation_line(
    view_id: str,
    segment_id: str,
    candidates: list[dict],
    caption: str | None = None,
) -> str:
    """Format one response line; candidates are dicts with material,
    confidence and properties keys."""
    payload = {
        "schema": OBSERVATION_SCHEMA,
        "view_id": view_id,
        "segment_id": segment_id,
        "candidates": candidates,
    }
    if caption is not None:
        payload["caption"] = caption
    return json.dumps(payload, sort_keys=True)


def records_to_lines(records: Iterable[ObservationRecord]) -> list[str]:
    """Serialize records back to JSONL, grouping consecutive records that
    share a view and segment into one line."""
    lines: list[str] = []
    group: list[ObservationRecord] = []

    def flush() -> None:
        if not group:
            return
        head = group[0]
        candidates = [
            {
                "material": r.material,
                "confidence": r.confidence,
                "properties": dict(r.properties),
            }
            for r in group
        ]
        lines.append(observation_line(head.view_id, head.segment_id, candidates, head.caption))
        group.clear()

    for record in records:
        if group and (
            record.view_id != group[0].view_id or record.segment_id != group[0].segment_id
        ):
            flush()
        group.append(record)
    flush()
    return lines


def write_observations(path: str | Path, records: Iterable[ObservationRecord]) -> int:
    lines = records_to_lines(records)
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
    return len(lines)
