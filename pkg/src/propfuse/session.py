"""The streaming fusion driver.

A session owns one Dirichlet belief per segment and, per (segment, material,
property) cell, both continuous posteriors (normal-inverse-gamma and
weighted moments) side by side. Records stream in, are validated against the
library, and either update every relevant belief or are counted as rejected;
``absorbed + rejected == seen`` always holds.

Sessions serialize to versioned JSON snapshots that restore every belief
parameter bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import MaterialLibrary, Observation, PropertyPrior, validate_observation
from .dirichlet import DirichletBelief
from .errors import SnapshotError, ValidationError
from .ingest import ObservationRecord
from .mixture import BACKENDS, MixturePredictive, build_mixture, mixture_total_uncertainty
from .moments import WeightedMoments
from .nig import NigBelief, UncertaintyReport

SNAPSHOT_SCHEMA = 1


@dataclass
class FusionConfig:
    """Knobs shared by a whole fusion run.

    ``alpha0`` is either one concentration shared by all classes or a
    per-class vector; ``prior_overrides`` patches library priors per
    (material, property) without editing the library file.
    """

    evidence_strength: float = 1.0
    alpha0: float | Sequence[float] = 1.0
    var_floor: float = 1e-12
    backend: str = "nig"
    prior_overrides: Mapping[str, Mapping[str, PropertyPrior]] | None = None

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValidationError(
                f"unknown posterior backend {self.backend!r}; use one of {BACKENDS}"
            )
        if not self.var_floor > 0:
            raise ValidationError(f"variance floor must be positive, got {self.var_floor}")

    def alpha0_vector(self, k: int) -> np.ndarray:
        if isinstance(self.alpha0, (int, float)):
            return np.full(k, float(self.alpha0))
        vector = np.asarray(self.alpha0, dtype=np.float64)
        if vector.shape != (k,):
            raise ValidationError(
                f"alpha0 vector has length {vector.size}, library has {k} classes"
            )
        return vector

    def to_dict(self) -> dict:
        data = {
            "evidence_strength": self.evidence_strength,
            "alpha0": (
                self.alpha0
                if isinstance(self.alpha0, (int, float))
                else [float(a) for a in self.alpha0]
            ),
            "var_floor": self.var_floor,
            "backend": self.backend,
        }
        if self.prior_overrides:
            data["prior_overrides"] = {
                m: {p: prior.to_dict() for p, prior in table.items()}
                for m, table in self.prior_overrides.items()
            }
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "FusionConfig":
        overrides = None
        if data.get("prior_overrides"):
            overrides = {
                m: {p: PropertyPrior.from_value(raw) for p, raw in table.items()}
                for m, table in data["prior_overrides"].items()
            }
        return cls(
            evidence_strength=float(data.get("evidence_strength", 1.0)),
            alpha0=data.get("alpha0", 1.0),
            var_floor=float(data.get("var_floor", 1e-12)),
            backend=data.get("backend", "nig"),
            prior_overrides=overrides,
        )


@dataclass
class FusionCounters:
    seen: int = 0
    absorbed: int = 0
    rejected: int = 0
    unknown_properties: int = 0
    views: dict[str, int] = dataclass_field(default_factory=dict)
    rejection_reasons: dict[str, int] = dataclass_field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected += 1
        self.rejection_reasons[reason] = self.rejection_reasons.get(reason, 0) + 1

    def to_dict(self) -> dict:
        return {
            "seen": self.seen,
            "absorbed": self.absorbed,
            "rejected": self.rejected,
            "unknown_properties": self.unknown_properties,
            "views": dict(self.views),
            "rejection_reasons": dict(self.rejection_reasons),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FusionCounters":
        return cls(
            seen=int(data.get("seen", 0)),
            absorbed=int(data.get("absorbed", 0)),
            rejected=int(data.get("rejected", 0)),
            unknown_properties=int(data.get("unknown_properties", 0)),
            views={str(k): int(v) for k, v in data.get("views", {}).items()},
            rejection_reasons={
                str(k): int(v) for k, v in data.get("rejection_reasons", {}).items()
            },
        )


@dataclass
class SegmentState:
    """All beliefs for one segment; containers are mutable, beliefs are not."""

    classes: DirichletBelief
    nig: dict[str, list[NigBelief]]
    moments: dict[str, list[WeightedMoments]]
    observations: int = 0


class FusionSession:
    """Routes validated observation records into per-segment beliefs.

    The driver serializes updates per segment; distinct segments are
    independent, so callers may shard a stream by segment and fuse shards in
    parallel sessions, merging via snapshots.
    """

    def __init__(self, library: MaterialLibrary, config: FusionConfig | None = None):
        self.library = library
        self.config = config or FusionConfig()
        self._alpha0 = self.config.alpha0_vector(library.k)
        self._priors = {
            material: {
                prop: self._resolve_prior(material, prop)
                for prop in library.property_names
            }
            for material in library.classes
        }
        self.segments: dict[str, SegmentState] = {}
        self.counters = FusionCounters()

    def _resolve_prior(self, material: str, prop: str) -> PropertyPrior:
        overrides = self.config.prior_overrides or {}
        patched = overrides.get(material, {})
        if prop in patched:
            return patched[prop]
        return self.library.prior(material, prop)

    def prior_table(self, prop: str) -> list[PropertyPrior]:
        return [self._priors[m][prop] for m in self.library.classes]

    def _new_segment(self) -> SegmentState:
        lib = self.library
        return SegmentState(
            classes=DirichletBelief.from_prior(self._alpha0, self.config.evidence_strength),
            nig={
                prop: [NigBelief.from_prior(self._priors[m][prop]) for m in lib.classes]
                for prop in lib.property_names
            },
            moments={
                prop: [WeightedMoments(var_floor=self.config.var_floor) for _ in lib.classes]
                for prop in lib.property_names
            },
        )

    def fuse(self, records: Iterable[ObservationRecord]) -> "FusionSession":
        """Absorb a record stream; invalid records are counted, never raised."""
        lib = self.library
        for record in records:
            self.counters.seen += 1
            try:
                class_index = lib.index_of(record.material)
            except ValidationError:
                self.counters.reject(f"unknown material {record.material!r}")
                continue
            known_props = {}
            for name, value in record.properties.items():
                if lib.has_property(name):
                    known_props[name] = value
                else:
                    self.counters.unknown_properties += 1
            obs = Observation(
                segment_id=record.segment_id,
                view_id=record.view_id,
                class_index=class_index,
                confidence=record.confidence,
                properties=known_props,
                caption=record.caption,
            )
            report = validate_observation(obs, lib)
            if not report.ok:
                self.counters.reject("; ".join(report.violations))
                continue
            state = self.segments.get(record.segment_id)
            if state is None:
                state = self._new_segment()
                self.segments[record.segment_id] = state
            state.classes = state.classes.absorb(class_index, obs.confidence)
            for name, value in known_props.items():
                cells = state.nig[name]
                cells[class_index] = cells[class_index].absorb(value, obs.confidence)
                sums = state.moments[name]
                sums[class_index] = sums[class_index].accumulate(value, obs.confidence)
            state.observations += 1
            self.counters.absorbed += 1
            self.counters.views[record.view_id] = (
                self.counters.views.get(record.view_id, 0) + 1
            )
        return self

    def segment_ids(self) -> list[str]:
        return sorted(self.segments)

    def state_or_prior(self, segment_id: str) -> SegmentState:
        """The segment's state, or a fresh prior-only state for unseen ids."""
        state = self.segments.get(segment_id)
        return state if state is not None else self._new_segment()

    def mixture(
        self, segment_id: str, property_name: str, backend: str | None = None
    ) -> MixturePredictive:
        if not self.library.has_property(property_name):
            raise ValidationError(f"unknown property {property_name!r}")
        backend = backend or self.config.backend
        state = self.state_or_prior(segment_id)
        if backend == "nig":
            per_class: Sequence = state.nig[property_name]
        else:
            per_class = state.moments[property_name]
        return build_mixture(
            state.classes,
            per_class,
            backend=backend,
            priors=self.prior_table(property_name),
            property_name=property_name,
        )

    def uncertainty(self, segment_id: str, property_name: str) -> UncertaintyReport:
        """Mixture-level predictive-variance split (always NIG-based)."""
        if not self.library.has_property(property_name):
            raise ValidationError(f"unknown property {property_name!r}")
        state = self.state_or_prior(segment_id)
        return mixture_total_uncertainty(state.classes, state.nig[property_name])

    def map_class(self, segment_id: str) -> int:
        return self.state_or_prior(segment_id).classes.map_class()

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> bytes:
        payload = {
            "schema": SNAPSHOT_SCHEMA,
            "library": self.library.to_dict(),
            "config": self.config.to_dict(),
            "counters": self.counters.to_dict(),
            "segments": {
                segment_id: {
                    "observations": state.observations,
                    "classes": {
                        "alpha": state.classes.alpha.tolist(),
                        "alpha0": state.classes.alpha0.tolist(),
                        "evidence_strength": state.classes.evidence_strength,
                        "total_weight": state.classes.total_weight,
                    },
                    "properties": {
                        prop: {
                            "nig": [
                                [b.tau, b.kappa, b.alpha, b.beta]
                                for b in state.nig[prop]
                            ],
                            "moments": [
                                [m.weight, m.first, m.second, m.var_floor]
                                for m in state.moments[prop]
                            ],
                        }
                        for prop in self.library.property_names
                    },
                }
                for segment_id, state in self.segments.items()
            },
        }
        return json.dumps(payload, sort_keys=True).encode("utf-8")

    @classmethod
    def restore(cls, data: bytes) -> "FusionSession":
        try:
            payload = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SnapshotError(f"snapshot is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise SnapshotError("snapshot root must be an object")
        if payload.get("schema") != SNAPSHOT_SCHEMA:
            raise SnapshotError(f"unsupported snapshot schema {payload.get('schema')!r}")
        try:
            library = MaterialLibrary.from_dict(payload["library"])
            config = FusionConfig.from_dict(payload["config"])
            session = cls(library, config)
            session.counters = FusionCounters.from_dict(payload.get("counters", {}))
            for segment_id, entry in payload.get("segments", {}).items():
                classes = entry["classes"]
                belief = DirichletBelief.from_prior(
                    classes["alpha0"], classes["evidence_strength"]
                )
                alpha = np.asarray(classes["alpha"], dtype=np.float64)
                if alpha.shape != belief.alpha.shape:
                    raise SnapshotError(
                        f"segment {segment_id!r}: alpha length {alpha.size} does not "
                        f"match library ({library.k} classes)"
                    )
                alpha.flags.writeable = False
                belief = DirichletBelief(
                    alpha, belief.alpha0, belief.evidence_strength,
                    float(classes["total_weight"]),
                )
                state = SegmentState(classes=belief, nig={}, moments={})
                props = entry["properties"]
                for prop in library.property_names:
                    cells = props[prop]
                    nig_rows = cells["nig"]
                    moment_rows = cells["moments"]
                    if len(nig_rows) != library.k or len(moment_rows) != library.k:
                        raise SnapshotError(
                            f"segment {segment_id!r}, property {prop!r}: expected "
                            f"{library.k} per-class entries"
                        )
                    state.nig[prop] = [
                        NigBelief(tau, kappa, alpha_, beta)
                        for tau, kappa, alpha_, beta in nig_rows
                    ]
                    state.moments[prop] = [
                        WeightedMoments(w, s, q, floor)
                        for w, s, q, floor in moment_rows
                    ]
                state.observations = int(entry.get("observations", 0))
                session.segments[segment_id] = state
        except SnapshotError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotError(f"snapshot is structurally invalid: {exc!r}") from exc
        return session
