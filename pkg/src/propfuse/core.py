"""Shared vocabulary: property kinds, material libraries, confidences,
observations.

Everything here is an immutable value. A material library fixes the order of
its classes at load time; that order indexes every per-class vector in the
fusion machinery, so two loads of the same file always agree on indices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import ValidationError

LIBRARY_SCHEMA = 1

# Properties that are physically nonnegative; a library must not give them a
# support that dips below zero.
NONNEGATIVE_PROPERTIES = frozenset({"friction", "density", "hardness"})

#: Color reserved for points whose segment carries no material belief.
UNLABELED_COLOR: tuple[int, int, int] = (255, 0, 255)

# Deterministic fallback colors for libraries that do not assign their own.
_PALETTE: tuple[tuple[int, int, int], ...] = (
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207),
)


@dataclass(frozen=True, slots=True)
class PropertyKind:
    """A continuous physical property and the interval of admissible values.

    The support is a closed interval; an infinite upper bound makes it
    half-open. Values exactly on a boundary are admissible (friction 0 and
    Shore hardness 100 are physically meaningful).
    """

    name: str
    units: str
    support: tuple[float, float]

    def __post_init__(self) -> None:
        lo, hi = float(self.support[0]), float(self.support[1])
        if not lo < hi:
            raise ValidationError(
                f"property {self.name!r}: support lower bound {lo} must be "
                f"below upper bound {hi}"
            )
        if self.name in NONNEGATIVE_PROPERTIES and lo < 0:
            raise ValidationError(
                f"property {self.name!r} cannot admit negative values "
                f"(support starts at {lo})"
            )
        object.__setattr__(self, "support", (lo, hi))

    def contains(self, value: float) -> bool:
        lo, hi = self.support
        return lo <= value <= hi


@dataclass(frozen=True, slots=True)
class Confidence:
    """Normalized score in [0, 1]; zero is legal and contributes no evidence."""

    value: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if math.isnan(v) or not 0.0 <= v <= 1.0:
            raise ValidationError(f"confidence must lie in [0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self) -> float:
        return self.value


def evidence_weight(confidence: Confidence | float) -> float:
    """Validate a confidence and return it as a plain float weight."""
    if isinstance(confidence, Confidence):
        return confidence.value
    return Confidence(float(confidence)).value


@dataclass(frozen=True, slots=True)
class PropertyPrior:
    """Hyperparameters seeding one (material, property) belief.

    ``tau`` is the nominal value, ``kappa`` the confidence mass already
    placed on it, ``alpha``/``beta`` the shape/scale of the inverse-gamma
    marginal over the variance. When ``beta`` is omitted it is derived so the
    prior aleatoric standard deviation is 10% of the nominal magnitude,
    keeping the prior weak but proper.
    """

    tau: float
    kappa: float = 1e-3
    alpha: float = 2.0
    beta: float | None = None

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ValidationError(f"prior kappa must be positive, got {self.kappa}")
        if not self.alpha > 1:
            raise ValidationError(f"prior alpha must exceed 1, got {self.alpha}")
        if self.beta is None:
            sd = 0.1 * abs(self.tau) + 1e-6
            object.__setattr__(self, "beta", sd * sd * (self.alpha - 1.0))
        if not self.beta > 0:
            raise ValidationError(f"prior beta must be positive, got {self.beta}")

    @property
    def aleatoric(self) -> float:
        """Prior expected within-class variance, beta / (alpha - 1)."""
        return self.beta / (self.alpha - 1.0)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "kappa": self.kappa, "alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_value(cls, value) -> "PropertyPrior":
        """Accept the library shorthand: a bare nominal number, a
        ``{"nominal": x, ...}`` dict, or the full parameter dict."""
        if isinstance(value, (int, float)):
            return cls(tau=float(value))
        if not isinstance(value, dict):
            raise ValidationError(f"prior must be a number or an object, got {value!r}")
        data = dict(value)
        if "nominal" in data:
            data["tau"] = data.pop("nominal")
        if "tau" not in data:
            raise ValidationError(f"prior is missing 'tau' (or 'nominal'): {value!r}")
        allowed = {"tau", "kappa", "alpha", "beta"}
        unknown = set(data) - allowed
        if unknown:
            raise ValidationError(f"unknown prior fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items() if v is not None})


@dataclass(frozen=True)
class MaterialLibrary:
    """K ordered material classes with per-property priors and display colors.

    Index ``i`` in every per-class vector elsewhere in the package refers to
    ``classes[i]``; the order never changes for a loaded library. Every
    (material, property) pair must carry a prior so queries on segments with
    no evidence stay well defined.
    """

    classes: tuple[str, ...]
    properties: tuple[PropertyKind, ...]
    priors: Mapping[str, Mapping[str, PropertyPrior]]
    colors: Mapping[str, tuple[int, int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        classes = tuple(self.classes)
        if not classes:
            raise ValidationError("a material library needs at least one class")
        if len(set(classes)) != len(classes):
            raise ValidationError("material class names must be unique")
        props = tuple(self.properties)
        names = [p.name for p in props]
        if len(set(names)) != len(names):
            raise ValidationError("property names must be unique within a library")
        priors = {m: dict(table) for m, table in self.priors.items()}
        for material in classes:
            table = priors.get(material)
            if table is None:
                raise ValidationError(f"material {material!r} has no priors")
            for prop in names:
                if prop not in table:
                    raise ValidationError(
                        f"material {material!r} is missing a prior for {prop!r}"
                    )
        colors = dict(self.colors)
        for i, material in enumerate(classes):
            if material in colors:
                r, g, b = colors[material]
                colors[material] = (int(r), int(g), int(b))
            else:
                colors[material] = _PALETTE[i % len(_PALETTE)]
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "properties", props)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "colors", colors)

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def property_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.properties)

    def index_of(self, material: str) -> int:
        try:
            return self.classes.index(material)
        except ValueError:
            raise ValidationError(f"unknown material {material!r}") from None

    def property_kind(self, name: str) -> PropertyKind:
        for kind in self.properties:
            if kind.name == name:
                return kind
        raise ValidationError(f"unknown property {name!r}")

    def has_property(self, name: str) -> bool:
        return any(kind.name == name for kind in self.properties)

    def prior(self, material: str, property_name: str) -> PropertyPrior:
        if material not in self.priors:
            raise ValidationError(f"unknown material {material!r}")
        table = self.priors[material]
        if property_name not in table:
            raise ValidationError(f"unknown property {property_name!r}")
        return table[property_name]

    def color(self, material: str) -> tuple[int, int, int]:
        if material not in self.colors:
            raise ValidationError(f"unknown material {material!r}")
        return self.colors[material]

    def to_dict(self) -> dict:
        return {
            "schema": LIBRARY_SCHEMA,
            "properties": [
                {
                    "name": p.name,
                    "units": p.units,
                    "support": [p.support[0], None if math.isinf(p.support[1]) else p.support[1]],
                }
                for p in self.properties
            ],
            "classes": list(self.classes),
            "priors": {
                m: {prop: prior.to_dict() for prop, prior in self.priors[m].items()}
                for m in self.classes
            },
            "colors": {m: list(self.colors[m]) for m in self.classes},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialLibrary":
        if not isinstance(data, dict):
            raise ValidationError("library file must contain a JSON object")
        schema = data.get("schema", LIBRARY_SCHEMA)
        if schema != LIBRARY_SCHEMA:
            raise ValidationError(f"unsupported library schema {schema!r}")
        props = []
        for entry in data.get("properties", []):
            lo, hi = entry.get("support", (None, None))
            lo = -math.inf if lo is None else float(lo)
            hi = math.inf if hi is None else float(hi)
            props.append(PropertyKind(entry["name"], entry.get("units", ""), (lo, hi)))
        classes = data.get("classes", [])
        priors = {
            material: {
                prop: PropertyPrior.from_value(raw)
                for prop, raw in (table or {}).items()
            }
            for material, table in data.get("priors", {}).items()
        }
        colors = {m: tuple(rgb) for m, rgb in data.get("colors", {}).items()}
        return cls(tuple(classes), tuple(props), priors, colors)

    @classmethod
    def load(cls, path: str | Path) -> "MaterialLibrary":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"library file {path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class Observation:
    """One confidence-weighted material/property claim for one segment view.

    ``properties`` maps property names to reported values. Invalid field
    values are representable here on purpose: ``validate_observation``
    reports violations instead of construction throwing, so ingest can keep
    well-formed siblings from the same response line.
    """

    segment_id: str
    view_id: str
    class_index: int
    confidence: float
    properties: Mapping[str, float] = field(default_factory=dict)
    caption: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_observation(obs: Observation, lib: MaterialLibrary) -> ValidationReport:
    """List every invariant the observation violates; empty means valid.

    Never raises: callers that stream thousands of records need the full
    tally, not the first failure.
    """
    violations: list[str] = []
    conf = obs.confidence
    if not (isinstance(conf, (int, float)) and math.isfinite(conf) and 0.0 <= conf <= 1.0):
        violations.append(f"confidence {conf!r} outside [0, 1]")
    if not 0 <= obs.class_index < lib.k:
        violations.append(
            f"unknown class index {obs.class_index} (library has {lib.k} classes)"
        )
    for name, value in obs.properties.items():
        if not lib.has_property(name):
            violations.append(f"unknown property {name!r}")
            continue
        kind = lib.property_kind(name)
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            violations.append(f"property {name!r} value {value!r} is not a finite number")
        elif not kind.contains(float(value)):
            lo, hi = kind.support
            violations.append(
                f"property {name!r} value {value} outside support [{lo}, {hi}]"
            )
    return ValidationReport(tuple(violations))
