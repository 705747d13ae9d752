"""Confidence-weighted streaming moments and the Gaussian posterior they imply.

The accumulators are the raw weighted sums (total weight, first moment,
second moment), which makes merging shards a componentwise addition. The
variance is the population form ``second/weight - mean^2`` floored at
``var_floor``; raw sums can cancel catastrophically for values whose spread
is tiny relative to their magnitude at extreme scales, which is acceptable at
the desk scales this package targets (see tests against a two-pass oracle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Confidence
from .errors import NoEvidenceError, ValidationError

DEFAULT_VAR_FLOOR = 1e-12


@dataclass(frozen=True, slots=True)
class GaussianPosterior:
    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not self.variance > 0:
            raise ValidationError(f"variance must be positive, got {self.variance}")


@dataclass(frozen=True, slots=True)
class WeightedMoments:
    weight: float = 0.0
    first: float = 0.0
    second: float = 0.0
    var_floor: float = DEFAULT_VAR_FLOOR

    def accumulate(self, value: float, weight: Confidence | float) -> "WeightedMoments":
        """Fold one weighted value into the sums; zero weight is a no-op.

        Weights are confidences in this package's pipelines, but the
        accumulator itself is total for any finite nonnegative weight.
        """
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            raise ValidationError(f"property value must be finite, got {value!r}")
        p = float(weight)
        if math.isnan(p) or math.isinf(p) or p < 0:
            raise ValidationError(f"weight must be finite and nonnegative, got {weight!r}")
        return WeightedMoments(
            self.weight + p,
            self.first + p * value,
            self.second + p * value * value,
            self.var_floor,
        )

    def accumulate_all(self, pairs) -> "WeightedMoments":
        out = self
        for value, weight in pairs:
            out = out.accumulate(value, weight)
        return out

    def merge(self, other: "WeightedMoments") -> "WeightedMoments":
        if self.var_floor != other.var_floor:
            raise ValidationError(
                f"cannot merge moments with different variance floors "
                f"({self.var_floor} vs {other.var_floor})"
            )
        return WeightedMoments(
            self.weight + other.weight,
            self.first + other.first,
            self.second + other.second,
            self.var_floor,
        )

    def mean_variance(self) -> tuple[float, float]:
        """Weighted mean and floored population variance."""
        if not self.weight > 0:
            raise NoEvidenceError("no evidence accumulated; fall back to the prior")
        mean = self.first / self.weight
        variance = max(self.second / self.weight - mean * mean, self.var_floor)
        return mean, variance

    def gaussian(self) -> GaussianPosterior:
        mean, variance = self.mean_variance()
        return GaussianPosterior(mean, variance)
