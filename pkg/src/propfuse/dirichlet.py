"""Per-segment conjugate belief over material classes.

Each absorbed observation adds ``evidence_strength * confidence`` to the
concentration of its class, so the posterior predictive over classes is the
normalized concentration vector. Updates are persistent: every absorb
returns a new belief, which makes per-view snapshots trivial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import Confidence, evidence_weight
from .errors import ValidationError


def _frozen(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DirichletBelief:
    """Concentration vector over K material classes for one segment.

    ``alpha`` only ever grows from ``alpha0`` by nonnegative increments, so
    ``sum(alpha) == sum(alpha0) + total_weight`` up to float associativity.
    """

    alpha: np.ndarray
    alpha0: np.ndarray
    evidence_strength: float
    total_weight: float = 0.0

    @classmethod
    def from_prior(cls, alpha0, evidence_strength: float = 1.0) -> "DirichletBelief":
        prior = np.asarray(alpha0, dtype=np.float64)
        if prior.ndim != 1 or prior.size == 0:
            raise ValidationError("alpha0 must be a non-empty vector")
        for i, value in enumerate(prior):
            if not value > 0:
                raise ValidationError(f"alpha0[{i}] must be positive, got {value}")
        if not evidence_strength > 0:
            raise ValidationError(
                f"evidence strength must be positive, got {evidence_strength}"
            )
        return cls(_frozen(prior), _frozen(prior), float(evidence_strength))

    @classmethod
    def uniform(cls, k: int, evidence_strength: float = 1.0) -> "DirichletBelief":
        return cls.from_prior(np.ones(k), evidence_strength)

    @property
    def k(self) -> int:
        return self.alpha.size

    def absorb(self, class_index: int, confidence: Confidence | float) -> "DirichletBelief":
        """Add ``evidence_strength * confidence`` to one class; returns a new belief."""
        if not 0 <= class_index < self.k:
            raise ValidationError(
                f"class index {class_index} out of range for {self.k} classes"
            )
        gain = self.evidence_strength * evidence_weight(confidence)
        alpha = self.alpha.copy()
        alpha[class_index] += gain
        return DirichletBelief(
            _frozen(alpha), self.alpha0, self.evidence_strength, self.total_weight + gain
        )

    def class_posterior(self) -> np.ndarray:
        """Posterior predictive class probabilities, alpha / sum(alpha)."""
        return np.asarray(self.alpha / self.alpha.sum())

    def log_density(self, theta) -> float:
        """Log density of the belief at a point on the probability simplex."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self.alpha.shape:
            raise ValidationError(
                f"theta has length {theta.size}, expected {self.k}"
            )
        if not np.all(theta > 0):
            raise ValidationError("theta components must be strictly positive")
        if abs(theta.sum() - 1.0) > 1e-9:
            raise ValidationError(f"theta must sum to 1, got {theta.sum()!r}")
        return float(
            gammaln(self.alpha.sum())
            - gammaln(self.alpha).sum()
            + ((self.alpha - 1.0) * np.log(theta)).sum()
        )

    def map_class(self) -> int:
        """Most probable class; ties break to the lowest index."""
        return int(np.argmax(self.alpha))
