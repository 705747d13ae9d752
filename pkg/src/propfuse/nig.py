"""Normal-inverse-gamma belief over a property's unknown mean and variance.

One belief tracks a single (material, property) cell. ``tau`` locates the
mean, ``kappa`` is the confidence mass behind it, and ``alpha``/``beta``
shape the inverse-gamma marginal over the variance. Absorbing a value with
confidence ``p`` performs the conjugate update at fractional weight ``p``:

    kappa' = kappa + p
    tau'   = (kappa * tau + p * value) / kappa'
    alpha' = alpha + p / 2
    beta'  = beta + p * kappa * (value - tau)^2 / (2 * kappa')

The predictive variance splits into an aleatoric part, E[sigma^2] =
beta / (alpha - 1), and an epistemic part, Var[mu] = E[sigma^2] / kappa,
which shrinks as confidence mass accumulates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .core import Confidence, PropertyPrior, evidence_weight
from .errors import UndefinedMomentsError, ValidationError


@dataclass(frozen=True, slots=True)
class UncertaintyReport:
    """Predictive variance split; ``total == aleatoric + epistemic`` exactly.

    ``between_class`` is only nonzero for mixture-level reports, where it
    carries the class-ambiguity spread counted inside ``epistemic`` (exposed
    separately so callers can rebin it).
    """

    aleatoric: float
    epistemic: float
    total: float
    between_class: float = 0.0

    def to_dict(self) -> dict:
        return {
            "aleatoric": self.aleatoric,
            "epistemic": self.epistemic,
            "total": self.total,
            "between_class": self.between_class,
        }


@dataclass(frozen=True, slots=True)
class NigBelief:
    tau: float
    kappa: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise ValidationError(f"kappa must be positive, got {self.kappa}")
        if not self.alpha > 1:
            # Enforced at construction so moment queries never hit the
            # alpha <= 1 pole; absorbing only ever increases alpha.
            raise ValidationError(f"alpha must exceed 1, got {self.alpha}")
        if not self.beta > 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")

    @classmethod
    def from_prior(cls, prior: PropertyPrior) -> "NigBelief":
        return cls(prior.tau, prior.kappa, prior.alpha, prior.beta)

    def absorb(self, value: float, confidence: Confidence | float) -> "NigBelief":
        """Conjugate update at weight ``confidence``; weight zero is a no-op."""
        if not (isinstance(value, (int, float)) and math.isfinite(value)):
            raise ValidationError(f"property value must be finite, got {value!r}")
        p = evidence_weight(confidence)
        if p == 0.0:
            return self
        kappa = self.kappa + p
        tau = (self.kappa * self.tau + p * value) / kappa
        alpha = self.alpha + p / 2.0
        delta = value - self.tau
        beta = self.beta + p * self.kappa * delta * delta / (2.0 * kappa)
        return NigBelief(tau, kappa, alpha, beta)

    def absorb_all(self, observations: Iterable[tuple[float, float]]) -> "NigBelief":
        """Sequential left-to-right absorb of (value, confidence) pairs."""
        belief = self
        for value, confidence in observations:
            belief = belief.absorb(value, confidence)
        return belief

    def predictive_uncertainty(self) -> UncertaintyReport:
        if not self.alpha > 1:
            raise UndefinedMomentsError(
                f"predictive moments need alpha > 1, got {self.alpha}"
            )
        aleatoric = self.beta / (self.alpha - 1.0)
        epistemic = aleatoric / self.kappa
        return UncertaintyReport(aleatoric, epistemic, aleatoric + epistemic)

    def predictive_variance(self) -> float:
        """Total predictive variance: aleatoric plus epistemic."""
        return self.predictive_uncertainty().total

    def mmse(self) -> float:
        """Posterior mean location: the estimate minimizing expected squared error."""
        return self.tau
