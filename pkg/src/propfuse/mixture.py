"""Class-weighted Gaussian mixture over a property.

The mixture combines the class posterior of a segment's Dirichlet belief
with one Gaussian component per material class. Which per-class posterior
supplies the component moments is a configuration choice:

- ``"nig"`` components are ``N(tau, total predictive variance)``, the
  moment-matched form of the conjugate predictive. This is the default
  because only it carries an epistemic term.
- ``"moments"`` components come from the weighted streaming moments; classes
  with zero accumulated weight fall back to their library prior (nominal
  location and prior aleatoric variance) so the mixture stays proper over
  all K classes.

At the mixture level the predictive variance gains a third contribution,
the spread of the component means under the class weights. That
class-ambiguity term is counted as epistemic (more class evidence resolves
it) and also reported separately so callers can rebin it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .core import PropertyPrior
from .dirichlet import DirichletBelief
from .errors import NoEvidenceError, NumericDomainError, ValidationError
from .moments import GaussianPosterior, WeightedMoments
from .nig import NigBelief, UncertaintyReport

QUANTILE_TOLERANCE = 1e-9  # in probability

BACKENDS = ("nig", "moments")


@dataclass(frozen=True)
class MixturePredictive:
    """K Gaussian components with class-posterior weights, in library order."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    property_name: str | None = None

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        variances = np.asarray(self.variances, dtype=np.float64)
        if not weights.shape == means.shape == variances.shape or weights.ndim != 1:
            raise ValidationError("weights, means and variances must be equal-length vectors")
        if abs(weights.sum() - 1.0) > 1e-9 or np.any(weights < 0):
            raise ValidationError("mixture weights must be a probability vector")
        if not np.all(variances > 0):
            raise ValidationError("every component variance must be positive")
        for name, arr in (("weights", weights), ("means", means), ("variances", variances)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.weights.size

    def density(self, value):
        """Mixture pdf at ``value`` (scalar or array)."""
        x = np.asarray(value, dtype=np.float64)
        z = (x[..., None] - self.means) ** 2 / self.variances
        comp = np.exp(-0.5 * z) / np.sqrt(2.0 * np.pi * self.variances)
        out = (self.weights * comp).sum(axis=-1)
        return float(out) if np.isscalar(value) or x.ndim == 0 else out

    def cdf(self, value):
        x = np.asarray(value, dtype=np.float64)
        z = (x[..., None] - self.means) / np.sqrt(self.variances)
        out = (self.weights * ndtr(z)).sum(axis=-1)
        return float(out) if np.isscalar(value) or x.ndim == 0 else out

    def quantile(self, q: float) -> float:
        """Invert the mixture CDF by bisection to 1e-9 in probability."""
        if not 0.0 < q < 1.0:
            raise NumericDomainError(f"quantile level must lie in (0, 1), got {q}")
        sd = np.sqrt(self.variances)
        lo = float(np.min(self.means - 12.0 * sd))
        hi = float(np.max(self.means + 12.0 * sd))
        span = hi - lo
        while self.cdf(lo) > q:
            lo -= span
        while self.cdf(hi) < q:
            hi += span
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            c = self.cdf(mid)
            if abs(c - q) <= QUANTILE_TOLERANCE:
                return mid
            if c < q:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def interval(self, level: float) -> tuple[float, float]:
        """Central credible interval of the given probability level."""
        if not 0.0 < level < 1.0:
            raise NumericDomainError(f"interval level must lie in (0, 1), got {level}")
        tail = 0.5 * (1.0 - level)
        return self.quantile(tail), self.quantile(1.0 - tail)

    def mean_variance(self) -> tuple[float, float]:
        """Law-of-total-expectation/variance moments of the mixture."""
        mean = float(np.dot(self.weights, self.means))
        variance = float(
            np.dot(self.weights, self.variances + self.means**2) - mean * mean
        )
        return mean, variance

    def mmse(self) -> float:
        """Mixture mean: the MMSE point estimate under squared loss."""
        return self.mean_variance()[0]


def _component_from(entry, prior: PropertyPrior | None, class_index: int, backend: str):
    if backend == "nig":
        if isinstance(entry, NigBelief):
            return entry.tau, entry.predictive_variance()
        if isinstance(entry, GaussianPosterior):
            return entry.mean, entry.variance
        raise ValidationError(
            f"class {class_index}: nig backend expects NigBelief, got {type(entry).__name__}"
        )
    if backend == "moments":
        if isinstance(entry, GaussianPosterior):
            return entry.mean, entry.variance
        if isinstance(entry, WeightedMoments):
            try:
                return entry.mean_variance()
            except NoEvidenceError:
                if prior is None:
                    raise NoEvidenceError(
                        f"class {class_index} has no evidence and no prior fallback"
                    ) from None
                return prior.tau, prior.aleatoric
        raise ValidationError(
            f"class {class_index}: moments backend expects WeightedMoments, "
            f"got {type(entry).__name__}"
        )
    raise ValidationError(f"unknown posterior backend {backend!r}; use one of {BACKENDS}")


def build_mixture(
    belief: DirichletBelief,
    per_class: Sequence,
    backend: str = "nig",
    priors: Sequence[PropertyPrior] | None = None,
    property_name: str | None = None,
) -> MixturePredictive:
    """Assemble the predictive mixture from class weights and per-class posteriors.

    ``per_class`` holds one posterior per material class in library order;
    ``priors`` supplies the fallback for no-evidence classes under the
    moments backend.
    """
    if len(per_class) != belief.k:
        raise ValidationError(
            f"expected {belief.k} per-class posteriors, got {len(per_class)}"
        )
    if priors is not None and len(priors) != belief.k:
        raise ValidationError(f"expected {belief.k} fallback priors, got {len(priors)}")
    means = np.empty(belief.k)
    variances = np.empty(belief.k)
    for i, entry in enumerate(per_class):
        prior = priors[i] if priors is not None else None
        means[i], variances[i] = _component_from(entry, prior, i, backend)
    return MixturePredictive(belief.class_posterior(), means, variances, property_name)


def mixture_total_uncertainty(
    belief: DirichletBelief, per_class: Sequence[NigBelief]
) -> UncertaintyReport:
    """Predictive-variance split marginalized over class identity.

    Aleatoric is the weight-averaged within-class noise; epistemic is the
    weight-averaged mean uncertainty plus the between-class spread of the
    component means, since both shrink with more evidence.
    """
    if len(per_class) != belief.k:
        raise ValidationError(
            f"expected {belief.k} per-class beliefs, got {len(per_class)}"
        )
    weights = belief.class_posterior()
    aleatoric = 0.0
    within = 0.0
    mean = 0.0
    mean_sq = 0.0
    for w, b in zip(weights, per_class):
        report = b.predictive_uncertainty()
        aleatoric += w * report.aleatoric
        within += w * report.epistemic
        mean += w * b.tau
        mean_sq += w * b.tau * b.tau
    between = max(mean_sq - mean * mean, 0.0)
    epistemic = within + between
    return UncertaintyReport(aleatoric, epistemic, aleatoric + epistemic, between)
