import math

import numpy as np
import pytest

from propfuse import NigBelief, PropertyPrior, ValidationError


def batch_update(tau0, kappa0, alpha0, beta0, pairs):
    """Independent sufficient-statistics oracle for a whole stream."""
    pairs = [(float(v), float(p)) for v, p in pairs]
    sum_p = sum(p for _, p in pairs)
    sum_pv = sum(p * v for v, p in pairs)
    sum_pv2 = sum(p * v * v for v, p in pairs)
    kappa = kappa0 + sum_p
    tau = (kappa0 * tau0 + sum_pv) / kappa
    alpha = alpha0 + sum_p / 2.0
    beta = beta0 + 0.5 * sum_pv2 + 0.5 * kappa0 * tau0**2 - 0.5 * kappa * tau**2
    return tau, kappa, alpha, beta


class TestConstruction:
    def test_valid(self):
        NigBelief(0.0, 1.0, 2.0, 1.0)

    def test_alpha_at_pole_rejected(self):
        with pytest.raises(ValidationError, match="alpha"):
            NigBelief(0.0, 1.0, 1.0, 1.0)

    def test_weak_prior(self):
        belief = NigBelief(5.0, 1e-3, 2.0, 0.5)
        assert belief.mmse() == 5.0

    def test_from_prior(self):
        prior = PropertyPrior(700.0, kappa=0.5, alpha=3.0, beta=2.0)
        belief = NigBelief.from_prior(prior)
        assert (belief.tau, belief.kappa, belief.alpha, belief.beta) == (700.0, 0.5, 3.0, 2.0)


class TestAbsorb:
    def test_direct_substitution(self):
        after = NigBelief(0.0, 1.0, 1.25, 1.0).absorb(2.0, 1.0)
        assert (after.tau, after.kappa, after.alpha, after.beta) == (1.0, 2.0, 1.75, 2.0)

    def test_zero_weight_noop(self):
        belief = NigBelief(3.0, 2.0, 2.0, 1.0)
        assert belief.absorb(99.0, 0.0) is belief

    def test_value_at_location_adds_no_scale_mass(self):
        after = NigBelief(3.0, 2.0, 2.0, 1.0).absorb(3.0, 0.5)
        assert (after.tau, after.kappa, after.alpha, after.beta) == (3.0, 2.5, 2.25, 1.0)

    def test_nonfinite_value_rejected(self):
        with pytest.raises(ValidationError):
            NigBelief(0.0, 1.0, 2.0, 1.0).absorb(math.nan, 1.0)

    def test_weak_prior_follows_data(self):
        after = NigBelief(0.0, 1e-9, 2.0, 1.0).absorb(4.0, 1.0)
        assert after.tau == pytest.approx(4.0, abs=1e-7)

    def test_unit_kappa_pulls_halfway(self):
        after = NigBelief(0.0, 1.0, 2.0, 1.0).absorb(4.0, 1.0)
        assert after.mmse() == 2.0


class TestBatch:
    def test_singleton_equals_single_absorb(self):
        prior = NigBelief(0.7, 1.2, 2.5, 0.9)
        assert prior.absorb_all([(2.0, 1.0)]) == prior.absorb(2.0, 1.0)

    def test_two_orders_agree(self):
        prior = NigBelief(0.0, 1.0, 2.0, 1.0)
        a = prior.absorb_all([(1.0, 1.0), (3.0, 1.0)])
        b = prior.absorb_all([(3.0, 1.0), (1.0, 1.0)])
        assert a.tau == pytest.approx(b.tau, rel=1e-12)
        assert a.kappa == b.kappa
        assert a.alpha == b.alpha
        assert a.beta == pytest.approx(b.beta, rel=1e-12)

    def test_sequential_matches_sufficient_statistics(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            pairs = list(zip(rng.normal(10, 3, 200), rng.uniform(0, 1, 200)))
            prior = (1.5, 0.8, 2.0, 1.2)
            sequential = NigBelief(*prior).absorb_all(pairs)
            tau, kappa, alpha, beta = batch_update(*prior, pairs)
            assert sequential.tau == pytest.approx(tau, rel=1e-9)
            assert sequential.kappa == pytest.approx(kappa, rel=1e-12)
            assert sequential.alpha == pytest.approx(alpha, rel=1e-12)
            assert sequential.beta == pytest.approx(beta, rel=1e-9)

    def test_exchangeability_under_permutation(self):
        rng = np.random.default_rng(32)
        pairs = list(zip(rng.normal(0, 2, 80), rng.uniform(0, 1, 80)))
        reference = NigBelief(0.0, 1.0, 2.0, 1.0).absorb_all(pairs)
        for _ in range(5):
            order = rng.permutation(len(pairs))
            other = NigBelief(0.0, 1.0, 2.0, 1.0).absorb_all([pairs[i] for i in order])
            for name in ("tau", "kappa", "alpha", "beta"):
                assert getattr(other, name) == pytest.approx(
                    getattr(reference, name), rel=1e-9
                )


class TestPredictiveUncertainty:
    def test_hand_arithmetic(self):
        report = NigBelief(1.0, 2.0, 1.5, 2.0).predictive_uncertainty()
        assert report.aleatoric == 4.0
        assert report.epistemic == 2.0
        assert report.total == 6.0

    def test_large_kappa_kills_epistemic(self):
        report = NigBelief(0.0, 1e6, 3.0, 2.0).predictive_uncertainty()
        assert report.aleatoric == 1.0
        assert report.epistemic == pytest.approx(1e-6, rel=1e-12)

    def test_epistemic_equals_aleatoric_over_kappa_exactly(self):
        belief = NigBelief(0.0, 2.0, 2.0, 1.0)
        for n in range(1, 101):
            belief = belief.absorb(float(n % 7), 1.0)
            report = belief.predictive_uncertainty()
            assert report.epistemic == report.aleatoric / (2.0 + n)

    def test_total_identity(self):
        rng = np.random.default_rng(33)
        belief = NigBelief(0.0, 1.0, 2.0, 1.0).absorb_all(
            zip(rng.normal(5.0, 2.0, 50), rng.uniform(0, 1, 50))
        )
        report = belief.predictive_uncertainty()
        assert report.total == report.aleatoric + report.epistemic
        assert report.total == pytest.approx(report.aleatoric * (1 + 1 / belief.kappa), rel=1e-12)

    def test_monotone_evidence(self):
        belief = NigBelief(0.0, 1.0, 2.0, 1.0)
        for value in (1.0, 2.0, 0.5, 3.0):
            after = belief.absorb(value, 0.7)
            assert after.kappa > belief.kappa
            assert after.alpha > belief.alpha
            belief = after


class TestConsistency:
    @pytest.mark.parametrize("seed", [101, 202, 303])
    def test_recovers_true_parameters(self, seed):
        rng = np.random.default_rng(seed)
        mu_star, sd_star = 4.2, 1.3
        n = 10_000
        values = rng.normal(mu_star, sd_star, size=n)
        belief = NigBelief(0.0, 1e-3, 2.0, 1e-4).absorb_all((v, 1.0) for v in values)
        assert abs(belief.tau - mu_star) < 5 * sd_star / math.sqrt(n)
        aleatoric = belief.predictive_uncertainty().aleatoric
        assert aleatoric == pytest.approx(sd_star**2, rel=0.1)

    def test_mmse_is_tau(self):
        assert NigBelief(2.5, 1.0, 2.0, 1.0).mmse() == 2.5
