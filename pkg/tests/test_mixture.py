import math

import numpy as np
import pytest

from propfuse import (
    DirichletBelief,
    GaussianPosterior,
    MixturePredictive,
    NigBelief,
    NoEvidenceError,
    PropertyPrior,
    ValidationError,
    WeightedMoments,
    build_mixture,
    mixture_total_uncertainty,
)


def make_mixture(weights, means, variances):
    return MixturePredictive(np.asarray(weights), np.asarray(means), np.asarray(variances))


def random_mixture(rng, max_k=8):
    k = int(rng.integers(1, max_k + 1))
    weights = rng.dirichlet(np.ones(k))
    means = rng.uniform(-10, 10, size=k)
    variances = rng.uniform(0.1**2, 3.0**2, size=k)
    return make_mixture(weights, means, variances)


def quadrature_integral(mix, nodes=10_000):
    """Simpson integral of the density over a +/-10 sigma envelope."""
    sd = np.sqrt(mix.variances)
    lo = float(np.min(mix.means - 10 * sd))
    hi = float(np.max(mix.means + 10 * sd))
    xs = np.linspace(lo, hi, nodes + 1)
    from scipy.integrate import simpson

    return float(simpson(mix.density(xs), x=xs))


class TestBuildMixture:
    def test_single_class_is_the_component(self):
        belief = DirichletBelief.from_prior((3.0,))
        mix = build_mixture(belief, [NigBelief(2.0, 4.0, 3.0, 4.0)])
        assert mix.weights.tolist() == [1.0]
        assert mix.means.tolist() == [2.0]
        # component variance is the total predictive variance
        assert mix.variances.tolist() == [(4.0 / 2.0) * (1 + 1 / 4.0)]

    def test_weights_follow_class_posterior(self):
        belief = DirichletBelief.from_prior((2.0, 1.0))
        mix = build_mixture(
            belief,
            [GaussianPosterior(1.0, 1.0), GaussianPosterior(3.0, 1.0)],
            backend="moments",
        )
        np.testing.assert_allclose(mix.weights, [2 / 3, 1 / 3], atol=1e-15)

    def test_identical_components_collapse(self):
        belief = DirichletBelief.from_prior((1.0, 1.0, 1.0))
        mix = build_mixture(
            belief, [GaussianPosterior(4.0, 2.0)] * 3, backend="moments"
        )
        mean, var = mix.mean_variance()
        assert mean == pytest.approx(4.0, rel=1e-12)
        assert var == pytest.approx(2.0, rel=1e-12)

    def test_moments_backend_falls_back_to_prior(self):
        belief = DirichletBelief.from_prior((1.0, 1.0))
        evidence = WeightedMoments().accumulate(2.0, 1.0).accumulate(4.0, 1.0)
        priors = [PropertyPrior(0.0, beta=2.0), PropertyPrior(9.0, beta=4.0)]
        mix = build_mixture(belief, [evidence, WeightedMoments()], "moments", priors)
        assert mix.means.tolist() == [3.0, 9.0]
        assert mix.variances[1] == priors[1].aleatoric

    def test_no_fallback_raises_naming_class(self):
        belief = DirichletBelief.from_prior((1.0, 1.0))
        with pytest.raises(NoEvidenceError, match="class 1"):
            build_mixture(
                belief,
                [WeightedMoments().accumulate(1.0, 1.0), WeightedMoments()],
                "moments",
            )

    def test_wrong_length_rejected(self):
        belief = DirichletBelief.from_prior((1.0, 1.0))
        with pytest.raises(ValidationError, match="per-class"):
            build_mixture(belief, [NigBelief(0.0, 1.0, 2.0, 1.0)])

    def test_unknown_backend_rejected(self):
        belief = DirichletBelief.from_prior((1.0,))
        with pytest.raises(ValidationError, match="backend"):
            build_mixture(belief, [NigBelief(0.0, 1.0, 2.0, 1.0)], backend="exact")


class TestDensity:
    def test_standard_normal_peak(self):
        mix = make_mixture([1.0], [0.0], [1.0])
        assert mix.density(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-12)

    def test_identical_components_equal_single(self):
        double = make_mixture([0.5, 0.5], [0.0, 0.0], [1.0, 1.0])
        single = make_mixture([1.0], [0.0], [1.0])
        for x in (-2.0, 0.0, 0.7, 3.5):
            assert double.density(x) == pytest.approx(single.density(x), rel=1e-12)

    def test_nonnegative_everywhere(self):
        rng = np.random.default_rng(41)
        mix = random_mixture(rng)
        xs = rng.uniform(-50, 50, size=500)
        assert np.all(mix.density(xs) >= 0)

    def test_integrates_to_one(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            assert quadrature_integral(random_mixture(rng)) == pytest.approx(1.0, abs=1e-6)


class TestMeanVariance:
    def test_hand_example(self):
        mix = make_mixture([0.5, 0.5], [1.0, 3.0], [1.0, 1.0])
        mean, var = mix.mean_variance()
        assert mean == pytest.approx(2.0, rel=1e-14)
        assert var == pytest.approx(2.0, rel=1e-14)

    def test_single_component(self):
        mean, var = make_mixture([1.0], [5.0], [2.0]).mean_variance()
        assert (mean, var) == (5.0, 2.0)

    def test_zero_weight_component_ignored(self):
        mean, var = make_mixture([1.0, 0.0], [5.0, -100.0], [2.0, 50.0]).mean_variance()
        assert mean == pytest.approx(5.0, rel=1e-12)
        assert var == pytest.approx(2.0, rel=1e-12)

    def test_variance_at_least_within_component_part(self):
        rng = np.random.default_rng(43)
        for _ in range(50):
            mix = random_mixture(rng)
            _, var = mix.mean_variance()
            floor = float(np.dot(mix.weights, mix.variances))
            assert var >= floor - 1e-12 * max(1.0, floor)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(44)
        mix = random_mixture(rng)
        draws = rng.choice(mix.k, size=1_000_000, p=mix.weights)
        samples = rng.normal(mix.means[draws], np.sqrt(mix.variances[draws]))
        mean, var = mix.mean_variance()
        se_mean = samples.std() / math.sqrt(samples.size)
        assert mean == pytest.approx(samples.mean(), abs=3 * se_mean)
        m4 = np.mean((samples - samples.mean()) ** 4)
        se_var = math.sqrt((m4 - samples.var() ** 2) / samples.size)
        assert var == pytest.approx(samples.var(), abs=3 * se_var)


class TestMmse:
    def test_weighted_mean(self):
        assert make_mixture([2 / 3, 1 / 3], [1.0, 4.0], [1.0, 1.0]).mmse() == pytest.approx(2.0, rel=1e-12)

    def test_symmetric_mixture(self):
        assert make_mixture([0.5, 0.5], [-3.0, 3.0], [1.0, 2.0]).mmse() == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_weight(self):
        assert make_mixture([0.0, 1.0], [1.0, 4.0], [1.0, 1.0]).mmse() == 4.0


class TestQuantiles:
    def test_cdf_quantile_roundtrip(self):
        rng = np.random.default_rng(45)
        for _ in range(10):
            mix = random_mixture(rng)
            for q in (0.05, 0.25, 0.5, 0.9, 0.99):
                assert mix.cdf(mix.quantile(q)) == pytest.approx(q, abs=2e-9)

    def test_interval_is_central(self):
        mix = make_mixture([1.0], [0.0], [1.0])
        lo, hi = mix.interval(0.9)
        assert lo == pytest.approx(-1.6448536, abs=1e-5)
        assert hi == pytest.approx(1.6448536, abs=1e-5)

    def test_bad_levels_rejected(self):
        mix = make_mixture([1.0], [0.0], [1.0])
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(Exception):
                mix.quantile(bad)


class TestTotalUncertainty:
    def test_single_class_equals_per_class_report(self):
        belief = DirichletBelief.from_prior((2.0,))
        cell = NigBelief(1.0, 2.0, 1.5, 2.0)
        report = mixture_total_uncertainty(belief, [cell])
        per_class = cell.predictive_uncertainty()
        assert report.aleatoric == per_class.aleatoric
        assert report.epistemic == per_class.epistemic
        assert report.total == per_class.total
        assert report.between_class == 0.0

    def test_identical_states_have_no_between_class_term(self):
        belief = DirichletBelief.from_prior((3.0, 1.0))
        cell = NigBelief(2.0, 1.0, 2.0, 1.0)
        report = mixture_total_uncertainty(belief, [cell, cell])
        assert report.between_class == 0.0
        assert report.total == cell.predictive_uncertainty().total

    def test_hand_expansion(self):
        # weights (.5,.5), means (0,2), per-class aleatoric 1, kappa 1:
        # aleatoric 1, within 1, between .5*4 - 1 = 1 -> epistemic 2, total 3
        belief = DirichletBelief.from_prior((1.0, 1.0))
        cells = [NigBelief(0.0, 1.0, 2.0, 1.0), NigBelief(2.0, 1.0, 2.0, 1.0)]
        report = mixture_total_uncertainty(belief, cells)
        assert report.aleatoric == pytest.approx(1.0, rel=1e-12)
        assert report.epistemic == pytest.approx(2.0, rel=1e-12)
        assert report.total == pytest.approx(3.0, rel=1e-12)
        assert report.between_class == pytest.approx(1.0, rel=1e-12)

    def test_total_is_exact_sum(self):
        rng = np.random.default_rng(46)
        belief = DirichletBelief.from_prior(rng.uniform(0.5, 4, size=5))
        cells = [
            NigBelief(rng.uniform(-3, 3), rng.uniform(0.5, 3), rng.uniform(1.5, 4), rng.uniform(0.5, 2))
            for _ in range(5)
        ]
        report = mixture_total_uncertainty(belief, cells)
        assert report.total == report.aleatoric + report.epistemic

    def test_matches_nig_mixture_variance(self):
        # with NIG components the mixture variance equals the lifted total
        rng = np.random.default_rng(47)
        belief = DirichletBelief.from_prior(rng.uniform(0.5, 4, size=4))
        cells = [
            NigBelief(rng.uniform(-3, 3), rng.uniform(0.5, 3), rng.uniform(1.5, 4), rng.uniform(0.5, 2))
            for _ in range(4)
        ]
        report = mixture_total_uncertainty(belief, cells)
        _, variance = build_mixture(belief, cells).mean_variance()
        assert report.total == pytest.approx(variance, rel=1e-12)


class TestWeightConcentration:
    def test_all_quantities_converge_to_dominant_component(self):
        target = NigBelief(5.0, 10.0, 6.0, 5.0)
        other = NigBelief(-2.0, 1.0, 2.0, 1.0)
        previous_gap = None
        for evidence in (0, 5, 50, 500, 5000):
            belief = DirichletBelief.from_prior((1.0, 1.0))
            alpha = belief.alpha.copy()
            alpha[0] += evidence
            belief = DirichletBelief(alpha, belief.alpha0, 1.0, float(evidence))
            mix = build_mixture(belief, [target, other])
            gap = abs(mix.mmse() - target.tau)
            if previous_gap is not None:
                assert gap < previous_gap
            previous_gap = gap
        assert previous_gap < 1e-2
