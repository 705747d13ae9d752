import json
import math

import pytest

from propfuse import (
    Confidence,
    MaterialLibrary,
    Observation,
    PropertyKind,
    PropertyPrior,
    ValidationError,
    validate_observation,
)


class TestPropertyKind:
    def test_boundary_values_are_admissible(self):
        kind = PropertyKind("hardness", "Shore", (0.0, 100.0))
        assert kind.contains(0.0)
        assert kind.contains(100.0)
        assert not kind.contains(100.0001)

    def test_reversed_support_rejected(self):
        with pytest.raises(ValidationError, match="lower bound"):
            PropertyKind("stiffness", "lbf-in^2", (2.0, 1.0))

    def test_nonnegative_properties_reject_negative_support(self):
        with pytest.raises(ValidationError, match="negative"):
            PropertyKind("friction", "", (-0.5, 1.0))
        # other properties may go negative
        PropertyKind("charge", "C", (-1.0, 1.0))

    def test_half_open_support(self):
        kind = PropertyKind("density", "kg/m^3", (0.0, math.inf))
        assert kind.contains(1e12)


class TestConfidence:
    @pytest.mark.parametrize("value", [0.0, 0.5, 1.0])
    def test_valid(self, value):
        assert float(Confidence(value)) == value

    @pytest.mark.parametrize("value", [-0.01, 1.3, math.nan])
    def test_invalid(self, value):
        with pytest.raises(ValidationError):
            Confidence(value)


class TestPropertyPrior:
    def test_derived_beta_gives_ten_percent_prior_sd(self):
        prior = PropertyPrior(700.0)
        assert math.sqrt(prior.aleatoric) == pytest.approx(70.0, rel=1e-4)

    def test_bad_parameters_named(self):
        with pytest.raises(ValidationError, match="kappa"):
            PropertyPrior(1.0, kappa=0.0)
        with pytest.raises(ValidationError, match="alpha"):
            PropertyPrior(1.0, alpha=1.0)
        with pytest.raises(ValidationError, match="beta"):
            PropertyPrior(1.0, beta=-2.0)

    def test_shorthand_forms(self):
        assert PropertyPrior.from_value(700).tau == 700.0
        assert PropertyPrior.from_value({"nominal": 5.0, "kappa": 2.0}).kappa == 2.0
        with pytest.raises(ValidationError, match="unknown prior fields"):
            PropertyPrior.from_value({"tau": 1.0, "sigma": 2.0})


class TestMaterialLibrary:
    def test_ordering_is_stable_across_loads(self, lib, tmp_path):
        path = tmp_path / "library.json"
        lib.save(path)
        reloaded = MaterialLibrary.load(path)
        assert reloaded.classes == lib.classes
        assert [reloaded.index_of(m) for m in lib.classes] == [0, 1]
        # bit-exact prior round trip through JSON
        for material in lib.classes:
            for prop in lib.property_names:
                a, b = lib.prior(material, prop), reloaded.prior(material, prop)
                assert (a.tau, a.kappa, a.alpha, a.beta) == (b.tau, b.kappa, b.alpha, b.beta)

    def test_duplicate_class_rejected(self):
        with pytest.raises(ValidationError, match="unique"):
            MaterialLibrary(("a", "a"), (), {"a": {}})

    def test_missing_prior_rejected(self):
        with pytest.raises(ValidationError, match="missing a prior"):
            MaterialLibrary(
                ("a",),
                (PropertyKind("density", "kg/m^3", (0.0, math.inf)),),
                {"a": {}},
            )

    def test_default_colors_are_deterministic(self, single_lib):
        assert single_lib.color("rubber") == (31, 119, 180)

    def test_unknown_material_lookup(self, lib):
        with pytest.raises(ValidationError, match="unknown material"):
            lib.index_of("glass")

    def test_prior_shorthand_in_file(self, tmp_path):
        path = tmp_path / "lib.json"
        path.write_text(json.dumps({
            "schema": 1,
            "properties": [{"name": "density", "units": "kg/m^3", "support": [0, None]}],
            "classes": ["cork"],
            "priors": {"cork": {"density": 250}},
        }))
        lib = MaterialLibrary.load(path)
        assert lib.prior("cork", "density").tau == 250.0


class TestValidateObservation:
    def test_valid_observation_empty_report(self, lib):
        obs = Observation("s0", "v0", 0, 0.8, {"density": 650.0})
        report = validate_observation(obs, lib)
        assert report.ok
        assert report.violations == ()

    def test_out_of_range_confidence(self, lib):
        report = validate_observation(Observation("s0", "v0", 0, 1.3), lib)
        assert len(report.violations) == 1
        assert "confidence" in report.violations[0]

    def test_unknown_class_index(self, lib):
        report = validate_observation(Observation("s0", "v0", lib.k, 0.5), lib)
        assert len(report.violations) == 1
        assert "class index" in report.violations[0]

    def test_property_outside_support(self, lib):
        report = validate_observation(
            Observation("s0", "v0", 0, 0.5, {"friction": 9.0}), lib
        )
        assert any("outside support" in v for v in report.violations)

    def test_never_raises_collects_everything(self, lib):
        obs = Observation("s0", "v0", 99, 2.0, {"nope": 1.0, "density": -5.0})
        report = validate_observation(obs, lib)
        assert len(report.violations) == 4
