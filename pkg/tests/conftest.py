import math
from pathlib import Path

import pytest

from propfuse import MaterialLibrary, PropertyKind, PropertyPrior

DATA = Path(__file__).parent / "data"


@pytest.fixture
def lib() -> MaterialLibrary:
    """Two materials, two properties; the workhorse for most tests."""
    return MaterialLibrary(
        classes=("wood", "steel"),
        properties=(
            PropertyKind("density", "kg/m^3", (0.0, math.inf)),
            PropertyKind("friction", "", (0.0, 5.0)),
        ),
        priors={
            "wood": {
                "density": PropertyPrior(700.0),
                "friction": PropertyPrior(0.45),
            },
            "steel": {
                "density": PropertyPrior(7800.0),
                "friction": PropertyPrior(0.30),
            },
        },
        colors={"wood": (139, 69, 19), "steel": (160, 160, 160)},
    )


@pytest.fixture
def single_lib() -> MaterialLibrary:
    """One-class library for degenerate-mixture checks."""
    return MaterialLibrary(
        classes=("rubber",),
        properties=(PropertyKind("friction", "", (0.0, 5.0)),),
        priors={"rubber": {"friction": PropertyPrior(0.8)}},
    )
