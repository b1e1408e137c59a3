import pytest

from ecoplus.config import ConfigFile
from ecoplus.dynamics import derive_resistance_coefficients
from ecoplus.models import BoundarySpec, CpemParams, KmmkParams, Limits, RoadSpec
from ecoplus.problem import ScenarioSpec


@pytest.fixture
def cfg() -> ConfigFile:
    return ConfigFile()


@pytest.fixture
def cpem_coeffs():
    return derive_resistance_coefficients(CpemParams(), RoadSpec())


@pytest.fixture
def kmmk_coeffs():
    return derive_resistance_coefficients(KmmkParams(), RoadSpec())


@pytest.fixture
def scenario(cpem_coeffs) -> ScenarioSpec:
    """The published single-vehicle case at vd = 8, tm = 18."""
    return ScenarioSpec(road=RoadSpec(), boundary=BoundarySpec(v0=8.0, vd=8.0, tm=18.0),
                        limits=Limits(), coeffs=cpem_coeffs, dt=0.1)


@pytest.fixture
def kmmk_scenario(kmmk_coeffs) -> ScenarioSpec:
    return ScenarioSpec(road=RoadSpec(), boundary=BoundarySpec(v0=8.0, vd=8.0, tm=18.0),
                        limits=Limits(), coeffs=kmmk_coeffs, dt=0.1)

