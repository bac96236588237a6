import pytest
from hypothesis import HealthCheck, settings

from microlens import paraxial

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def design():
    return paraxial.reference_design()


@pytest.fixture(scope="session")
def design_rx(design):
    return paraxial.to_prescription(design)


@pytest.fixture(scope="session")
def cap_rx():
    return paraxial.to_prescription(paraxial.equal_na_cap(60.0, 0.379))
