import pytest

import qutritsim.reconstruction as rc
from qutritsim.cavity_bloch import ReadoutSettings, reference_traces
from qutritsim.device_model import dispersive_spectrum, reference_device


@pytest.fixture(scope="session")
def params():
    return reference_device()


@pytest.fixture(scope="session")
def spectrum(params):
    return dispersive_spectrum(params)


@pytest.fixture(scope="session")
def settings():
    return ReadoutSettings()


@pytest.fixture(scope="session")
def refs(params, spectrum, settings):
    return reference_traces(params, spectrum, settings)


@pytest.fixture(scope="session")
def ops(refs):
    return rc.MeasurementOperator.from_traces(refs)


@pytest.fixture(scope="session")
def rotations():
    return rc.tomography_rotations()
