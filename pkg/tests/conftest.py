import numpy as np
import pytest
from hypothesis import settings

import weylgeo as wg
from weylgeo.conics import Conic, ConicWeylData

settings.register_profile("ci", deadline=None, max_examples=50)
settings.load_profile("ci")

SEED = 20240817


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


# the admissibility scan is cached per data object, so share them per session
@pytest.fixture(scope="session")
def conic_round():
    return Conic.from_complex(np.eye(3))


@pytest.fixture(scope="session")
def conic_diag():
    return Conic.from_complex(np.diag([1.0, 2.0, 3.0]))


@pytest.fixture(scope="session")
def conic_offdiag():
    B = np.zeros((3, 3))
    B[0, 1] = B[1, 0] = 0.3
    return Conic.from_matrices(np.eye(3), B)


@pytest.fixture(scope="session")
def conic_circle():
    return Conic.from_complex(np.diag([1.0, 1.0, -1.0]))


@pytest.fixture(scope="session")
def data_round(conic_round):
    return ConicWeylData(conic_round)


@pytest.fixture(scope="session")
def data_diag(conic_diag):
    return ConicWeylData(conic_diag)


@pytest.fixture(scope="session")
def data_offdiag(conic_offdiag):
    return ConicWeylData(conic_offdiag)


@pytest.fixture(scope="session")
def admissible_set(conic_round, conic_diag, conic_offdiag):
    return {
        "round": ConicWeylData(conic_round),
        "diag": ConicWeylData(conic_diag),
        "offdiag": ConicWeylData(conic_offdiag),
    }
