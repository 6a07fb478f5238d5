import numpy as np
import pytest

from lmglab.spin_core import CouplingParams, SpinSpace
from lmglab import spectral


@pytest.fixture(scope="session")
def space100():
    return SpinSpace(100)


@pytest.fixture(scope="session")
def coup_deep():
    """The reference strongly coupled point (gamma_x, gamma_y) = (-4, -12)."""
    return CouplingParams(gamma_x=-4.0, gamma_y=-12.0)


@pytest.fixture(scope="session")
def coup_ac():
    """Avoided-crossing coupling for J=100, ratio 3, N=172."""
    pred = spectral.predict_crossing_coupling(100, 3.0, 172)
    return CouplingParams(gamma_x=pred.gamma_x, gamma_y=pred.gamma_y)


@pytest.fixture(scope="session")
def coup_c():
    """Real-crossing coupling for J=100, ratio 3, N=173."""
    pred = spectral.predict_crossing_coupling(100, 3.0, 173)
    return CouplingParams(gamma_x=pred.gamma_x, gamma_y=pred.gamma_y)


@pytest.fixture(scope="session")
def spectra_deep(space100, coup_deep):
    return spectral.full_spectrum(space100, coup_deep)


@pytest.fixture(scope="session")
def spectra_ac(space100, coup_ac):
    return spectral.full_spectrum(space100, coup_ac)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20220531)
