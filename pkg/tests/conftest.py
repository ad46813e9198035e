import numpy as np
import pytest

from relbohm.kinematics import SpacetimeBox
from relbohm.scenario import corpus_scenario
from relbohm.wavefunction import MultiParticleWaveFunction, normalize_kg

TWO_PI = 2 * np.pi

# acceptance results, filled by test_acceptance and echoed in the summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def box():
    return SpacetimeBox(TWO_PI, 10.0)


@pytest.fixture
def entangled():
    """c1 u_k(x1) u_p(x2) + c2 u_k'(x1) u_p'(x2) with p != p'."""
    return normalize_kg(corpus_scenario("entangled").wavefunction())


@pytest.fixture
def interference():
    return normalize_kg(corpus_scenario("interference").wavefunction())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cfgs(wf: MultiParticleWaveFunction, count: int, rng) -> np.ndarray:
    return wf.box.lower + rng.random((count, wf.n, 4)) * wf.box.extent
