import numpy as np
import pytest

from girko_lab.ensembles import EnsembleSpec, SeedStream, sample_matrix


@pytest.fixture
def ginibre():
    """``ginibre(n, t, field='complex', seed=11)``: a fixed Ginibre draw."""
    def draw(n, t=0, field='complex', seed=11):
        return sample_matrix(EnsembleSpec(field, 'gaussian', n), SeedStream(seed, t))
    return draw


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line('markers', 'acceptance: acceptance criterion (slow)')


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section('acceptance criteria')
        for line in LINES:
            terminalreporter.write_line(line)
