import itertools

import pytest

from core_model import DataEnvironment

ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
BETAS = (0.0, 0.25, 0.5, 0.75, 1.0)
SIGMAS = (0.0, 0.5, 1.0, 2.0)


def environment_grid(sizes=(1, 2, 3, 5, 10)):
    """Every (alpha, beta, sigma, N) combination of the acceptance grid."""
    return [
        DataEnvironment(n_consumers=n, alpha=a, beta=b, sigma=s)
        for a, b, s, n in itertools.product(ALPHAS, BETAS, SIGMAS, sizes)
    ]


@pytest.fixture
def common_preferences():
    """Two consumers sharing one willingness to pay."""
    return DataEnvironment(n_consumers=2, alpha=1.0, beta=0.0, sigma=1.0)


@pytest.fixture
def mixed():
    return DataEnvironment(n_consumers=2, alpha=0.5, beta=0.0, sigma=1.0)


@pytest.fixture
def write_scenario(tmp_path):
    def write(text, name='scenario.env'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return str(path)
    return write
