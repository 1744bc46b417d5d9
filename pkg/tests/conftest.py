import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


@pytest.fixture
def fig_state():
    # ground-heavy qutrit used throughout the cone comparisons
    return np.array([0.8, 0.16, 0.04])


def gamma_ladder(d, q):
    w = q ** np.arange(d)
    return w / w.sum()


@pytest.fixture
def qutrit_gamma():
    return gamma_ladder(3, 0.5)
