import numpy as np
import pytest

from olpsim.core import Instance


def random_instance(rng, n=None, m=None, reward_high=5.0):
    """Small random instance with capacities inside the generators' band."""
    n = n if n is not None else int(rng.integers(3, 13))
    m = m if m is not None else int(rng.integers(1, 3))
    rewards = rng.uniform(0.5, reward_high, size=n)
    consumption = np.abs(rng.normal(0.5, 1.0, size=(n, m)))
    b = np.full(m, 0.25 * n)
    return Instance(rewards=rewards, consumption=consumption, b=b)


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


@pytest.fixture
def tiny_instance():
    rewards = np.array([3.0, 1.0])
    consumption = np.array([[1.0], [1.0]])
    return Instance(rewards=rewards, consumption=consumption, b=np.array([1.0]))
