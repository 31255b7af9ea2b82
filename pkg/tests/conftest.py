import numpy as np
import pytest

from incentive_bandits.instances import random_instance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_instances(seed, count, max_arms=6, max_agents=4):
    """Random instances with sizes drawn up to the given caps."""
    gen = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(gen.integers(1, max_arms + 1))
        k = int(gen.integers(1, max_agents + 1))
        out.append(random_instance(gen, n, k))
    return out
