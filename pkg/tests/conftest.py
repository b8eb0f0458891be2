import numpy as np
import pytest

from infostream.dist_core import Distribution


def random_pair(rng: np.random.Generator, n: int, sparsity: float = 0.2):
    """Two random distributions over n items, each with some zero masses."""
    def one():
        w = rng.dirichlet(np.ones(n))
        w[rng.random(n) < sparsity] = 0.0
        if w.sum() == 0.0:
            w[rng.integers(n)] = 1.0
        return Distribution.from_weights(w)
    return one(), one()


def zipf(n: int, s: float = 1.0) -> Distribution:
    return Distribution.from_weights(1.0 / np.arange(1, n + 1) ** s)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
