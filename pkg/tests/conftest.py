import numpy as np
import pytest

from causal_drf import Dataset, ForestConfig


def random_dataset(rng, n=60, p=3, d=1, balance=0.5):
    """Small synthetic dataset with both arms guaranteed nonempty."""
    X = rng.uniform(0.0, 1.0, size=(n, p))
    W = (rng.uniform(size=n) < balance).astype(np.int8)
    # Force at least a quarter of each arm so kappa floors are satisfiable.
    k = max(1, n // 4)
    W[:k] = 1
    W[k : 2 * k] = 0
    Y = X[:, 0:1] + 0.5 * rng.standard_normal((n, d))
    return Dataset(X=X, W=W, Y=Y)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_config():
    return ForestConfig(
        num_trees=8, num_groups=4, min_leaf_per_group=2, fourier_count=8, seed=3
    )


@pytest.fixture
def small_dataset(rng):
    return random_dataset(rng, n=80)
