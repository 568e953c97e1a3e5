import numpy as np
import pytest


def random_spd(rng, p, scale=1.0):
    X = rng.standard_normal((p + 3, p))
    return scale * (X.T @ X / (p + 3) + 0.3 * np.eye(p))


def random_lower(rng, p):
    A = np.tril(rng.uniform(-0.5, 0.5, (p, p)), -1)
    A[np.diag_indices(p)] = rng.uniform(0.7, 1.5, p)
    return A


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
