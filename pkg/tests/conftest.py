import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def stable_matrix(rng, n: int, radius: float = 0.9) -> np.ndarray:
    """Random matrix rescaled to spectral norm <= radius."""
    M = rng.standard_normal((n, n))
    s = np.linalg.svd(M, compute_uv=False)[0]
    return (radius / s) * M
