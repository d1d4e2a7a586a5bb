import numpy as np
import pytest


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240817)


def unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    m = rng.normal(size=(n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)
