import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from glmcurl.state import FOCCZ4_GROUPS  # noqa: E402


def random_foccz4_states(rng, n, nv=103, scale=0.3):
    """Random states with a positive-definite unit-determinant conformal metric."""
    q = rng.normal(0.0, scale, (n, nv))
    o, _ = FOCCZ4_GROUPS["gt"]
    M = np.eye(3) + 0.15 * rng.normal(size=(n, 3, 3))
    G = np.einsum("nij,nkj->nik", M, M)
    G /= np.linalg.det(G)[:, None, None] ** (1.0 / 3.0)
    for a, (i, j) in enumerate([(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]):
        q[:, o + a] = G[:, i, j]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
