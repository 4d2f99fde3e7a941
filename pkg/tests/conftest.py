import math

import numpy as np
import pytest

from hyperuni.pointset import PointSet


@pytest.fixture(scope="session")
def antipodal_pair() -> PointSet:
    return PointSet(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))


def gegenbauer_ratio(d: int, n: int, x):
    """Independent oracle for P_n^(d): Gegenbauer ratio C_n^lam(x)/C_n^lam(1),
    with the Chebyshev specialisation at d = 1."""
    x = np.asarray(x, dtype=float)
    if d == 1:
        return np.cos(n * np.arccos(np.clip(x, -1.0, 1.0)))
    from scipy.special import eval_gegenbauer

    lam = (d - 1) / 2.0
    return eval_gegenbauer(n, lam, x) / eval_gegenbauer(n, lam, 1.0)


def rotation_matrix(dim: int, seed: int) -> np.ndarray:
    """A deterministic random rotation of R^dim (det +1)."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def roots_of_unity(n: int) -> PointSet:
    """n equally spaced points on the circle: a perfect (n-1)-design on S^1."""
    theta = 2.0 * math.pi * np.arange(n) / n
    return PointSet(np.column_stack([np.cos(theta), np.sin(theta)]))
