import numpy as np
import pytest

from riegames.manifolds import (
    SPD,
    Euclidean,
    Hyperboloid,
    Point,
    Product,
    point,
    random_point,
)


def random_spd(rng, n, lo=0.1, hi=10.0):
    """SPD matrix with eigenvalues drawn uniformly from [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vals = rng.uniform(lo, hi, size=n)
    a = (q * vals) @ q.T
    return 0.5 * (a + a.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def all_manifolds():
    """The four geometries exercised by the geometry suites."""
    return [
        Euclidean(3),
        SPD(3),
        Hyperboloid(3),
        Product((Euclidean(2), SPD(2), Hyperboloid(2))),
    ]


def sample_point(manifold, rng, radius=1.0):
    return random_point(manifold, rng, radius=radius)


def origin_point(manifold) -> Point:
    return point(manifold, manifold.origin(), check=False)
