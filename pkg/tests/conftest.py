import numpy as np
import pytest


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_spd(rng, d, lo=0.5, hi=3.0):
    """SPD matrix with spectrum drawn uniformly from [lo, hi]."""
    q = random_orthogonal(rng, d)
    lam = rng.uniform(lo, hi, size=d)
    return q @ np.diag(lam) @ q.T


def random_sym(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a + a.T) / 2.0


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240817)
