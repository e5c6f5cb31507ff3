import numpy as np
import pytest


def fd_grad(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def fd_cross_hessian(f2, x, x2, h=1e-4):
    """Nested central differences of f2(x, x2) in both arguments."""
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    d = x.size
    H = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            yp, ym = x2.copy(), x2.copy()
            yp[j] += h
            ym[j] -= h
            H[i, j] = (f2(xp, yp) - f2(xp, ym) - f2(xm, yp) + f2(xm, ym)) / (4 * h * h)
    return H


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
