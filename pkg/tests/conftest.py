"""Shared fixtures and independent numerical oracles for the test suite.

The finite-difference helpers here are deliberately test-local: they
verify library derivatives against a second, independent path.
"""

import numpy as np
import pytest

import bregmc as bm


def fd_gradient(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, float)
    out = np.empty(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def fd_jacobian(g, x, h=1e-6):
    """Central-difference Jacobian of a vector function (Hessian when g
    is a gradient)."""
    x = np.asarray(x, float)
    cols = []
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        cols.append((np.asarray(g(x + e)) - np.asarray(g(x - e))) / (2.0 * h))
    jac = np.stack(cols, axis=1)
    return 0.5 * (jac + jac.T)


def rel_err(got, want):
    got = np.asarray(got, float)
    want = np.asarray(want, float)
    scale = max(1e-300, float(np.max(np.abs(want))))
    return float(np.max(np.abs(got - want))) / scale


@pytest.fixture(scope="session")
def fig2_family():
    """Two-Gaussian mixture family used in the convergence studies:
    m(x; eta) = (1 - eta) N(0, 3) + eta N(2, 1)."""
    return bm.MixtureFamily([bm.gaussian(0.0, 3.0), bm.gaussian(2.0, 1.0)])


@pytest.fixture(scope="session")
def hetero_family():
    """Order-1 heterogeneous family: Gaussian(-2, 1) and Laplace(2, 1)."""
    return bm.MixtureFamily([bm.gaussian(-2.0, 1.0), bm.laplace(2.0, 1.0)])


@pytest.fixture(scope="session")
def mix2d_family():
    """Order-2 family with Gaussian, Laplace and Cauchy components."""
    return bm.MixtureFamily([bm.gaussian(-2.0, 1.0), bm.laplace(0.0, 1.0),
                             bm.cauchy(2.0, 1.0)])


@pytest.fixture(scope="session")
def gauss_ef():
    """Exponential family of the univariate normal: t(x) = (x, x^2)."""
    return bm.polynomial_ef([1, 2])


@pytest.fixture(scope="session")
def gauss_oracle_space():
    return bm.DuallyFlatSpace(bm.gaussian_ef_oracle())


def random_natural_gaussian(rng, n):
    """Random valid natural parameters of the normal family."""
    return np.stack([rng.uniform(-1.0, 1.0, n),
                     rng.uniform(-1.5, -0.4, n)], axis=1)
