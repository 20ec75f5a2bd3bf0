import numpy as np
import pytest

import stratwave as sw


@pytest.fixture(scope="session")
def homogeneous():
    """Constant density, zero Bernoulli function: f == 0."""
    return sw.make_profile([1.0], [0.0], 1.0, (-5.0, 5.0))


@pytest.fixture(scope="session")
def linear_profile():
    """rho = 1 - 0.1 p, beta = -0.5: f = -0.1 y - 0.5, psi-independent."""
    return sw.make_profile([1.0, -0.1], [-0.5], 1.0, (-6.0, 6.0))


@pytest.fixture(scope="session")
def unit_shear_profile():
    """beta(p) = -p: f = psi, so d_psi f = 1 (constant coefficients)."""
    return sw.make_profile([1.0], [0.0, -1.0], 1.0, (-3.0, 3.0))


@pytest.fixture(scope="session")
def curved_profile():
    """beta(p) = -p + 0.1 p^2: genuinely nonlinear forcing in psi."""
    return sw.make_profile([1.0], [0.0, -1.0, 0.1], 1.0, (-2.5, 2.5))


def random_admissible(rng):
    """Random (profile, lambda) satisfying A1-A3 (and B1-B3) by construction.

    rho = a0 + a1 p + a2 p^2 with small curvature, beta = b0 - c p with
    c >= 2 |a2| g, so d_psi f = c - 2 a2 g y >= 0 everywhere.
    """
    a0 = rng.uniform(0.8, 1.5)
    a1 = rng.uniform(-0.03, 0.03)
    a2 = rng.uniform(-0.01, 0.01)
    g = rng.uniform(0.5, 2.0)
    b0 = rng.uniform(-0.5, 0.5)
    c = 2.0 * abs(a2) * g + rng.uniform(0.0, 0.3)
    lam = rng.uniform(-2.0, 0.5)
    profile = sw.make_profile([a0, a1, a2], [b0, -c], g, (-6.0, 6.0))
    return profile, lam


def random_wave_admissible(rng):
    """Random profile additionally satisfying A4 (negative Bernoulli data)."""
    a0 = rng.uniform(0.8, 1.5)
    a1 = rng.uniform(-0.02, 0.02)
    a2 = rng.uniform(-0.005, 0.005)
    g = rng.uniform(0.5, 1.5)
    c = 2.0 * abs(a2) * g + rng.uniform(0.0, 0.3)
    sup_drho = abs(a1) + 2.0 * abs(a2) * 8.0
    b0 = -g * sup_drho - rng.uniform(0.05, 0.5)
    return sw.make_profile([a0, a1, a2], [b0, -c], g, (-8.0, 8.0))


def coth(z):
    return np.cosh(z) / np.sinh(z)
