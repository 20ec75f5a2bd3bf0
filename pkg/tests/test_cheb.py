import numpy as np
import pytest

from stratwave import cheb


def test_nodes_ascending_endpoints():
    y, D = cheb.lobatto(17)
    assert y[0] == -1.0 and y[-1] == 0.0
    assert np.all(np.diff(y) > 0)


@pytest.mark.parametrize("n", [8, 16, 33])
def test_differentiation_exact_on_polynomials(n):
    y, D = cheb.lobatto(n)
    p = y ** 3 - 0.5 * y ** 2 + 2.0 * y
    dp = 3.0 * y ** 2 - y + 2.0
    assert np.abs(D @ p - dp).max() < 1e-10


def test_differentiation_spectral_on_smooth():
    y, D = cheb.lobatto(32)
    f = np.exp(2.0 * y)
    assert np.abs(D @ f - 2.0 * f).max() < 1e-10


def test_quad_weights_polynomial_and_smooth():
    for n in (9, 16, 41):
        y, _ = cheb.lobatto(n)
        w = cheb.quad_weights(n)
        assert abs(w @ np.ones(n) - 1.0) < 1e-14                 # length of [-1,0]
        assert abs(w @ y + 0.5) < 1e-13                          # int y dy = -1/2
        assert abs(w @ np.exp(y) - (1.0 - np.exp(-1.0))) < 1e-12


def test_coeff_roundtrip_and_interpolation():
    y, _ = cheb.lobatto(24)
    f = np.sin(3.0 * y) + y ** 2
    a = cheb.to_coeffs(f)
    assert np.abs(cheb.from_coeffs(a) - f).max() < 1e-13
    yq = np.linspace(-1.0, 0.0, 57)
    assert np.abs(cheb.eval_interpolant(f, yq) - (np.sin(3 * yq) + yq ** 2)).max() < 1e-11
    dq = cheb.eval_interpolant(f, yq, derivative=1)
    assert np.abs(dq - (3 * np.cos(3 * yq) + 2 * yq)).max() < 1e-9


def test_antiderivative_values():
    y, _ = cheb.lobatto(24)
    f = np.cos(2.0 * y)
    F = cheb.antiderivative_values(f, y)
    exact = (np.sin(2.0 * y) - np.sin(-2.0)) / 2.0
    assert np.abs(F - exact).max() < 1e-13
