"""Chebyshev-Lobatto collocation utilities on the depth interval [-1, 0].

Nodes are returned in ascending order (bed y = -1 first, surface y = 0 last)
so that boundary rows of a differentiation matrix are the first and last rows.
All transforms map between nodal values and Chebyshev coefficients on the
reference variable t = 2*y + 1 in [-1, 1].
"""

import numpy as np
import numpy.polynomial.chebyshev as npcheb
import scipy.fft


def lobatto(n_nodes):
    """Nodes and first-derivative matrix on [-1, 0].

    Parameters
    ----------
    n_nodes : int
        Number of collocation points (>= 2).

    Returns
    -------
    y : ndarray, shape (n_nodes,)
        Chebyshev-Lobatto points, ascending, y[0] = -1, y[-1] = 0.
    D : ndarray, shape (n_nodes, n_nodes)
        Spectral differentiation matrix acting on nodal values.
    """
    if n_nodes < 2:
        raise ValueError("need at least 2 collocation points")
    N = n_nodes - 1
    j = np.arange(N + 1)
    t = np.cos(np.pi * j / N)                      # descending on [-1, 1]
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** j
    T = np.tile(t, (N + 1, 1)).T
    dT = T - T.T
    D = np.outer(c, 1.0 / c) / (dT + np.eye(N + 1))
    D = D - np.diag(D.sum(axis=1))                 # negative-sum trick
    # map t -> y = (t - 1)/2 and flip to ascending order
    y = (t[::-1] - 1.0) / 2.0
    Dy = 2.0 * D[::-1, ::-1]
    return y, Dy


def quad_weights(n_nodes):
    """Clenshaw-Curtis weights on [-1, 0] for the ascending Lobatto nodes."""
    N = n_nodes - 1
    w = np.zeros(N + 1)
    theta = np.pi * np.arange(N + 1) / N
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[1:N]) / (4.0 * k * k - 1)
        v -= np.cos(N * theta[1:N]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[1:N]) / (4.0 * k * k - 1)
    w[1:N] = 2.0 * v / N
    # weights are symmetric; halve for the interval length |[-1,0]| = 1
    return w[::-1] / 2.0


def to_coeffs(values):
    """Chebyshev coefficients (in t) of the interpolant of ascending nodal values."""
    N = len(values) - 1
    vt = values[::-1]                              # values at t_j = cos(pi j/N)
    a = scipy.fft.dct(vt, type=1) / N
    a[0] /= 2.0
    a[-1] /= 2.0
    return a


def from_coeffs(coeffs, n_nodes=None):
    """Nodal values (ascending on [-1,0]) of a Chebyshev coefficient vector."""
    a = np.asarray(coeffs, dtype=float)
    if n_nodes is not None and n_nodes != len(a):
        a = np.pad(a, (0, n_nodes - len(a))) if n_nodes > len(a) else a[:n_nodes]
    b = a.copy()
    b[0] *= 2.0
    b[-1] *= 2.0
    vt = scipy.fft.dct(b, type=1) / 2.0
    return vt[::-1]


def eval_interpolant(values, y, derivative=0):
    """Evaluate the interpolant of nodal values (or a y-derivative) at points y."""
    a = to_coeffs(np.asarray(values, dtype=float))
    if derivative:
        a = npcheb.chebder(a, derivative) * 2.0 ** derivative   # d/dy = 2 d/dt
    t = 2.0 * np.asarray(y) + 1.0
    return npcheb.chebval(t, a)


def antiderivative_values(values, y):
    """Values of F(y) = integral_{-1}^{y} f  for nodal data f, spectrally exact."""
    a = to_coeffs(np.asarray(values, dtype=float))
    A = npcheb.chebint(a) / 2.0                    # dt = 2 dy
    t = 2.0 * np.asarray(y) + 1.0
    return npcheb.chebval(t, A) - npcheb.chebval(-1.0, A)
