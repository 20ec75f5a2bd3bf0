"""Flattened-domain machinery for the free-surface problem.

The unknown fluid domain under a surface y = eta(x) is pulled back to the
fixed strip S x (-1, 0) by (x, y) -> (x, (1+y) eta(x) + y).  The transformed
interior operator decomposes as A0(eta) + b with

    A0(eta) = d11 - [2(1+y) eta'/(1+eta)] d12
              + [(1 + (1+y)^2 eta'^2)/(1+eta)^2] d22
              - (1+y) [((1+eta) eta'' - 2 eta'^2)/(1+eta)^2] d2,
    b(eta, psi) = -f((1+y) eta + y, psi),

and the surface operator is

    B(eta, psi) = 1/2 [ t1^2 - (2 eta'/(1+eta)) t1 t2
                        + ((1+eta'^2)/(1+eta)^2) t2^2 ],

with t1, t2 the traces at y = 0 of the x- and y-derivatives.  The nonlinear
wave residual combines them with the curvature and hydrostatic terms:

    Psi(sigma, lambda, eta) = B - sigma eta''/(1+eta'^2)^{3/2}
                              + g rho(0) eta - mean(B),

which vanishes identically on the laminar (eta = 0) family and whose
linearisation at eta = 0 acts diagonally on the cosine modes.

Discretisation: cosine collocation in x on the half period [0, pi/k] (all
fields are even and 2 pi/k-periodic), Chebyshev-Lobatto in y.  Fields are
stored on the full period; solves run on the half grid.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import cheb
from .errors import ConvergenceError, StratWaveError, WindowEscapeError
from .laminar import _require, apriori_bound, solve_laminar
from .profiles import eval_f


class WaveGrid:
    """Tensor collocation grid for even 2*pi/k-periodic fields on the strip.

    x: nx/2 + 1 nodes on the half period [0, pi/k] (the even extension fills
    the full period); y: ny Chebyshev-Lobatto nodes ascending on [-1, 0].
    """

    def __init__(self, k, nx=64, ny=48):
        if k < 1:
            raise ValueError("wavenumber k must be >= 1")
        if nx < 8 or nx % 2:
            raise ValueError("nx must be even and >= 8")
        if ny < 8:
            raise ValueError("ny must be >= 8")
        self.k = int(k)
        self.nx = int(nx)
        self.ny = int(ny)
        M = nx // 2
        self.M = M
        i = np.arange(M + 1)
        j = np.arange(M + 1)
        self.x = np.pi * i / (k * M)
        self.x_full = 2.0 * np.pi * np.arange(nx) / (k * nx)
        cos_ij = np.cos(np.pi * np.outer(i, j) / M)
        sin_ij = np.sin(np.pi * np.outer(i, j) / M)
        self.synthesis = cos_ij                       # coeffs -> half-grid values
        ci = np.full(M + 1, 2.0)
        ci[0] = ci[-1] = 1.0
        dj = np.full(M + 1, 2.0)
        dj[0] = dj[-1] = 1.0
        self.analysis = (dj[:, None] / nx) * (ci[None, :] * cos_ij.T)
        kk = k * j.astype(float)
        self.Dx = sin_ij @ np.diag(-kk) @ self.analysis        # even -> odd values
        self.Dxx = cos_ij @ np.diag(-kk ** 2) @ self.analysis  # even -> even
        self.y, self.Dy = cheb.lobatto(ny)
        self.Dyy = self.Dy @ self.Dy
        w = np.full(M + 1, 2.0)
        w[0] = w[-1] = 1.0
        self.mean_weights = w / nx                    # discrete x-mean over S

    def mean_x(self, vals_half):
        return float(self.mean_weights @ vals_half)

    def project(self, vals_half):
        """Cosine coefficients a_0..a_M of a half-grid (even) function."""
        return self.analysis @ vals_half

    def reflect(self, half, parity=1):
        """Even (parity=+1) or odd (parity=-1) extension to the full period."""
        half = np.asarray(half)
        full = np.empty((self.nx,) + half.shape[1:], dtype=half.dtype)
        full[: self.M + 1] = half
        full[self.M + 1:] = parity * half[self.M - 1: 0: -1]
        return full

    def restrict(self, full):
        return np.asarray(full)[: self.M + 1]


@lru_cache(maxsize=16)
def get_grid(k, nx=64, ny=48):
    """Shared WaveGrid instances (immutable once built)."""
    return WaveGrid(k, nx, ny)


@dataclass(frozen=True)
class SurfaceShape:
    """Even, mean-zero, 2*pi/k-periodic profile eta = sum a_m cos(mkx)."""

    k: int
    coeffs: np.ndarray            # a_1 .. a_N (no constant term)

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           np.atleast_1d(np.asarray(self.coeffs, dtype=float)))
        if self.k < 1:
            raise ValueError("wavenumber k must be >= 1")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("shape coefficients must be finite")

    def eval(self, x, derivative=0):
        x = np.asarray(x, dtype=float)
        n = len(self.coeffs)
        if n == 0:
            return np.zeros_like(x)
        jm = self.k * np.arange(1, n + 1, dtype=float)
        ang = np.outer(x, jm)
        if derivative == 0:
            return np.cos(ang) @ self.coeffs
        if derivative == 1:
            return np.sin(ang) @ (-jm * self.coeffs)
        if derivative == 2:
            return np.cos(ang) @ (-jm ** 2 * self.coeffs)
        raise ValueError("derivative must be 0, 1 or 2")

    def max_abs(self, n_samples=4096):
        if len(self.coeffs) == 0:
            return 0.0
        xs = np.linspace(0.0, np.pi / self.k, n_samples)
        return float(np.abs(self.eval(xs)).max())

    @property
    def in_admissible_set(self):
        return self.max_abs() < 1.0


def _check_admissible(shape):
    amp = shape.max_abs()
    if amp >= 1.0:
        raise StratWaveError(
            f"surface leaves the admissible set: sup|eta| = {amp:.6g} >= 1"
        )
    if amp >= 0.95:
        warnings.warn(
            f"sup|eta| = {amp:.4g} close to 1; the flattening map degenerates",
            RuntimeWarning, stacklevel=3,
        )


@dataclass(frozen=True)
class FlattenedField:
    """Pulled-back field on the full-period tensor grid."""

    nx: int
    ny: int
    values: np.ndarray            # shape (nx, ny), x index first
    lam: float
    residual_inf: float


@dataclass(frozen=True)
class A0Coefficients:
    """Pointwise coefficient fields of the transformed second-order operator."""

    c11: np.ndarray               # d11 coefficient (identically 1)
    c12: np.ndarray               # d12 coefficient
    c22: np.ndarray               # d22 coefficient
    c2: np.ndarray                # first-order d2 drift


def assemble_A0(shape, grid):
    """Coefficient fields of A0(eta) on the half grid (x along axis 0)."""
    _check_admissible(shape)
    eta = shape.eval(grid.x)
    deta = shape.eval(grid.x, 1)
    ddeta = shape.eval(grid.x, 2)
    E, E1, E2 = eta[:, None], deta[:, None], ddeta[:, None]
    Y = grid.y[None, :]
    one = np.ones((grid.M + 1, grid.ny))
    c12 = -2.0 * (1.0 + Y) * E1 / (1.0 + E) * one
    c22 = (1.0 + (1.0 + Y) ** 2 * E1 ** 2) / (1.0 + E) ** 2 * one
    c2 = -(1.0 + Y) * ((1.0 + E) * E2 - 2.0 * E1 ** 2) / (1.0 + E) ** 2 * one
    return A0Coefficients(one.copy(), c12, c22, c2)


def apply_A0(coeffs, grid, psi_half):
    """A0(eta) psi on half-grid values (matrix-free)."""
    return (coeffs.c11 * (grid.Dxx @ psi_half)
            + coeffs.c12 * (grid.Dx @ psi_half @ grid.Dy.T)
            + coeffs.c22 * (psi_half @ grid.Dyy.T)
            + coeffs.c2 * (psi_half @ grid.Dy.T))


def operator_matrix(coeffs, grid):
    """Dense matrix of A0(eta) on raveled half-grid values (C order)."""
    Iy = np.eye(grid.ny)
    Ix = np.eye(grid.M + 1)
    return (np.kron(grid.Dxx, Iy)
            + coeffs.c12.ravel()[:, None] * np.kron(grid.Dx, grid.Dy)
            + coeffs.c22.ravel()[:, None] * np.kron(Ix, grid.Dyy)
            + coeffs.c2.ravel()[:, None] * np.kron(Ix, grid.Dy))


def _apply_boundary_rows(mat, rhs, grid, lam):
    nf = (grid.M + 1) * grid.ny
    for i in range(grid.M + 1):
        rb = i * grid.ny
        rt = rb + grid.ny - 1
        mat[rb, :] = 0.0
        mat[rb, rb] = 1.0
        mat[rt, :] = 0.0
        mat[rt, rt] = 1.0
        if rhs is not None:
            rhs[rb] = lam
            rhs[rt] = 0.0
    assert mat.shape == (nf, nf)


def _interior_residual(profile, grid, coeffs, psi_half, yphys):
    r = apply_A0(coeffs, grid, psi_half) - eval_f(profile, yphys, psi_half)
    return float(np.abs(r[:, 1:-1]).max()), r


def solve_semilinear(profile, lam, shape, grid, tol=1e-8, max_iter=25,
                     initial_guess=None, check=True):
    """Solve A0(eta) psi = f((1+y)eta + y, psi) with psi(.,0)=0, psi(.,-1)=lam.

    Newton iteration from the laminar column; the Jacobian A0 - diag(d_psi f)
    satisfies the discrete maximum-principle structure under A3, so the
    dense solve is safe.  Returns a :class:`FlattenedField` on the full
    period grid.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if check:
        _require(profile, ("A1", "A3"))
    _check_admissible(shape)
    coeffs = assemble_A0(shape, grid)
    eta = shape.eval(grid.x)
    Y = grid.y[None, :]
    yphys = (1.0 + Y) * eta[:, None] + Y

    if initial_guess is not None:
        psi = np.asarray(initial_guess, dtype=float).copy()
    else:
        flow = solve_laminar(profile, lam, n_nodes=grid.ny, check=False)
        psi = np.tile(flow.psi, (grid.M + 1, 1))
    psi[:, 0] = lam
    psi[:, -1] = 0.0

    res, _ = _interior_residual(profile, grid, coeffs, psi, yphys)
    for _ in range(max_iter):
        if res <= tol:
            break
        _, r = _interior_residual(profile, grid, coeffs, psi, yphys)
        F = r.ravel().copy()
        J = operator_matrix(coeffs, grid)
        J[np.arange(J.shape[0]), np.arange(J.shape[0])] -= \
            eval_f(profile, yphys, psi, 1).ravel()
        Fb = F
        for i in range(grid.M + 1):
            rb = i * grid.ny
            rt = rb + grid.ny - 1
            Fb[rb] = psi[i, 0] - lam
            Fb[rt] = psi[i, -1]
        _apply_boundary_rows(J, None, grid, lam)
        delta = scipy.linalg.solve(J, -Fb)
        psi = psi + delta.reshape(grid.M + 1, grid.ny)
        new_res, _ = _interior_residual(profile, grid, coeffs, psi, yphys)
        if not np.isfinite(new_res):
            raise ConvergenceError("semilinear Newton produced non-finite values")
        res = new_res
    if res > tol:
        raise ConvergenceError(
            f"semilinear solve stalled with residual {res:.3e} > {tol:.3e}"
        )
    if not profile.contains_psi(psi):
        raise WindowEscapeError(
            f"field range [{psi.min():.6g}, {psi.max():.6g}] exits audit window "
            f"{profile.psi_window}"
        )
    if np.abs(psi).max() > apriori_bound(profile, lam) + 10.0 * tol:
        raise StratWaveError("a priori sup-norm bound violated; solver inconsistency")
    return FlattenedField(grid.nx, grid.ny, grid.reflect(psi, 1), float(lam),
                          res)


def _half_values(grid, field):
    return grid.restrict(field.values)


def surface_traces(grid, psi_half):
    """Traces (t1, t2) of the x- and y-derivatives at the surface nodes."""
    t1 = grid.Dx @ psi_half[:, -1]
    t2 = psi_half @ grid.Dy[-1, :]
    return t1, t2


def _trace_b_half(shape, grid, psi_half):
    eta = shape.eval(grid.x)
    deta = shape.eval(grid.x, 1)
    t1, t2 = surface_traces(grid, psi_half)
    return 0.5 * (t1 ** 2
                  - 2.0 * deta / (1.0 + eta) * t1 * t2
                  + (1.0 + deta ** 2) / (1.0 + eta) ** 2 * t2 ** 2)


def boundary_trace_B(shape, field, grid=None):
    """Surface kinetic density B(eta, psi) on the full period grid."""
    grid = grid or get_grid(shape.k, field.nx, field.ny)
    return grid.reflect(_trace_b_half(shape, grid, _half_values(grid, field)), 1)


def curvature_term(shape, x):
    """eta'' / (1 + eta'^2)^{3/2} evaluated from the cosine coefficients."""
    d1 = shape.eval(x, 1)
    d2 = shape.eval(x, 2)
    return d2 / (1.0 + d1 ** 2) ** 1.5


@dataclass(frozen=True)
class PsiEvaluation:
    """Wave residual Psi on the full period, with the solved field attached."""

    values: np.ndarray
    q: float                      # hydraulic head: discrete surface mean of B
    field: FlattenedField


def evaluate_Psi(profile, sigma, lam, shape, grid, tol=1e-8, field=None,
                 check=True):
    """Evaluate the mean-zero wave residual Psi(sigma, lambda, eta).

    Solves the semilinear problem for the field (unless one is supplied),
    forms B - sigma * curvature + g rho(0) eta - mean(B), and removes the
    residual discrete mean so the output is mean-free to rounding.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if field is None:
        field = solve_semilinear(profile, lam, shape, grid, tol=tol, check=check)
    psi_half = _half_values(grid, field)
    b_half = _trace_b_half(shape, grid, psi_half)
    q = grid.mean_x(b_half)
    vals = (b_half
            - sigma * curvature_term(shape, grid.x)
            + profile.g * float(profile.rho(0.0)) * shape.eval(grid.x)
            - q)
    vals = vals - grid.mean_x(vals)
    return PsiEvaluation(grid.reflect(vals, 1), q, field)


def field_to_csv(shape, field, path):
    """Long-format CSV (x, y, psi) over the full period grid."""
    grid = get_grid(shape.k, field.nx, field.ny)
    with open(path, "w") as fh:
        fh.write(f"# lambda={field.lam:.17g} residual_inf={field.residual_inf:.17g}\n")
        fh.write("x,y,psi\n")
        for i, xv in enumerate(grid.x_full):
            for j, yv in enumerate(grid.y):
                fh.write(f"{xv:.17g},{yv:.17g},{field.values[i, j]:.17g}\n")


def residual_to_csv(shape, values, path):
    """CSV of (x, Psi(x)) on the full period grid."""
    nx = len(values)
    x_full = 2.0 * np.pi * np.arange(nx) / (shape.k * nx)
    with open(path, "w") as fh:
        fh.write("x,psi_residual\n")
        for xv, vv in zip(x_full, values):
            fh.write(f"{xv:.17g},{vv:.17g}\n")
