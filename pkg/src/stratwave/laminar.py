"""Laminar (x-independent) flows psi_lambda on [-1, 0] and their thresholds.

The laminar problem

    psi'' = f(y, psi),   psi(0) = 0,   psi(-1) = lambda

is solved by Chebyshev collocation with Newton iteration; the linearisation
psi'' - d_psi f * (.) is invertible whenever d_psi f >= 0, which is exactly
the audited assumption A3, so Newton from psi = -lambda*y is the practical
realisation of the model's existence-and-uniqueness result.  A damped Picard
iteration on the equivalent integral identity serves as a fallback.
"""

from dataclasses import dataclass

import numpy as np

from . import cheb
from .errors import BracketError, ConvergenceError, StratWaveError, WindowEscapeError
from .profiles import check_assumptions, eval_f


@dataclass(frozen=True)
class LaminarFlow:
    """Converged laminar solution at mass flux lambda."""

    lam: float
    grid: np.ndarray          # ascending Chebyshev-Lobatto nodes in [-1, 0]
    psi: np.ndarray
    dpsi: np.ndarray
    residual_inf: float

    @property
    def dpsi_surface(self):
        """psi'(0), the surface shear value steering every threshold."""
        return float(self.dpsi[-1])

    @property
    def dpsi_bottom(self):
        return float(self.dpsi[0])


def apriori_bound(profile, lam):
    """Sup-norm bound |lambda| + e^2 (g sup|rho'| + sup|beta|) on the window."""
    return abs(lam) + np.e ** 2 * (
        profile.g * profile.sup_abs_drho() + profile.sup_abs_beta()
    )


def _require(profile, names, cached_report=None):
    from .errors import AssumptionError

    report = cached_report if cached_report is not None else check_assumptions(profile)
    if not report.passed(*names):
        bad = ", ".join(c.name for c in report.failures() if c.name in names)
        raise AssumptionError(f"assumption audit failed: {bad}", report)
    return report


def solve_laminar(profile, lam, n_nodes=64, tol=1e-8, max_iter=50,
                  initial_guess=None, check=True, picard_max_iter=500):
    """Solve the laminar two-point problem for the given mass flux.

    Parameters
    ----------
    profile : StratificationProfile
    lam : float
        Mass flux (boundary value at the bed y = -1).
    n_nodes : int
        Collocation points, >= 8.
    tol : float
        Residual sup-norm target.  Values much below ~1e-9 are not
        reachable at n_nodes = 64: re-evaluating psi'' through the dense
        differentiation matrix carries an O(n^4 * eps) rounding floor.
    initial_guess : ndarray, optional
        Nodal start values (defaults to the straight profile -lambda*y).
    check : bool
        Audit A1/A3 before solving (disable in scans that audited already).

    Returns
    -------
    LaminarFlow

    Raises
    ------
    AssumptionError, ConvergenceError, WindowEscapeError
    """
    if n_nodes < 8:
        raise ValueError("n_nodes must be at least 8")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if check:
        _require(profile, ("A1", "A3"))

    y, D = cheb.lobatto(n_nodes)
    D2 = D @ D
    psi = np.asarray(initial_guess, dtype=float).copy() if initial_guess is not None \
        else -lam * y
    psi[0], psi[-1] = lam, 0.0

    def residual(p):
        r = D2 @ p - eval_f(profile, y, p)
        return float(np.abs(r[1:-1]).max())

    res = residual(psi)
    converged = res <= tol
    for _ in range(max_iter):
        if converged:
            break
        F = D2 @ psi - eval_f(profile, y, psi)
        F[0] = psi[0] - lam
        F[-1] = psi[-1]
        J = D2 - np.diag(eval_f(profile, y, psi, 1))
        J[0, :] = 0.0
        J[0, 0] = 1.0
        J[-1, :] = 0.0
        J[-1, -1] = 1.0
        delta = np.linalg.solve(J, -F)
        psi = psi + delta
        new_res = residual(psi)
        if not np.isfinite(new_res):
            break
        res = new_res
        converged = res <= tol

    if not converged:
        psi, res, converged = _picard(profile, lam, y, psi, tol, picard_max_iter,
                                      residual)
    if not converged:
        raise ConvergenceError(
            f"laminar solve at lambda={lam} stalled with residual {res:.3e} > {tol:.3e}"
        )
    if not profile.contains_psi(psi):
        raise WindowEscapeError(
            f"psi range [{psi.min():.6g}, {psi.max():.6g}] exits audit window "
            f"{profile.psi_window}"
        )
    bound = apriori_bound(profile, lam) + 10.0 * tol
    if np.abs(psi).max() > bound:
        raise StratWaveError("a priori sup-norm bound violated; solver inconsistency")
    return LaminarFlow(float(lam), y, psi, D @ psi, res)


def _picard(profile, lam, y, psi, tol, max_iter, residual, relax=0.5):
    """Damped fixed-point iteration on the integral identity for psi_lambda."""
    w = cheb.quad_weights(len(y))
    res = residual(psi)
    for _ in range(max_iter):
        fvals = eval_f(profile, y, psi)
        F = cheb.antiderivative_values(fvals, y)      # int_{-1}^{y} f
        I2 = float(w @ F)                             # int_{-1}^{0} int_{-1}^{t} f
        G = cheb.antiderivative_values(F, y)          # int_{-1}^{y} F
        G0 = float(G[-1])
        # psi(y) = -lam*y - y*I2 - int_y^0 F  with int_y^0 F = G0 - G
        target = -lam * y - y * I2 - (G0 - G)
        psi = (1.0 - relax) * psi + relax * target
        psi[0], psi[-1] = lam, 0.0
        res = residual(psi)
        if res <= tol:
            return psi, res, True
    return psi, res, False


def dpsi_from_quadrature(profile, flow):
    """psi' reconstructed from the integral identity (cross-check of D @ psi)."""
    y = flow.grid
    w = cheb.quad_weights(len(y))
    fvals = eval_f(profile, y, flow.psi)
    F = cheb.antiderivative_values(fvals, y)
    I2 = float(w @ F)
    return -flow.lam - I2 + F


def discretization_residual(profile, flow, n_fine=512):
    """Sup of psi'' - f over a fine grid, measuring the interpolant's defect."""
    yf = np.linspace(-1.0, 0.0, n_fine)[1:-1]
    d2 = cheb.eval_interpolant(flow.psi, yf, derivative=2)
    vals = cheb.eval_interpolant(flow.psi, yf)
    return float(np.abs(d2 - eval_f(profile, yf, vals)).max())


@dataclass(frozen=True)
class SensitivityField:
    """u = d psi_lambda / d lambda with its boundary derivatives."""

    grid: np.ndarray
    u: np.ndarray
    du: np.ndarray

    @property
    def du_surface(self):
        return float(self.du[-1])

    @property
    def du_bottom(self):
        return float(self.du[0])


def laminar_sensitivity(profile, flow):
    """Solve u'' = d_psi f(y, psi_lambda) u, u(0) = 0, u(-1) = 1.

    Under A3 the solution satisfies 0 <= u <= 1 with u'(0) < 0 and
    u'(-1) < 0 (Hopf boundary-point behaviour of the comparison problem).
    """
    y, D = cheb.lobatto(len(flow.grid))
    D2 = D @ D
    A = D2 - np.diag(eval_f(profile, y, flow.psi, 1))
    A[0, :] = 0.0
    A[0, 0] = 1.0
    A[-1, :] = 0.0
    A[-1, -1] = 1.0
    rhs = np.zeros(len(y))
    rhs[0] = 1.0
    try:
        u = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:   # cannot occur under A3
        raise StratWaveError("singular sensitivity system (internal error)") from exc
    return SensitivityField(y, u, D @ u)


def find_threshold_lambda(profile, bracket, tol=1e-10, n_nodes=64):
    """Mass flux Lambda with psi'_Lambda(0) = 0, located by bisection.

    ``bracket`` = (lambda_lo, lambda_hi) must straddle the sign change:
    psi'(0) > 0 at lambda_lo and < 0 at lambda_hi (the surface value is a
    decreasing function of lambda).
    """
    check = check_assumptions(profile)
    _require(profile, ("A1", "A3"), check)

    def surface(lam):
        return solve_laminar(profile, lam, n_nodes=n_nodes, check=False).dpsi_surface

    lo, hi = float(bracket[0]), float(bracket[1])
    if lo >= hi:
        raise BracketError(f"bracket [{lo}, {hi}] is not increasing")
    s_lo, s_hi = surface(lo), surface(hi)
    if not (s_lo > 0.0 > s_hi):
        raise BracketError(
            f"bracket does not straddle the surface sign change: "
            f"psi'(0) = {s_lo:.3e} at {lo}, {s_hi:.3e} at {hi}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if surface(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _auto_threshold(profile, tol=1e-10, n_nodes=64, span=1.0, max_doublings=60):
    """Bracket Lambda automatically around 0 and bisect."""
    def surface(lam):
        return solve_laminar(profile, lam, n_nodes=n_nodes, check=False).dpsi_surface

    lo, hi = -span, span
    for _ in range(max_doublings):
        if surface(lo) > 0.0:
            break
        lo *= 2.0
    else:
        raise BracketError("could not bracket Lambda from below")
    for _ in range(max_doublings):
        if surface(hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise BracketError("could not bracket Lambda from above")
    return find_threshold_lambda(profile, (lo, hi), tol=tol, n_nodes=n_nodes)


def find_lambda_minus(profile, tol=1e-10, n_nodes=64, search_floor=None,
                      lambda_threshold=None):
    """Largest lambda <= Lambda with psi' >= 0 throughout and g rho(0) <= psi'(0)^2.

    Both conditions are monotone in lambda (the sensitivity u has u' < 0
    everywhere), so the supremum is found by bisection.  Smaller fluxes
    also satisfy the conditions; this returns the least restrictive value.

    Raises
    ------
    BracketError
        If no admissible lambda is found above ``search_floor``
        (default: Lambda - 2^16).
    """
    check = check_assumptions(profile)
    _require(profile, ("A1", "A3"), check)
    Lam = lambda_threshold if lambda_threshold is not None \
        else _auto_threshold(profile, tol=tol, n_nodes=n_nodes)
    if search_floor is None:
        search_floor = Lam - 2.0 ** 16
    target = profile.g * float(profile.rho(0.0))

    def admissible(lam):
        flow = solve_laminar(profile, lam, n_nodes=n_nodes, check=False)
        return (float(flow.dpsi.min()) >= -1e-13
                and flow.dpsi_surface ** 2 >= target - 1e-13)

    step = 1.0
    lo = Lam - step
    while not admissible(lo):
        step *= 2.0
        lo = Lam - step
        if lo < search_floor:
            raise BracketError(
                f"no admissible lambda above the search floor {search_floor}"
            )
    hi = Lam                       # admissible(hi) is False whenever g rho(0) > 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def laminar_to_csv(flow, path):
    """Write (y, psi, dpsi) rows; lambda and residual go in a comment line."""
    with open(path, "w") as fh:
        fh.write(f"# lambda={flow.lam:.17g} residual_inf={flow.residual_inf:.17g}\n")
        fh.write("y,psi,dpsi\n")
        for yv, pv, dv in zip(flow.grid, flow.psi, flow.dpsi):
            fh.write(f"{yv:.17g},{pv:.17g},{dv:.17g}\n")
