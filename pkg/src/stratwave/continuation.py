"""Amplitude-parameterised continuation of small wave branches.

Each branch starts at a laminar flow whose multiplier mu_m vanishes (in the
surface-tension coefficient or in the mass flux) and follows the family

    eta(s) = -s cos(mkx) + O(s^2),    parameter(s) = parameter(0) + O(s),

by Newton correction of the coupled system: the flattened field equations,
the cosine projections of the wave residual Psi, and the exact amplitude
constraint a_m = -s.  The parameter (sigma or lambda) is an unknown of the
corrector, as in a standard one-parameter bordered system; the amplitude
replaces arclength because the target asymptotics are stated in amplitude.
"""

import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.linalg
import scipy.linalg.lapack as lapack

from .dispersion import (default_search_floor, lambda_star, sigma_star,
                         solve_mode_bvp, symbol_mu)
from .elliptic import (SurfaceShape, FlattenedField, WaveGrid, assemble_A0,
                       apply_A0, curvature_term, evaluate_Psi, get_grid,
                       operator_matrix, _trace_b_half)
from .errors import BifurcationError, ConvergenceError, StratWaveError
from .laminar import _require, find_lambda_minus, solve_laminar
from .profiles import check_assumptions, eval_f


@dataclass(frozen=True)
class BranchPoint:
    s: float
    parameter: float
    shape: SurfaceShape
    field: FlattenedField
    residual_inf: float           # sup of the wave residual Psi at this point


@dataclass
class BranchCurve:
    m: int
    k: int
    bifurcation_parameter: str    # "sigma" or "lambda"
    points: list
    truncated: bool = False
    messages: list = dataclass_field(default_factory=list)

    @property
    def parameters(self):
        return np.array([p.parameter for p in self.points])

    @property
    def amplitudes(self):
        return np.array([p.s for p in self.points])


def _lu_with_rcond(J):
    lu, piv, info = lapack.dgetrf(J)
    if info != 0:
        raise np.linalg.LinAlgError("augmented Jacobian is singular")
    anorm = np.abs(J).sum(axis=0).max()
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    return lu, piv, float(rcond)


class _BranchSystem:
    """Coupled residual/Jacobian for one (m, k) branch on a WaveGrid."""

    def __init__(self, profile, grid, m, which, fixed_value):
        self.profile = profile
        self.grid = grid
        self.m = m
        self.which = which              # "sigma" or "lambda"
        self.fixed = fixed_value        # lambda for sigma-branches and vice versa
        self.nf = (grid.M + 1) * grid.ny
        self.n = self.nf + grid.M + 1
        self.rho0 = float(profile.rho(0.0))

    def split(self, z):
        g = self.grid
        psi = z[: self.nf].reshape(g.M + 1, g.ny)
        a = z[self.nf: self.nf + g.M]
        p = z[-1]
        return psi, a, p

    def _sigma_lambda(self, p):
        if self.which == "sigma":
            return p, self.fixed
        return self.fixed, p

    def _field_residual(self, a, psi, lam):
        g = self.grid
        shape = SurfaceShape(g.k, a)
        coeffs = assemble_A0(shape, g)
        eta = shape.eval(g.x)
        Y = g.y[None, :]
        yphys = (1.0 + Y) * eta[:, None] + Y
        r = apply_A0(coeffs, g, psi) - eval_f(self.profile, yphys, psi)
        r[:, 0] = psi[:, 0] - lam
        r[:, -1] = psi[:, -1]
        return r, coeffs, yphys, shape

    def _surface_residual(self, a, psi, sigma):
        """Cosine projections 1..M of B - sigma*curvature + g rho(0) eta."""
        g = self.grid
        shape = SurfaceShape(g.k, a)
        vals = (_trace_b_half(shape, g, psi)
                - sigma * curvature_term(shape, g.x)
                + self.profile.g * self.rho0 * shape.eval(g.x))
        return (g.analysis @ vals)[1:]

    def residual(self, z, s):
        psi, a, p = self.split(z)
        sigma, lam = self._sigma_lambda(p)
        rf, _, _, _ = self._field_residual(a, psi, lam)
        rp = self._surface_residual(a, psi, sigma)
        return np.concatenate([rf.ravel(), rp, [a[self.m - 1] + s]])

    def jacobian(self, z):
        g = self.grid
        psi, a, p = self.split(z)
        sigma, lam = self._sigma_lambda(p)
        rf0, coeffs, yphys, shape = self._field_residual(a, psi, lam)
        rp0 = self._surface_residual(a, psi, sigma)

        J = np.zeros((self.n, self.n))
        # field block: transformed operator minus the forcing linearisation
        Jff = operator_matrix(coeffs, g)
        idx = np.arange(self.nf)
        Jff[idx, idx] -= eval_f(self.profile, yphys, psi, 1).ravel()
        for i in range(g.M + 1):
            rb = i * g.ny
            rt = rb + g.ny - 1
            Jff[rb, :] = 0.0
            Jff[rb, rb] = 1.0
            Jff[rt, :] = 0.0
            Jff[rt, rt] = 1.0
        J[: self.nf, : self.nf] = Jff

        # surface rows w.r.t. the field: analytic trace derivatives
        eta = shape.eval(g.x)
        deta = shape.eval(g.x, 1)
        t1 = g.Dx @ psi[:, -1]
        t2 = psi @ g.Dy[-1, :]
        r = deta / (1.0 + eta)
        dB_dt1 = t1 - r * t2
        dB_dt2 = -r * t1 + (1.0 + deta ** 2) / (1.0 + eta) ** 2 * t2
        dB = np.zeros((g.M + 1, self.nf))
        top = g.ny - 1
        for i in range(g.M + 1):
            dB[:, i * g.ny + top] += dB_dt1 * g.Dx[:, i]
            dB[i, i * g.ny: (i + 1) * g.ny] += dB_dt2[i] * g.Dy[-1, :]
        J[self.nf: self.nf + g.M, : self.nf] = g.analysis[1:] @ dB

        # shape columns by forward differences (coefficients are explicit in a)
        h = 1e-7
        for j in range(g.M):
            aj = a.copy()
            aj[j] += h
            rfj, _, _, _ = self._field_residual(aj, psi, lam)
            rpj = self._surface_residual(aj, psi, sigma)
            J[: self.nf, self.nf + j] = (rfj - rf0).ravel() / h
            J[self.nf: self.nf + g.M, self.nf + j] = (rpj - rp0) / h

        # parameter column
        if self.which == "sigma":
            J[self.nf: self.nf + g.M, -1] = \
                -(g.analysis @ curvature_term(shape, g.x))[1:]
        else:
            for i in range(g.M + 1):
                J[i * g.ny, -1] = -1.0      # bottom rows read psi - lambda

        # amplitude constraint
        J[-1, self.nf + self.m - 1] = 1.0
        return J

    def norms(self, res):
        g = self.grid
        rf = res[: self.nf].reshape(g.M + 1, g.ny)
        return (float(np.abs(rf[:, 1:-1]).max()),
                float(np.abs(res[self.nf:]).max()))


def _newton_correct(system, z, s, field_stop, proj_stop, max_iter=15,
                    rcond_floor=1e-13):
    """Correct z at fixed amplitude s; raises on stall or near-singularity."""
    res = system.residual(z, s)
    best = float(np.abs(res).max())
    for _ in range(max_iter):
        f_norm, p_norm = system.norms(res)
        if f_norm <= field_stop and p_norm <= proj_stop:
            return z
        J = system.jacobian(z)
        lu, piv, rcond = _lu_with_rcond(J)
        if rcond < rcond_floor:
            raise np.linalg.LinAlgError(
                f"augmented Jacobian nearly singular (rcond = {rcond:.2e})"
            )
        step = lapack.dgetrs(lu, piv, -res)[0]
        # halve the step while it genuinely diverges
        for _ in range(5):
            z_try = z + step
            res_try = system.residual(z_try, s)
            norm_try = float(np.abs(res_try).max())
            if np.isfinite(norm_try) and norm_try <= 1.2 * best + 1e-12:
                break
            step = 0.5 * step
        z, res = z_try, res_try
        best = min(best, norm_try)
    f_norm, p_norm = system.norms(res)
    if f_norm <= field_stop and p_norm <= proj_stop:
        return z
    raise ConvergenceError(
        f"branch Newton stalled at s={s:.3e}: field {f_norm:.2e}, "
        f"surface {p_norm:.2e}"
    )


def _branch_point(system, profile, z, s, tol):
    g = system.grid
    psi, a, p = system.split(z)
    a = a.copy()
    a[system.m - 1] = -s                              # constraint holds exactly
    shape = SurfaceShape(g.k, a)
    sigma, lam = system._sigma_lambda(p)
    rf, _, _, _ = system._field_residual(a, psi, lam)
    field = FlattenedField(g.nx, g.ny, g.reflect(psi, 1), float(lam),
                           float(np.abs(rf[:, 1:-1]).max()))
    ev = evaluate_Psi(profile, sigma, lam, shape, g, field=field, check=False)
    res = float(np.abs(ev.values).max())
    if res > tol:
        raise ConvergenceError(
            f"accepted point at s={s:.3e} has wave residual {res:.2e} > {tol:.2e}"
        )
    return BranchPoint(float(s), float(p), shape, field, res)


def _kernel_simplicity(profile, flow, m, k, sigma_at, kernel_tol=1e-8):
    """mu_j must stay away from zero for j != m up to 3m."""
    for j in range(1, 3 * m + 1):
        if j == m:
            continue
        mu = symbol_mu(profile, flow, j, k, sigma_at)
        scale = sigma_at * (j * k) ** 2 + profile.g * float(profile.rho(0.0))
        if abs(mu) <= kernel_tol * scale:
            raise BifurcationError(
                f"kernel not simple: mu_{j} = {mu:.3e} at the mode-{m} "
                "bifurcation point"
            )


def _trace_branch(profile, which, fixed_value, start_param, flow, m, k,
                  s_max, n_steps, tol, grid):
    system = _BranchSystem(profile, grid, m, which, fixed_value)
    field_stop = max(10.0 * tol, 5e-9)
    proj_stop = min(0.1 * tol, 1e-10)

    z = np.zeros(system.n)
    z[: system.nf] = np.tile(flow.psi, (grid.M + 1, 1)).ravel()
    z[-1] = start_param
    curve = BranchCurve(m, k, which, [])
    curve.points.append(_branch_point(system, profile, z, 0.0, tol))

    history = [(0.0, z)]                    # accepted (s, state) pairs
    for i in range(1, n_steps + 1):
        s = i * s_max / n_steps
        s_prev, z_prev = history[-1]
        if len(history) >= 2:
            s_pp, z_pp = history[-2]
            ratio = (s - s_prev) / (s_prev - s_pp)
            z_pred = z_prev + ratio * (z_prev - z_pp)
        else:
            z_pred = z_prev.copy()
        z_pred[system.nf + m - 1] = -s
        try:
            z_new = _advance(system, profile, z_prev, z_pred, s_prev, s,
                             field_stop, proj_stop, depth=0)
            point = _branch_point(system, profile, z_new, s, tol)
        except (ConvergenceError, np.linalg.LinAlgError) as exc:
            curve.truncated = True
            curve.messages.append(f"truncated at s={s:.6g}: {exc}")
            break
        curve.points.append(point)
        history.append((s, z_new))
    return curve


def _advance(system, profile, z_from, z_pred, s_from, s_to, field_stop,
             proj_stop, depth):
    """Newton toward s_to, bisecting the amplitude step on failure."""
    try:
        return _newton_correct(system, z_pred, s_to, field_stop, proj_stop)
    except (ConvergenceError, np.linalg.LinAlgError):
        if depth >= 5:
            raise
    s_mid = 0.5 * (s_from + s_to)
    z_half = z_from.copy()
    z_half[system.nf + system.m - 1] = -s_mid
    z_mid = _advance(system, profile, z_from, z_half, s_from, s_mid,
                     field_stop, proj_stop, depth + 1)
    z_pred2 = z_mid.copy()
    z_pred2[system.nf + system.m - 1] = -s_to
    return _advance(system, profile, z_mid, z_pred2, s_mid, s_to,
                    field_stop, proj_stop, depth + 1)


def branch_from_sigma(profile, lam, m, k, s_max=0.05, n_steps=25, tol=1e-9,
                      nx=64, ny=48, check=True):
    """Trace the surface-tension branch of mode m from its bifurcation value.

    Requires lambda at or below the admissible flux threshold (so the
    bifurcation values are positive and the kernel is one-dimensional).

    Returns
    -------
    BranchCurve
        Points at s_j = j s_max/n_steps; ``truncated`` is set if Newton gave
        up early, with the reason in ``messages``.
    """
    if s_max <= 0.0 or n_steps < 1:
        raise ValueError("need s_max > 0 and n_steps >= 1")
    if check:
        _require(profile, ("A1", "A3", "A4"))
        lam_minus = find_lambda_minus(profile)
        if lam > lam_minus + 1e-9:
            raise BifurcationError(
                f"lambda = {lam} exceeds Lambda_- = {lam_minus:.10g}; "
                "sigma-branches need lambda <= Lambda_-"
            )
    grid = get_grid(k, nx, ny)
    flow = solve_laminar(profile, lam, n_nodes=ny, check=False)
    sig0 = sigma_star(profile, flow, m, k)
    if check:
        _kernel_simplicity(profile, flow, m, k, sig0)
    return _trace_branch(profile, "sigma", lam, sig0, flow, m, k,
                         s_max, n_steps, tol, grid)


def branch_from_lambda(profile, sigma, m, k, s_max=0.05, n_steps=25, tol=1e-9,
                       nx=64, ny=48, search_floor=None, check=True):
    """Trace the mass-flux branch of mode m from lambda_star(sigma, m, k).

    The root location includes the positive-slope verification; the branch
    additionally requires the root to lie below Lambda_- (the role played by
    the minimal wavenumber in the underlying theory).
    """
    if s_max <= 0.0 or n_steps < 1:
        raise ValueError("need s_max > 0 and n_steps >= 1")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if check:
        _require(profile, ("A1", "A3", "A4", "B1", "B2", "B3"))
    lam_minus = find_lambda_minus(profile)
    if search_floor is None:
        search_floor = default_search_floor(profile, sigma, m, k, lam_minus)
    star = lambda_star(profile, sigma, m, k, search_floor, check=False)
    if star.value > lam_minus + 1e-9:
        raise BifurcationError(
            f"lambda_star = {star.value:.10g} lies above Lambda_- = "
            f"{lam_minus:.10g}; increase k (the empirical minimal wavenumber)"
        )
    if star.multiple_roots:
        warnings.warn(
            f"mu_{m}(sigma, .) changed sign {star.n_sign_changes} times in the "
            "scan; using the lowest root", RuntimeWarning, stacklevel=2,
        )
    grid = get_grid(k, nx, ny)
    flow = solve_laminar(profile, star.value, n_nodes=ny, check=False)
    if check:
        _kernel_simplicity(profile, flow, m, k, sigma)
    return _trace_branch(profile, "lambda", sigma, star.value, flow, m, k,
                         s_max, n_steps, tol, grid)


@dataclass(frozen=True)
class PhysicalSolution:
    """Physical-domain fields mapped back from a flattened solution.

    Velocities are relative to the wave frame: only u - c is recoverable
    from the pseudo-streamfunction, and the pressure is reported as P - P0.
    """

    x: np.ndarray                 # full period abscissas
    eta: np.ndarray
    y_phys: np.ndarray            # (nx, ny) physical ordinates
    psi: np.ndarray
    u_rel: np.ndarray             # (u - c) = psi_Y / sqrt(rho)
    v: np.ndarray                 # -psi_X / sqrt(rho)
    pressure: np.ndarray          # P - P0
    density: np.ndarray
    grad_norm: np.ndarray
    stagnation: np.ndarray        # candidate cells: |grad psi| <= tol * max
    q: float


def reconstruct_physical(profile, shape, field, stagnation_tol=1e-6):
    """Map a flattened field back to the fluid domain and derive the flow."""
    from .errors import ProfileError

    grid = get_grid(shape.k, field.nx, field.ny)
    psi = grid.restrict(field.values)
    eta = shape.eval(grid.x)
    deta = shape.eval(grid.x, 1)
    Y = grid.y[None, :]
    yphys = (1.0 + Y) * eta[:, None] + Y
    psi1 = grid.Dx @ psi                          # odd in x
    psi2 = psi @ grid.Dy.T                        # even in x
    psi_X = psi1 - psi2 * (1.0 + Y) * deta[:, None] / (1.0 + eta[:, None])
    psi_Y = psi2 / (1.0 + eta[:, None])
    rho = profile.rho(-psi)
    if np.min(rho) <= 0.0:
        raise ProfileError(
            f"density nonpositive on the realised psi range (min rho = "
            f"{float(np.min(rho)):.6g})"
        )
    sqrho = np.sqrt(rho)
    grad = np.hypot(psi_X, psi_Y)
    q = grid.mean_x(_trace_b_half(shape, grid, psi))
    pressure = (q - profile.beta_antiderivative(-psi)
                - 0.5 * grad ** 2 - profile.g * rho * yphys)
    stag = grad <= stagnation_tol * float(grad.max())
    even = lambda v: grid.reflect(v, 1)
    odd = lambda v: grid.reflect(v, -1)
    return PhysicalSolution(
        x=grid.x_full,
        eta=even(eta),
        y_phys=even(yphys),
        psi=field.values,
        u_rel=even(psi_Y / sqrho),
        v=odd(-psi_X / sqrho),
        pressure=even(pressure),
        density=even(rho),
        grad_norm=even(grad),
        stagnation=even(stag.astype(bool)),
        q=float(q),
    )


@dataclass(frozen=True)
class ValidationReport:
    """Residuals of the full free-surface system for one solution."""

    interior_residual: float
    boundary_top: float
    boundary_bottom: float
    bernoulli_residual: float
    volume_defect: float
    symmetry_defect_eta: float
    symmetry_defect_field: float
    q: float

    @property
    def max_residual(self):
        return max(self.interior_residual, self.boundary_top,
                   self.boundary_bottom, self.bernoulli_residual,
                   self.volume_defect, self.symmetry_defect_eta,
                   self.symmetry_defect_field)

    def to_dict(self):
        return {
            "interior_residual": self.interior_residual,
            "boundary_top": self.boundary_top,
            "boundary_bottom": self.boundary_bottom,
            "bernoulli_residual": self.bernoulli_residual,
            "volume_defect": self.volume_defect,
            "symmetry_defect_eta": self.symmetry_defect_eta,
            "symmetry_defect_field": self.symmetry_defect_field,
            "q": self.q,
            "max_residual": self.max_residual,
        }


def validate_solution(profile, sigma, lam, shape, field):
    """Re-evaluate every governing residual of the solution (report only)."""
    grid = get_grid(shape.k, field.nx, field.ny)
    psi = grid.restrict(field.values)
    coeffs = assemble_A0(shape, grid)
    eta = shape.eval(grid.x)
    Y = grid.y[None, :]
    yphys = (1.0 + Y) * eta[:, None] + Y
    interior = apply_A0(coeffs, grid, psi) - eval_f(profile, yphys, psi)
    b = _trace_b_half(shape, grid, psi)
    qv = grid.mean_x(b)
    bern = (b - sigma * curvature_term(shape, grid.x)
            + profile.g * float(profile.rho(0.0)) * eta - qv)
    vals = field.values
    mirrored = np.empty_like(vals)
    mirrored[0] = vals[0]
    mirrored[1:] = vals[:0:-1]
    eta_full = shape.eval(2.0 * np.pi * np.arange(field.nx) / (shape.k * field.nx))
    eta_mirrored = np.empty_like(eta_full)
    eta_mirrored[0] = eta_full[0]
    eta_mirrored[1:] = eta_full[:0:-1]
    return ValidationReport(
        interior_residual=float(np.abs(interior[:, 1:-1]).max()),
        boundary_top=float(np.abs(psi[:, -1]).max()),
        boundary_bottom=float(np.abs(psi[:, 0] - lam).max()),
        bernoulli_residual=float(np.abs(bern).max()),
        volume_defect=abs(grid.mean_x(eta)),
        symmetry_defect_eta=float(np.abs(eta_full - eta_mirrored).max()),
        symmetry_defect_field=float(np.abs(vals - mirrored).max()),
        q=float(qv),
    )


def branch_to_json(curve, path):
    import json

    doc = {
        "m": curve.m,
        "k": curve.k,
        "bifurcation_parameter": curve.bifurcation_parameter,
        "truncated": curve.truncated,
        "messages": curve.messages,
        "points": [
            {
                "s": p.s,
                "parameter": p.parameter,
                "eta_coeffs": list(p.shape.coeffs),
                "residual": p.residual_inf,
            }
            for p in curve.points
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
