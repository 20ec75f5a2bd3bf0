"""Linearised mode problems, multiplier symbols, and bifurcation values.

For each transverse mode m the linearisation of the free-surface residual
around a laminar flow reduces to the two-point problem

    w'' - ((mk)^2 + d_psi f(y, psi_lambda)) w = b_m,   w(0) = w(-1) = 0,
    b_m = 2 f + g (1+y) rho'(-psi_lambda) - (mk)^2 (1+y) psi_lambda',

and the multiplier acting on cos(mkx) is

    mu_m(sigma, lambda) = sigma (mk)^2 + g rho(0) - psi'(0)^2 + psi'(0) w_m'(0).

Zeros of mu_m in sigma give the surface-tension bifurcation values; the
lowest zero in lambda below the surface-stagnation threshold gives the
mass-flux bifurcation values.
"""

from dataclasses import dataclass

import numpy as np

from . import cheb
from .errors import (BifurcationError, BracketError, StratWaveError,
                     WindowEscapeError)
from .laminar import (_auto_threshold, _require, find_lambda_minus, solve_laminar)
from .profiles import check_assumptions, eval_f


@dataclass
class ModeRecord:
    """Per-mode linearisation data."""

    m: int
    k: int
    w: np.ndarray
    dw0: float
    mu: float | None = None
    sigma_star: float | None = None
    lambda_star: float | None = None

    def to_dict(self):
        return {
            "m": self.m,
            "k": self.k,
            "dw0": self.dw0,
            "mu": self.mu,
            "sigma_star": self.sigma_star,
            "lambda_star": self.lambda_star,
        }


def mode_forcing(profile, flow, m, k):
    """The forcing b_m on the flow's grid."""
    y = flow.grid
    mk2 = float(m * k) ** 2
    return (2.0 * eval_f(profile, y, flow.psi)
            + profile.g * (1.0 + y) * profile.drho(-flow.psi)
            - mk2 * (1.0 + y) * flow.dpsi)


def solve_mode_bvp(profile, flow, m, k):
    """Solve the mode problem on the laminar grid; returns a ModeRecord."""
    if m < 1 or k < 1:
        raise ValueError("mode index m and wavenumber k must be >= 1")
    y, D = cheb.lobatto(len(flow.grid))
    D2 = D @ D
    mk2 = float(m * k) ** 2
    A = D2 - np.diag(mk2 + eval_f(profile, y, flow.psi, 1))
    A[0, :] = 0.0
    A[0, 0] = 1.0
    A[-1, :] = 0.0
    A[-1, -1] = 1.0
    rhs = mode_forcing(profile, flow, m, k)
    rhs[0] = 0.0
    rhs[-1] = 0.0
    try:
        w = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:    # excluded by A3 and (mk)^2 > 0
        raise StratWaveError("singular mode system (internal error)") from exc
    return ModeRecord(int(m), int(k), w, float((D @ w)[-1]))


def symbol_mu(profile, flow, m, k, sigma, mode=None):
    """Multiplier mu_m(sigma, lambda) for the given laminar flow."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    rec = mode if mode is not None else solve_mode_bvp(profile, flow, m, k)
    ds = flow.dpsi_surface
    mu = (sigma * (m * k) ** 2 + profile.g * float(profile.rho(0.0))
          - ds ** 2 + ds * rec.dw0)
    rec.mu = float(mu)
    return float(mu)


def sigma_star(profile, flow, m, k, mode=None):
    """Surface-tension value where mu_m vanishes; must be positive.

    Positivity holds whenever lambda <= Lambda_-; a nonpositive result
    signals that the flow is outside that regime (or an assumption failed).
    """
    rec = mode if mode is not None else solve_mode_bvp(profile, flow, m, k)
    ds = flow.dpsi_surface
    val = -(profile.g * float(profile.rho(0.0)) - ds ** 2 + ds * rec.dw0) \
        / float(m * k) ** 2
    if val <= 0.0:
        raise BifurcationError(
            f"sigma_star = {val:.6g} <= 0 for m={m}: lambda={flow.lam} is above "
            "the admissible flux range (or an assumption fails)"
        )
    rec.sigma_star = float(val)
    return float(val)


def _lowest_sign_change(xs, vals):
    """Index i of the bracket [xs[i+1], xs[i]] with the most-negative x, plus count.

    ``xs`` is scanned in decreasing order; a bracket is a consecutive pair
    with a sign change (an exact zero counts with its left neighbour).
    """
    idx = None
    count = 0
    for i in range(len(xs) - 1):
        a, b = vals[i], vals[i + 1]
        if a * b < 0.0 or (a != 0.0 and b == 0.0):
            idx = i
            count += 1
    return idx, count


@dataclass(frozen=True)
class LambdaStarResult:
    """Root of mu_m(sigma, .) with diagnostics of the scan that located it."""

    value: float
    slope: float               # centered-difference d mu / d lambda at the root
    n_sign_changes: int        # brackets seen while scanning; > 1 is flagged
    lambda_threshold: float
    search_floor: float

    @property
    def multiple_roots(self):
        return self.n_sign_changes > 1


def lambda_star(profile, sigma, m, k, search_floor, tol=1e-10, n_nodes=64,
                n_scan=2048, flow_cache=None, lambda_threshold=None, check=True):
    """Lowest zero of mu_m(sigma, .) above ``search_floor``.

    Scans lambda downward from the surface-stagnation threshold Lambda on a
    uniform grid of ``n_scan`` steps, takes the lowest sign-change bracket
    (matching the min-root definition), bisects to |mu_m| <= tol * sigma (mk)^2,
    and verifies by centered difference (h = 1e-5) that mu_m increases in
    lambda at the root.

    Returns
    -------
    LambdaStarResult

    Raises
    ------
    BracketError
        No sign change above the floor (the root lies below it).
    BifurcationError
        The slope check fails, flagging an assumption breakdown.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if check:
        _require(profile, ("A1", "A3", "A4", "B1", "B2", "B3"))
    cache = flow_cache if flow_cache is not None else {}

    def flow_at(lam):
        if lam not in cache:
            cache[lam] = solve_laminar(profile, lam, n_nodes=n_nodes, check=False)
        return cache[lam]

    def mu_at(lam):
        return symbol_mu(profile, flow_at(lam), m, k, sigma)

    Lam = lambda_threshold if lambda_threshold is not None \
        else _auto_threshold(profile, n_nodes=n_nodes)
    if search_floor >= Lam:
        raise ValueError("search_floor must lie below the threshold Lambda")
    lams_all = np.linspace(Lam, search_floor, n_scan + 1)
    vals = []
    truncated = False
    for l in lams_all:
        try:
            vals.append(mu_at(l))
        except WindowEscapeError:
            truncated = True          # deeper fluxes leave the audit window
            break
    lams = lams_all[: len(vals)]
    vals = np.array(vals)
    if len(vals) < 2:
        raise BracketError(
            "audit window too small to scan below the threshold Lambda; "
            "widen profile.psi_window"
        )
    idx, n_changes = _lowest_sign_change(lams, vals)
    if idx is None:
        reach = f"the audit window edge (lambda = {lams[-1]:.6g})" if truncated \
            else f"the search floor {search_floor}"
        raise BracketError(
            f"mu_{m} has no sign change above {reach}; the root lies below it"
        )
    hi, lo = lams[idx], lams[idx + 1]          # hi > lo, mu changes sign between
    mu_hi = vals[idx]
    scale = sigma * float(m * k) ** 2
    root = 0.5 * (hi + lo)
    for _ in range(200):
        root = 0.5 * (hi + lo)
        mu_mid = mu_at(root)
        if abs(mu_mid) <= tol * scale:
            break
        if (mu_mid > 0.0) == (mu_hi > 0.0):
            hi = root
        else:
            lo = root
        if hi - lo < 1e-16 * max(1.0, abs(Lam - search_floor)):
            break
    else:
        raise BracketError(f"bisection for lambda_star of mode {m} did not settle")
    h = 1e-5
    slope = (mu_at(root + h) - mu_at(root - h)) / (2.0 * h)
    if slope <= 0.0:
        raise BifurcationError(
            f"d mu_{m}/d lambda = {slope:.3e} <= 0 at the located root "
            f"{root:.10g}: assumption breakdown"
        )
    return LambdaStarResult(float(root), float(slope), n_changes, float(Lam),
                            float(search_floor))


@dataclass(frozen=True)
class MonotonicityReport:
    """Result of the mode-family monotonicity and decay audit."""

    ratios: np.ndarray          # w_m'(0)/(mk)^2 for m = 1..m_max
    sup_forcing: float          # sup over m of the normalised forcing B_m
    degenerate: bool            # all ratios vanish (zero forcing)
    strictly_increasing: bool
    all_negative: bool
    bound_ok: bool


def verify_symbol_monotonicity(profile, flow, k, m_max, zero_tol=1e-13):
    """Check that (w_m'(0)/(mk)^2) is increasing, negative, and decays.

    The decay bound is |w_m'(0)/(mk)^2| <= sup_m ||B_m|| * cosh(mk)/(mk sinh(mk))
    with B_m = (d_psi f * w_m + b_m)/(mk)^2, from the explicit sinh kernel of
    the normalised mode problem.

    Raises
    ------
    BifurcationError
        On a strict-monotonicity violation (the offending m is reported);
        the all-zero degenerate family is reported, not raised.
    """
    ratios = np.empty(m_max)
    sup_B = 0.0
    recs = []
    for m in range(1, m_max + 1):
        rec = solve_mode_bvp(profile, flow, m, k)
        recs.append(rec)
        mk2 = float(m * k) ** 2
        ratios[m - 1] = rec.dw0 / mk2
        Bm = (eval_f(profile, flow.grid, flow.psi, 1) * rec.w
              + mode_forcing(profile, flow, m, k)) / mk2
        sup_B = max(sup_B, float(np.abs(Bm).max()))
    degenerate = bool(np.abs(ratios).max() <= zero_tol)
    if degenerate:
        return MonotonicityReport(ratios, sup_B, True, False, False, True)
    diffs = np.diff(ratios)
    if np.any(diffs <= 0.0):
        bad = int(np.argmax(diffs <= 0.0)) + 2
        raise BifurcationError(
            f"w_m'(0)/(mk)^2 fails to increase at m = {bad}"
        )
    mk = k * np.arange(1, m_max + 1, dtype=float)
    bound = sup_B * np.cosh(mk) / (mk * np.sinh(mk))
    bound_ok = bool(np.all(np.abs(ratios) <= bound + 1e-12))
    return MonotonicityReport(ratios, sup_B, False, True,
                              bool(np.all(ratios < 0.0)), bound_ok)


def default_search_floor(profile, sigma, m, k, lam_minus):
    """Heuristic scan floor: twice the dispersion-scale estimate below Lambda_-.

    The root of mu_m sits near -sqrt((sigma (mk)^2 + g rho(0)) tanh(mk)/(mk));
    scans that would leave the audit window are truncated at its edge anyway.
    """
    mk = m * k
    scale = np.sqrt((sigma * mk ** 2 + profile.g * float(profile.rho(0.0)))
                    * np.tanh(mk) / mk)
    return lam_minus - 2.0 * (1.0 + scale)


def find_min_wavenumber(profile, sigma, m_max, k_start=1, k_max=32,
                        n_nodes=64, tol=1e-10):
    """Empirical minimal k such that lambda_star(m) <= Lambda_- for m <= m_max."""
    _require(profile, ("A1", "A3", "A4", "B1", "B2", "B3"))
    Lam = _auto_threshold(profile, n_nodes=n_nodes)
    lam_minus = find_lambda_minus(profile, n_nodes=n_nodes, lambda_threshold=Lam)
    cache = {}
    for k in range(k_start, k_max + 1):
        ok = True
        for m in range(1, m_max + 1):
            floor = default_search_floor(profile, sigma, m, k, lam_minus)
            try:
                res = lambda_star(profile, sigma, m, k, floor, tol=tol,
                                  n_nodes=n_nodes, flow_cache=cache,
                                  lambda_threshold=Lam, check=False)
            except (BracketError, BifurcationError):
                ok = False
                break
            if res.value > lam_minus:
                ok = False
                break
        if ok:
            return k
    raise BracketError(f"no k <= {k_max} brings every lambda_star below Lambda_-")


def modes_to_json(records, path):
    import json

    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=2)
        fh.write("\n")


def modes_to_csv(records, path):
    def fmt(v):
        return "" if v is None else f"{v:.17g}"

    with open(path, "w") as fh:
        fh.write("m,k,dw0,mu,sigma_star,lambda_star\n")
        for r in records:
            fh.write(f"{r.m},{r.k},{fmt(r.dw0)},{fmt(r.mu)},"
                     f"{fmt(r.sigma_star)},{fmt(r.lambda_star)}\n")
