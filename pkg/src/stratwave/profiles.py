"""Stratification data: streamline density rho(p), Bernoulli function beta(p).

Both are polynomials in the streamline label p (coefficients in ascending
power order), so the forcing

    f(y, psi) = g * y * rho'(-psi) + beta(-psi)

and its psi-derivatives are evaluated exactly.  The standing assumptions of
the underlying stratified-wave model are audited on a bounded psi-window
rather than the half line; every downstream solver checks at run time that
its computed psi stays inside that window.
"""

import json
from dataclasses import dataclass, field

import numpy as np
import numpy.polynomial.polynomial as npoly


def _poly_extrema(coeffs, lo, hi):
    """Values of a polynomial at its critical points and endpoints in [lo, hi]."""
    coeffs = np.asarray(coeffs, dtype=float)
    pts = [lo, hi]
    der = npoly.polyder(coeffs)
    if len(der) > 1 or (len(der) == 1 and der[0] != 0.0):
        if len(der) > 1:
            roots = npoly.polyroots(der)
            for r in roots:
                if abs(r.imag) < 1e-12 and lo <= r.real <= hi:
                    pts.append(r.real)
    vals = npoly.polyval(np.array(pts), coeffs)
    return np.asarray(vals)


def poly_max_abs(coeffs, lo, hi):
    """Exact sup of |polynomial| on the interval [lo, hi]."""
    return float(np.abs(_poly_extrema(coeffs, lo, hi)).max())


def poly_min(coeffs, lo, hi):
    """Exact min of a polynomial on [lo, hi]."""
    return float(_poly_extrema(coeffs, lo, hi).min())


@dataclass(frozen=True)
class StratificationProfile:
    """Polynomial streamline density and Bernoulli function with gravity g.

    Attributes
    ----------
    rho_coeffs, beta_coeffs : ndarray
        Ascending polynomial coefficients of rho(p) and beta(p).
    g : float
        Gravitational acceleration, > 0.
    psi_window : (float, float)
        Closed psi-interval on which the assumptions are audited and inside
        which every computed psi must stay.
    """

    rho_coeffs: np.ndarray
    beta_coeffs: np.ndarray
    g: float
    psi_window: tuple

    def rho(self, p):
        return npoly.polyval(p, self.rho_coeffs)

    def drho(self, p, order=1):
        return npoly.polyval(p, npoly.polyder(self.rho_coeffs, order))

    def beta(self, p, order=0):
        c = self.beta_coeffs if order == 0 else npoly.polyder(self.beta_coeffs, order)
        return npoly.polyval(p, c)

    def beta_antiderivative(self, p):
        """Integral of beta from 0 to p (exact; used for the pressure head)."""
        c = npoly.polyint(self.beta_coeffs)
        return npoly.polyval(p, c) - npoly.polyval(0.0, c)

    @property
    def p_range(self):
        """Range of the streamline label p = -psi over the audit window."""
        lo, hi = self.psi_window
        return (-hi, -lo)

    def sup_abs_drho(self):
        plo, phi = self.p_range
        return poly_max_abs(npoly.polyder(self.rho_coeffs), plo, phi)

    def sup_abs_beta(self):
        plo, phi = self.p_range
        return poly_max_abs(self.beta_coeffs, plo, phi)

    def contains_psi(self, psi, rtol=1e-9):
        lo, hi = self.psi_window
        slack = rtol * max(1.0, abs(lo), abs(hi))
        psi = np.asarray(psi)
        return bool((psi.min() >= lo - slack) and (psi.max() <= hi + slack))


def make_profile(rho_coeffs, beta_coeffs, g, psi_window):
    """Validate and build a :class:`StratificationProfile`.

    Raises
    ------
    ProfileError
        If g <= 0, the window is empty, coefficients are not finite, or the
        density is not strictly positive on the audited label range.
    """
    from .errors import ProfileError

    rho = np.atleast_1d(np.asarray(rho_coeffs, dtype=float))
    beta = np.atleast_1d(np.asarray(beta_coeffs, dtype=float))
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(beta))):
        raise ProfileError("profile coefficients must be finite")
    if not np.isfinite(g) or g <= 0.0:
        raise ProfileError(f"gravity must be positive, got {g}")
    lo, hi = float(psi_window[0]), float(psi_window[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ProfileError(f"empty or invalid psi window [{lo}, {hi}]")
    prof = StratificationProfile(rho, beta, float(g), (lo, hi))
    plo, phi = prof.p_range
    rho_min = poly_min(rho, plo, phi)
    if rho_min <= 0.0:
        raise ProfileError(
            f"density must stay positive on the audit window; min rho = {rho_min}"
        )
    return prof


def eval_f(profile, y, psi, derivative_order=0):
    """The forcing f(y, psi) or one of its first two psi-derivatives.

    f(y, psi)  = g*y*rho'(-psi) + beta(-psi)
    d_psi f    = -g*y*rho''(-psi) - beta'(-psi)
    d_psi^2 f  =  g*y*rho'''(-psi) + beta''(-psi)
    """
    if derivative_order not in (0, 1, 2):
        raise ValueError(f"derivative_order must be 0, 1 or 2, got {derivative_order}")
    y = np.asarray(y, dtype=float)
    if y.size and (y.min() < -1.0 - 1e-12 or y.max() > 1.0 + 1e-12):
        raise ValueError("y outside the strip [-1, 1]")
    p = -np.asarray(psi, dtype=float)
    sign = -1.0 if derivative_order == 1 else 1.0
    out = sign * (
        profile.g * y * profile.drho(p, derivative_order + 1)
        + profile.beta(p, derivative_order)
    )
    return out if out.shape else float(out)


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    margin: float                 # signed distance to violation (>= 0 means pass)
    worst_value: float
    worst_point: tuple | None = None
    note: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "margin": self.margin,
            "worst_value": self.worst_value,
            "worst_point": list(self.worst_point) if self.worst_point else None,
            "note": self.note,
        }


@dataclass(frozen=True)
class AssumptionReport:
    checks: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.checks[name]

    def passed(self, *names):
        names = names or tuple(self.checks)
        return all(self.checks[n].passed for n in names)

    def failures(self):
        return [c for c in self.checks.values() if not c.passed]

    def to_dict(self):
        return {n: c.to_dict() for n, c in self.checks.items()}


def _axis(lo, hi, per_unit, default):
    if per_unit is None:
        return np.linspace(lo, hi, default)
    n = max(2, int(np.ceil(per_unit * max(hi - lo, 1e-30))) + 1)
    return np.linspace(lo, hi, n)


def check_assumptions(profile, sample_density=None):
    """Audit the standing assumptions on the profile's psi-window.

    Sampling is a uniform tensor grid; by default 256 points per axis,
    otherwise ``sample_density`` points per unit length (>= 2).

    Checks (margin >= 0 means the inequality holds at every sample):

    * A1: rho > 0 (strict) on the label range.
    * A2: smoothness -- automatic for polynomial data.
    * A3: d_psi f >= 0 on [-1,1] x window.
    * A4: 2f + g(1+y) rho'(-psi) <= 0 on [-1,0] x (window, psi <= 0).
    * A4': same expression >= 0 on psi >= 0.
    * B1: d_psi^2 f >= 0 on [-1,0] x (window, psi <= 0).
    * B2: 2 d_psi f - g(1+y) rho''(-psi) >= 0 on the same region.
    * B3: d_psi f(y, 0) <= 2 on [-1,0].
    """
    if sample_density is not None and sample_density < 2:
        raise ValueError("sample_density must be at least 2 points per unit")
    lo, hi = profile.psi_window
    y_full = _axis(-1.0, 1.0, sample_density, 256)
    y_low = _axis(-1.0, 0.0, sample_density, 256)
    psi_all = _axis(lo, hi, sample_density, 256)
    psi_neg = _axis(lo, min(hi, 0.0), sample_density, 256) if lo <= 0.0 else None
    psi_pos = _axis(max(lo, 0.0), hi, sample_density, 256) if hi >= 0.0 else None

    checks = {}

    def min_check(name, vals, ygrid, pgrid, strict=False, note=""):
        i = int(np.argmin(vals))
        iy, ip = np.unravel_index(i, vals.shape)
        m = float(vals[iy, ip])
        ok = m > 0.0 if strict else m >= 0.0
        checks[name] = AssumptionCheck(
            name, ok, m, m, (float(ygrid[iy]), float(pgrid[ip])), note
        )

    # A1 on the label range (1-D in psi)
    rho_vals = profile.rho(-psi_all)
    i = int(np.argmin(rho_vals))
    checks["A1"] = AssumptionCheck(
        "A1", bool(rho_vals[i] > 0.0), float(rho_vals[i]), float(rho_vals[i]),
        (float(psi_all[i]),), "rho > 0"
    )
    checks["A2"] = AssumptionCheck(
        "A2", True, np.inf, np.inf, None, "polynomial data, automatically smooth"
    )

    Y, P = y_full[:, None], psi_all[None, :]
    min_check("A3", eval_f(profile, Y, P, 1), y_full, psi_all, note="d_psi f >= 0")

    def a4_expr(ygrid, psigrid):
        Yg, Pg = ygrid[:, None], psigrid[None, :]
        return 2.0 * eval_f(profile, Yg, Pg) + profile.g * (1.0 + Yg) * profile.drho(-Pg)

    if psi_neg is not None:
        vals = a4_expr(y_low, psi_neg)
        i = int(np.argmax(vals))
        iy, ip = np.unravel_index(i, vals.shape)
        worst = float(vals[iy, ip])
        checks["A4"] = AssumptionCheck(
            "A4", worst <= 0.0, -worst, worst,
            (float(y_low[iy]), float(psi_neg[ip])), "2f + g(1+y)rho' <= 0 on psi<=0"
        )
        min_check("B1", eval_f(profile, y_low[:, None], psi_neg[None, :], 2),
                  y_low, psi_neg, note="d_psi^2 f >= 0 on psi<=0")
        b2 = (2.0 * eval_f(profile, y_low[:, None], psi_neg[None, :], 1)
              - profile.g * (1.0 + y_low[:, None]) * profile.drho(-psi_neg[None, :], 2))
        min_check("B2", b2, y_low, psi_neg, note="2 d_psi f - g(1+y)rho'' >= 0")
    else:
        for n in ("A4", "B1", "B2"):
            checks[n] = AssumptionCheck(n, True, np.inf, np.inf, None,
                                        "window does not reach psi <= 0 (vacuous)")

    if psi_pos is not None:
        vals = a4_expr(y_low, psi_pos)
        i = int(np.argmin(vals))
        iy, ip = np.unravel_index(i, vals.shape)
        m = float(vals[iy, ip])
        checks["A4p"] = AssumptionCheck(
            "A4p", m >= 0.0, m, m,
            (float(y_low[iy]), float(psi_pos[ip])), "2f + g(1+y)rho' >= 0 on psi>=0"
        )
    else:
        checks["A4p"] = AssumptionCheck("A4p", True, np.inf, np.inf, None,
                                        "window does not reach psi >= 0 (vacuous)")

    b3 = eval_f(profile, y_low, np.zeros_like(y_low), 1)
    i = int(np.argmax(b3))
    checks["B3"] = AssumptionCheck(
        "B3", bool(b3[i] <= 2.0), float(2.0 - b3[i]), float(b3[i]),
        (float(y_low[i]), 0.0), "d_psi f(y,0) <= 2"
    )
    return AssumptionReport(checks)


def profile_to_dict(profile):
    return {
        "rho": list(profile.rho_coeffs),
        "beta": list(profile.beta_coeffs),
        "g": profile.g,
        "psi_window": list(profile.psi_window),
    }


def save_profile(profile, path):
    with open(path, "w") as fh:
        json.dump(profile_to_dict(profile), fh, indent=2)
        fh.write("\n")


def load_profile(path):
    """Read a profile from its JSON file format."""
    from .errors import ProfileError

    with open(path) as fh:
        data = json.load(fh)
    try:
        return make_profile(data["rho"], data["beta"], data["g"], data["psi_window"])
    except KeyError as exc:
        raise ProfileError(f"profile file missing key {exc}") from exc
