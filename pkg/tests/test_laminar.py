import numpy as np
import pytest

import stratwave as sw
from stratwave.errors import (AssumptionError, BracketError, WindowEscapeError)

from conftest import random_admissible


def test_homogeneous_linear_solution(homogeneous):
    flow = sw.solve_laminar(homogeneous, -2.0)
    assert np.abs(flow.psi - 2.0 * flow.grid).max() < 1e-12
    assert np.abs(flow.dpsi - 2.0).max() < 1e-11
    assert flow.residual_inf <= 1e-8


def test_linear_profile_closed_form(linear_profile):
    # psi = -y^3/60 - y^2/4 - (7/30) y for lambda = 0
    flow = sw.solve_laminar(linear_profile, 0.0)
    y = flow.grid
    exact = -y ** 3 / 60.0 - y ** 2 / 4.0 - (7.0 / 30.0) * y
    assert np.abs(flow.psi - exact).max() < 1e-13
    assert flow.dpsi_surface == pytest.approx(-7.0 / 30.0, abs=1e-13)


def test_unit_shear_closed_form(unit_shear_profile):
    # f = psi: psi = -lambda sinh(y)/sinh(1)
    flow = sw.solve_laminar(unit_shear_profile, -1.0)
    exact = np.sinh(flow.grid) / np.sinh(1.0)
    assert np.abs(flow.psi - exact).max() < 1e-12


def test_uniqueness_two_starts(curved_profile):
    tol = 1e-9
    f1 = sw.solve_laminar(curved_profile, -1.0, tol=tol)
    rng = np.random.default_rng(3)
    guess = -(-1.0) * f1.grid + 0.1 * rng.standard_normal(len(f1.grid))
    guess[0], guess[-1] = -1.0, 0.0
    f2 = sw.solve_laminar(curved_profile, -1.0, tol=tol, initial_guess=guess)
    assert np.abs(f1.psi - f2.psi).max() < 10.0 * tol


def test_window_escape():
    prof = sw.make_profile([1.0], [0.0], 1.0, (-1.0, 1.0))
    with pytest.raises(WindowEscapeError):
        sw.solve_laminar(prof, -3.0)


def test_assumption_gate():
    prof = sw.make_profile([1.0], [0.0, 1.0], 1.0, (-2.0, 2.0))   # A3 fails
    with pytest.raises(AssumptionError):
        sw.solve_laminar(prof, -1.0)


def test_sensitivity_closed_forms(homogeneous, linear_profile, unit_shear_profile):
    for prof, lam in ((homogeneous, -2.0), (linear_profile, -1.0)):
        flow = sw.solve_laminar(prof, lam)
        sens = sw.laminar_sensitivity(prof, flow)
        assert np.abs(sens.u + flow.grid).max() < 1e-11           # u = -y
        assert sens.du_surface == pytest.approx(-1.0, abs=1e-11)
    flow = sw.solve_laminar(unit_shear_profile, -1.0)
    sens = sw.laminar_sensitivity(unit_shear_profile, flow)
    exact = -np.sinh(flow.grid) / np.sinh(1.0)
    assert np.abs(sens.u - exact).max() < 1e-12
    assert sens.du_surface == pytest.approx(-1.0 / np.sinh(1.0), abs=1e-12)


def test_sensitivity_signs_and_range(curved_profile):
    flow = sw.solve_laminar(curved_profile, -1.2)
    sens = sw.laminar_sensitivity(curved_profile, flow)
    assert sens.u.min() >= -1e-12 and sens.u.max() <= 1.0 + 1e-12
    assert sens.du_surface < 0.0 and sens.du_bottom < 0.0


def test_sensitivity_consistency_richardson(curved_profile):
    # centered difference of psi'(0) in lambda vs the sensitivity solve
    lam = -1.0
    flow = sw.solve_laminar(curved_profile, lam)
    du0 = sw.laminar_sensitivity(curved_profile, flow).du_surface

    def fd(h):
        up = sw.solve_laminar(curved_profile, lam + h).dpsi_surface
        dn = sw.solve_laminar(curved_profile, lam - h).dpsi_surface
        return (up - dn) / (2.0 * h)

    e1 = abs(fd(1e-3) - du0)
    e2 = abs(fd(5e-4) - du0)
    assert e1 < 1e-6
    assert 3.4 <= e1 / e2 <= 4.6                                  # O(h^2)


def test_quadrature_identity(linear_profile, curved_profile):
    for prof, lam in ((linear_profile, -2.0), (curved_profile, -1.0)):
        flow = sw.solve_laminar(prof, lam, tol=1e-9)
        rebuilt = sw.dpsi_from_quadrature(prof, flow)
        assert np.abs(rebuilt - flow.dpsi).max() < 1e-10


def test_threshold_lambda(homogeneous, linear_profile):
    assert sw.find_threshold_lambda(homogeneous, (-1.0, 1.0)) == pytest.approx(
        0.0, abs=1e-9)
    assert sw.find_threshold_lambda(linear_profile, (-1.0, 1.0)) == pytest.approx(
        -7.0 / 30.0, abs=1e-9)
    with pytest.raises(BracketError):
        sw.find_threshold_lambda(homogeneous, (1.0, 2.0))


def test_threshold_residual_postcheck(unit_shear_profile):
    Lam = sw.find_threshold_lambda(unit_shear_profile, (-2.0, 2.0))
    flow = sw.solve_laminar(unit_shear_profile, Lam)
    assert abs(flow.dpsi_surface) < 1e-9


def test_lambda_minus(homogeneous, linear_profile):
    lm = sw.find_lambda_minus(homogeneous)
    assert lm == pytest.approx(-1.0, abs=1e-9)
    lm2 = sw.find_lambda_minus(linear_profile)
    assert lm2 == pytest.approx(-37.0 / 30.0, abs=1e-9)
    # both defining inequalities hold at the returned value
    for prof, lm_val in ((homogeneous, lm), (linear_profile, lm2)):
        flow = sw.solve_laminar(prof, lm_val)
        assert flow.dpsi.min() >= -1e-10
        assert flow.dpsi_surface ** 2 >= prof.g * prof.rho(0.0) - 1e-9


def test_surface_value_decreasing(curved_profile):
    Lam = sw.find_threshold_lambda(curved_profile, (-2.0, 2.0))
    lams = np.linspace(Lam - 1.5, Lam + 1.0, 9)
    vals = [sw.solve_laminar(curved_profile, l).dpsi_surface for l in lams]
    assert np.all(np.diff(vals) < 0.0)


def test_apriori_bound_randomized():
    rng = np.random.default_rng(2024)
    for _ in range(30):
        profile, lam = random_admissible(rng)
        flow = sw.solve_laminar(profile, lam, check=False)
        assert np.abs(flow.psi).max() <= sw.apriori_bound(profile, lam) + 1e-7


def test_spectral_convergence(curved_profile):
    res = [sw.discretization_residual(
        curved_profile, sw.solve_laminar(curved_profile, -1.0, n_nodes=n))
        for n in (8, 16, 32)]
    assert res[1] <= max(res[0] / 100.0, 5e-13)
    assert res[2] <= max(res[1] / 100.0, 5e-13)


def test_csv_export(tmp_path, homogeneous):
    flow = sw.solve_laminar(homogeneous, -2.0, n_nodes=16)
    path = tmp_path / "laminar.csv"
    sw.laminar_to_csv(flow, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# lambda=-2 ")
    assert lines[1] == "y,psi,dpsi"
    assert len(lines) == 2 + 16
    y, psi, dpsi = map(float, lines[2].split(","))
    assert (y, psi) == (-1.0, -2.0)
