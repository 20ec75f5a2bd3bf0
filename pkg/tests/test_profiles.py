import json

import numpy as np
import pytest

import stratwave as sw
from stratwave.errors import ProfileError

from conftest import random_admissible


def test_homogeneous_f_zero(homogeneous):
    for y in (-1.0, -0.3, 0.0, 0.7):
        for psi in (-2.0, 0.0, 1.5):
            assert sw.eval_f(homogeneous, y, psi) == 0.0
            assert sw.eval_f(homogeneous, y, psi, 1) == 0.0
            assert sw.eval_f(homogeneous, y, psi, 2) == 0.0


def test_linear_profile_values(linear_profile):
    # f = -0.1 y - 0.5 regardless of psi
    assert sw.eval_f(linear_profile, -1.0, 0.0) == pytest.approx(-0.4, abs=1e-15)
    assert sw.eval_f(linear_profile, 0.25, 3.0) == pytest.approx(-0.525, abs=1e-15)
    assert sw.eval_f(linear_profile, -0.5, 1.0, 1) == 0.0
    assert sw.eval_f(linear_profile, -0.5, 1.0, 2) == 0.0


def test_f_linear_in_g():
    p1 = sw.make_profile([1.0, -0.1], [-0.5], 1.0, (-6.0, 6.0))
    p2 = sw.make_profile([1.0, -0.1], [-0.5], 2.0, (-6.0, 6.0))
    rng = np.random.default_rng(7)
    for _ in range(20):
        y = rng.uniform(-1.0, 1.0)
        psi = rng.uniform(-5.0, 5.0)
        extra = 1.0 * y * p1.drho(-psi)
        assert sw.eval_f(p2, y, psi) == pytest.approx(
            sw.eval_f(p1, y, psi) + extra, rel=1e-14, abs=1e-14)


def test_make_profile_errors():
    with pytest.raises(ProfileError):
        sw.make_profile([-1.0], [0.0], 1.0, (-1.0, 1.0))        # A1 violated
    with pytest.raises(ProfileError):
        sw.make_profile([1.0], [0.0], 0.0, (-1.0, 1.0))         # g must be > 0
    with pytest.raises(ProfileError):
        sw.make_profile([1.0], [0.0], 1.0, (2.0, -2.0))         # empty window
    with pytest.raises(ProfileError):
        sw.make_profile([1.0, np.inf], [0.0], 1.0, (-1.0, 1.0))
    with pytest.raises(ValueError):
        sw.eval_f(sw.make_profile([1.0], [0.0], 1.0, (-1, 1)), 0.0, 0.0, 3)


def test_check_assumptions_homogeneous(homogeneous):
    rep = sw.check_assumptions(homogeneous)
    assert rep.passed()
    # equalities hold with zero margin where f vanishes identically
    assert rep["A3"].margin == 0.0
    assert rep["A4"].margin == 0.0
    assert rep["B1"].margin == 0.0
    assert rep["B3"].margin == 2.0
    assert rep["A1"].margin == pytest.approx(1.0)


def test_check_assumptions_linear(linear_profile):
    rep = sw.check_assumptions(linear_profile)
    assert rep.passed("A1", "A3", "A4", "B1", "B2", "B3")
    # max of 2f + g(1+y) rho' = -0.3 y - 1.1 over y in [-1,0] is -0.8
    assert rep["A4"].worst_value == pytest.approx(-0.8, abs=1e-12)


def test_check_assumptions_a3_failure():
    prof = sw.make_profile([1.0], [0.0, 1.0], 1.0, (-2.0, 2.0))   # beta(p) = p
    rep = sw.check_assumptions(prof)
    assert not rep["A3"].passed
    assert rep["A3"].worst_value == pytest.approx(-1.0, abs=1e-12)


def test_violation_matches_direct_formula(linear_profile):
    rep = sw.check_assumptions(linear_profile)
    y, psi = rep["A4"].worst_point
    direct = (2.0 * sw.eval_f(linear_profile, y, psi)
              + linear_profile.g * (1.0 + y) * linear_profile.drho(-psi))
    assert rep["A4"].worst_value == pytest.approx(direct, abs=1e-15)
    y3, psi3 = rep["A3"].worst_point
    assert rep["A3"].worst_value == pytest.approx(
        sw.eval_f(linear_profile, y3, psi3, 1), abs=1e-15)


def test_audit_resolution_stable():
    rng = np.random.default_rng(11)
    for _ in range(10):
        profile, _ = random_admissible(rng)
        rep = sw.check_assumptions(profile)
        assert rep.passed("A1", "A3")
        fine = sw.check_assumptions(profile, sample_density=300)
        assert fine["A3"].margin >= -1e-12


def test_sample_density_validation(homogeneous):
    with pytest.raises(ValueError):
        sw.check_assumptions(homogeneous, sample_density=1)


def test_profile_json_roundtrip(tmp_path, linear_profile):
    path = tmp_path / "prof.json"
    sw.save_profile(linear_profile, path)
    data = json.loads(path.read_text())
    assert set(data) == {"rho", "beta", "g", "psi_window"}
    back = sw.load_profile(path)
    assert np.allclose(back.rho_coeffs, linear_profile.rho_coeffs)
    assert np.allclose(back.beta_coeffs, linear_profile.beta_coeffs)
    assert back.g == linear_profile.g
    assert back.psi_window == linear_profile.psi_window
