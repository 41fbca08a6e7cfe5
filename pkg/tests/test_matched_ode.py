import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nsaclab.matched_ode import (RhsSample, SolvabilityViolated, fit_decay_constant,
                                 linearized_residual, ode_suite, solvability_defect,
                                 solve_linearized_ac, solve_weighted, write_solution_csv)
from nsaclab.potential import Blend, ViscosityModel


def test_suite_closed_forms(profile):
    rows = ode_suite(profile, ViscosityModel(2.0, 0.5))
    assert rows["ac_theta0pp_error"][0] <= 1e-5
    assert rows["weighted_eta_error"][0] <= 1e-5
    assert rows["rejects_A_theta0p"][1] and rows["rejects_B_theta0p"][1]


def test_translation_mode_rejected(profile):
    with pytest.raises(SolvabilityViolated) as info:
        solve_linearized_ac(profile.theta0p, profile)
    assert info.value.defect == pytest.approx(profile.sigma, rel=1e-6)


def test_weighted_nonzero_mean_rejected(profile):
    with pytest.raises(SolvabilityViolated):
        solve_weighted(profile.theta0p, ViscosityModel(), profile)


def test_weighted_needs_decay(profile):
    B = np.sin(profile.rho)  # integrates to zero on the symmetric grid, no decay
    with pytest.raises(ValueError):
        solve_weighted(B, ViscosityModel(), profile)


def test_grid_mismatch(profile):
    with pytest.raises(ValueError):
        solvability_defect(np.ones(10), profile)


def test_odd_rhs_limits(profile):
    # A = theta0 is odd, hence orthogonal to theta0'; w tends to -A_pm / f''(pm 1) = -+1
    w = solve_linearized_ac(profile.theta0, profile)
    assert w[0] == pytest.approx(1.0, abs=1e-4)
    assert w[-1] == pytest.approx(-1.0, abs=1e-4)
    assert linearized_residual(w, profile.theta0, profile) <= 1e-8
    C = fit_decay_constant(w, 1.0, -1.0, profile)
    assert np.isfinite(C) and C < 100


def test_explicit_limits_used(profile):
    A = RhsSample.of(profile.theta0, limits=(-1.0, 1.0))
    w = solve_linearized_ac(A, profile)
    assert w[-1] == pytest.approx(-1.0, abs=1e-4)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linearity_and_pin(profile, a, b):
    A1, A2 = profile.theta0pp, profile.theta0 * profile.theta0p**2
    w = solve_linearized_ac(a * A1 + b * A2, profile)
    w1 = solve_linearized_ac(A1, profile)
    w2 = solve_linearized_ac(A2, profile)
    np.testing.assert_allclose(w, a * w1 + b * w2, atol=1e-10)
    assert abs(w[profile.n // 2]) <= 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5), st.floats(0.2, 5))
def test_weighted_recovers_blend(profile, nu_p, nu_m):
    try:
        model = ViscosityModel(nu_p, nu_m)
    except ValueError:
        assume(False)
    blend = Blend()
    rho = profile.rho
    B = model.d1(profile.theta0) * profile.theta0p * blend.d1(rho) \
        + model(profile.theta0) * blend.d2(rho)
    w = solve_weighted(B, model, profile)
    assert np.max(np.abs(w - (blend.eta(rho) - 0.5))) <= 1e-5


def test_write_csv(profile, tmp_path):
    w = solve_linearized_ac(profile.theta0pp, profile)
    path = write_solution_csv(tmp_path / "w.csv", profile.rho, w)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1], w)
