import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsaclab.surface_pde import (SurfPdeBlowUp, SurfPdeProblem, estimate_ratios,
                                 exact_solution_error, fixed_data_family, kappa_scaling_report,
                                 scaled_forcing_family, solve_surface_pde, stable_dt,
                                 write_kappa_report)


@pytest.mark.parametrize("case", ["translating", "variable"])
def test_exact_solution_first_order(case):
    e1 = exact_solution_error(n=256, dt=1e-3, case=case)
    e2 = exact_solution_error(n=256, dt=5e-4, case=case)
    assert e1 <= 1e-3
    assert e1 / e2 == pytest.approx(2.0, rel=0.2)


def test_translating_mode_discrete_amplification():
    # sin(s) = Im e^{is}: each step multiplies the mode by (1 - i dt) / (1 + dt kappa)
    kappa, dt, T = 0.25, 1e-3, 1.0
    sol = solve_surface_pde(SurfPdeProblem(kappa=kappa, a=1.0, h0=np.sin, T=T, n=256, dt=dt))
    G = ((1 - 1j * dt) / (1 + dt * kappa)) ** int(round(T / dt))
    np.testing.assert_allclose(sol.final, np.imag(G * np.exp(1j * sol.s)), atol=1e-12)
    exact = np.exp(-kappa * T) * np.sin(sol.s - T)
    assert np.max(np.abs(sol.final - exact)) <= 1e-3


def test_zero_data_stays_zero():
    sol = solve_surface_pde(SurfPdeProblem(kappa=0.3, a=1.0, b=0.5, c=2.0, T=0.1, n=32))
    assert np.all(sol.final == 0.0) and np.all(sol.l2 == 0.0)


def test_reaction_only_reduces_to_ode():
    sol = solve_surface_pde(SurfPdeProblem(kappa=0.7, b=1.0, h0=1.0, T=1.0, n=16, dt=1e-3))
    np.testing.assert_allclose(sol.final, (1 - 1e-3) ** 1000, rtol=1e-12)
    # explicit Euler error ~ t e^{-t} dt / 2, so 1e-6 needs a short horizon or tiny step
    sol = solve_surface_pde(SurfPdeProblem(kappa=0.7, b=1.0, h0=1.0, T=0.1, n=8, dt=1e-5))
    assert np.max(np.abs(sol.final - np.exp(-0.1))) <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 1.0), st.integers(0, 2**31 - 1))
def test_pure_diffusion_l2_nonincreasing(kappa, seed):
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal(8)
    c0 = 0.5 + rng.random()

    def h0(s):
        return sum(a * np.cos(j * s + j) for j, a in enumerate(coef))

    def c(s, t):
        return c0 + 0.4 * np.sin(s + t)

    sol = solve_surface_pde(SurfPdeProblem(kappa=kappa, c=c, h0=h0, T=0.05, n=32, dt=1e-2))
    assert np.all(np.diff(sol.l2) <= 1e-12 * sol.l2[0])


def test_spatial_resolution_converged():
    kw = dict(kappa=0.25, a=1.0, h0=np.sin, T=1.0, dt=1e-3)
    coarse = solve_surface_pde(SurfPdeProblem(n=128, **kw))
    fine = solve_surface_pde(SurfPdeProblem(n=256, **kw))
    assert np.max(np.abs(fine.final[::2] - coarse.final)) <= 1e-6


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([1.0, 0.25, 1 / 16]), st.integers(1, 6))
def test_forced_mode_closed_form(kappa, m):
    # h_t = kappa h_ss + sin(m s), h0 = 0: each IMEX step is H <- (H + dt)/(1 + dt lam)
    dt, T = 1e-3, 0.2
    lam = kappa * m**2
    sol = solve_surface_pde(SurfPdeProblem(kappa=kappa, g=lambda s, t: np.sin(m * s),
                                           T=T, n=64, dt=dt))
    nsteps = int(round(T / dt))
    discrete = (1 - (1 + dt * lam) ** -nsteps) / lam
    np.testing.assert_allclose(sol.final, discrete * np.sin(m * sol.s), atol=1e-12)
    phi = (1 - np.exp(-lam * T)) / lam
    assert discrete == pytest.approx(phi, rel=2 * dt * lam + 1e-12)
    # norms over [0, 2 pi): ||sin(m s)|| = sqrt(pi), ||d_s|| = m sqrt(pi)
    assert sol.l2[-1] == pytest.approx(np.sqrt(np.pi) * discrete, rel=1e-10)
    assert sol.l2_ds[-1] == pytest.approx(m * np.sqrt(np.pi) * discrete, rel=1e-10)
    assert sol.l2_dss[-1] == pytest.approx(m**2 * np.sqrt(np.pi) * discrete, rel=1e-10)


def test_dense_path_matches_diagonal():
    kw = dict(kappa=0.5, a=0.3, g=lambda s, t: np.cos(2 * s), h0=np.sin, T=0.1, n=64, dt=1e-3)
    fast = solve_surface_pde(SurfPdeProblem(c=1.0, **kw))
    # a tiny variation forces the collocation path
    dense = solve_surface_pde(SurfPdeProblem(c=lambda s, t: 1.0 + 1e-14 * np.cos(s), **kw))
    np.testing.assert_allclose(dense.final, fast.final, atol=1e-11)


def test_mass_conserved_without_forcing():
    # constant a and c: advection and diffusion both integrate to zero
    prob = SurfPdeProblem(kappa=0.3, a=1.0, c=2.0,
                          h0=lambda s: 1.0 + np.cos(s), T=0.2, n=64, dt=1e-3)
    sol = solve_surface_pde(prob)
    assert sol.mass == pytest.approx(2 * np.pi, rel=1e-10)


def test_scaled_family_uniform_in_kappa():
    rep = kappa_scaling_report(scaled_forcing_family, [1.0, 0.25, 1 / 16, 1 / 64])
    assert rep["passed"], rep
    assert rep["spread_l2"] <= 2 and rep["spread_h1"] <= 2
    assert abs(rep["slope_l2"]) <= 0.15 and abs(rep["slope_h1"]) <= 0.15


def test_fixed_data_second_ratio_decays():
    # kappa-independent smooth data: the H1-level left side shrinks like sqrt(kappa)
    rep = kappa_scaling_report(fixed_data_family, [1.0, 0.25, 1 / 16, 1 / 64])
    assert rep["slope_h1"] == pytest.approx(0.5, abs=0.15)
    assert not rep["passed"]


def test_guards():
    with pytest.raises(ValueError):
        SurfPdeProblem(kappa=0.0)
    with pytest.raises(ValueError):
        SurfPdeProblem(kappa=2.0)
    with pytest.raises(ValueError):
        solve_surface_pde(SurfPdeProblem(kappa=1.0, a=100.0, n=256, dt=1e-2))
    with pytest.raises(ValueError):
        solve_surface_pde(SurfPdeProblem(kappa=1.0, c=lambda s, t: np.sin(s), n=32, dt=1e-3, T=1e-2))


def test_blowup_detected():
    prob = SurfPdeProblem(kappa=0.01, b=-40.0, h0=1.0, T=1.0, n=16, dt=1e-2)
    with pytest.raises(SurfPdeBlowUp):
        solve_surface_pde(prob)


def test_stable_dt():
    prob = SurfPdeProblem(kappa=1.0, a=2.0, b=4.0, n=64)
    assert stable_dt(prob) == pytest.approx(0.5 * min(2 * np.pi / 64 / 2, 0.25))


def test_zero_data_ratio_zero():
    sol = solve_surface_pde(SurfPdeProblem(kappa=0.5, T=0.01, n=16))
    for r in (0, 1):
        rat = estimate_ratios(sol, r)
        assert rat["ratio_l2"] == 0.0 and rat["ratio_h1"] == 0.0
    with pytest.raises(ValueError):
        estimate_ratios(sol, 2)


@pytest.mark.parametrize("r", [0, 1])
def test_estimates_single_mode_by_hand(r):
    # g = sin(m s), h0 = 0: h = A_n sin(m s) with the discrete amplitude A_n,
    # and ||sin(m s)||_{Hj}^2 = pi * sum_{i <= j} m^(2i)
    kappa, m, dt, T = 0.25, 2, 1e-3, 0.5
    sol = solve_surface_pde(scaled_forcing_family(kappa, T=T, n=32, dt=dt))
    lam = kappa * m**2
    n = np.arange(int(round(T / dt)) + 1)
    t = n * dt
    A = (1 - (1 + dt * lam) ** -n) / lam

    def w(j):
        return np.sqrt(np.pi * sum(m ** (2 * i) for i in range(j + 1)))

    lhs1 = w(r) * A.max() + np.sqrt(kappa * np.trapezoid((w(r + 1) * A) ** 2, t))
    rhs1 = w(r) * T
    lhs2 = np.sqrt(kappa) * w(r + 1) * A.max() + kappa * np.sqrt(np.trapezoid((w(r + 2) * A) ** 2, t))
    rhs2 = w(r) * np.sqrt(T)
    got = estimate_ratios(sol, r)
    assert got["ratio_l2"] == pytest.approx(lhs1 / rhs1, rel=1e-9)
    assert got["ratio_h1"] == pytest.approx(lhs2 / rhs2, rel=1e-9)


def test_kappa_one_golden():
    # frozen solver output, scaled family at kappa = 1 (n = 128, dt = 1e-3, T = 1)
    row = kappa_scaling_report(scaled_forcing_family, [1.0])["rows"][0]
    assert row["ratio_l2"] == pytest.approx(1.2115496946391062, rel=1e-9)
    assert row["ratio_h1"] == pytest.approx(1.6035714934648841, rel=1e-9)


def test_scaled_family_uniform_at_r1():
    rep = kappa_scaling_report(scaled_forcing_family, [1.0, 0.25, 1 / 16, 1 / 64], r=1)
    assert rep["passed"], rep


def test_report_deterministic(tmp_path):
    rep = kappa_scaling_report(scaled_forcing_family, [1.0, 0.25])
    a = write_kappa_report(rep, tmp_path / "a.csv").read_bytes()
    b = write_kappa_report(kappa_scaling_report(scaled_forcing_family, [1.0, 0.25]),
                           tmp_path / "b.csv").read_bytes()
    assert a == b
