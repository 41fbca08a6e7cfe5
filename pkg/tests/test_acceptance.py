"""Quantitative acceptance checks, one per criterion.

Each criterion prints a single ``PASS``/``FAIL`` line (collected into the
terminal summary under pytest, printed directly when run as a script:
``python3 tests/test_acceptance.py``).  Solver runs are cached so that the
energy criterion audits the very runs used by the other criteria.
"""
import functools
import time

import numpy as np
import pytest

from nsaclab.geometry import coords_check, ellipse
from nsaclab.matched_ode import ode_suite
from nsaclab.potential import compute_profile
from nsaclab.reference import ReferenceScenario, laplace_jump, transported_center
from nsaclab.solver import InitialCondition, SimConfig, run
from nsaclab.spectral import assemble_and_solve
from nsaclab.study import convergence_study, mobility_comparison, pressure_jump
from nsaclab.surface_pde import exact_solution_error, kappa_scaling_report, scaled_forcing_family

LINES = []


def _emit(n, title, ok, detail):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    LINES.append(line)
    return line


# ------------------------------------------------------------ cached runs

@functools.cache
def laplace_run():
    cfg = SimConfig(nx=256, ny=256, eps=1 / 32, alpha=1.0, T=0.01, output_every=0.0025,
                    init=InitialCondition("circle", center=(0.5, 0.5), radius=0.25))
    t0 = time.perf_counter()
    res = run(cfg)
    return cfg, res, time.perf_counter() - t0


@functools.cache
def transport_run():
    # drift over T: 0.25 - sqrt(0.25^2 - 2 eps^(1/2) T) = 0.022 <= R0 / 10
    cfg = SimConfig(nx=64, ny=64, eps=1 / 32, alpha=0.5, T=0.03, output_every=0.01,
                    init=InitialCondition("circle", center=(0.5, 0.5), radius=0.25, U=(1.0, 0.0)))
    return cfg, run(cfg)


@functools.cache
def allen_cahn_run():
    cfg = SimConfig(nx=64, ny=64, eps=1 / 32, alpha=0.0, T=0.01, navier_stokes=False,
                    init=InitialCondition("ellipse", radius=(0.3, 0.15)))
    return cfg, run(cfg)


@functools.cache
def mobility_rows():
    t0 = time.perf_counter()
    rows = mobility_comparison(1 / 32, [0.0, 0.5, 1.0])
    return rows, time.perf_counter() - t0


@functools.cache
def convergence_report():
    t0 = time.perf_counter()
    rep = convergence_study(0.5, [1 / 16, 1 / 32, 1 / 64], ReferenceScenario("stationary_bubble"),
                            SimConfig(), T=1 / 64, n_snap=4)
    return rep, time.perf_counter() - t0


# -------------------------------------------------------------- criteria

def criterion_1():
    t0 = time.perf_counter()
    prof = compute_profile()
    dt = time.perf_counter() - t0
    err = float(np.max(np.abs(prof.theta0 - np.tanh(prof.rho / 2))))
    ok = err <= 1e-6 and abs(prof.sigma - 2 / 3) <= 1e-6 and prof.alpha == 1.0 and dt < 1.0
    return ok, (f"|theta0 - tanh| = {err:.2e}, sigma = {prof.sigma:.9f}, alpha = {prof.alpha}, "
                f"{dt:.2f} s")


def criterion_2():
    t0 = time.perf_counter()
    rows = ode_suite(compute_profile())
    dt = time.perf_counter() - t0
    ok = all(v[1] for v in rows.values()) and dt < 1.0
    return ok, (f"w error {rows['ac_theta0pp_error'][0]:.2e}, eta error "
                f"{rows['weighted_eta_error'][0]:.2e}, rejections "
                f"{rows['rejects_A_theta0p'][1]}/{rows['rejects_B_theta0p'][1]}, {dt:.2f} s")


def criterion_3():
    t0 = time.perf_counter()
    base = assemble_and_solve(L=20, n=4096, eps=1.0)
    lam0, lam1 = base.eigenvalues[:2]
    ok = -1e-4 <= lam0 <= 1e-3 and abs(lam1 - 0.75) <= 1e-2
    worst = 0.0
    for eps in (0.5, 0.25):
        lam = assemble_and_solve(L=20, n=4096, eps=eps).eigenvalues[:2] * eps**2
        # lambda1 relative; lambda0 (exactly 0) against 1% of the gap
        worst = max(worst, abs(lam[1] / lam1 - 1), abs(lam[0] - lam0) / (lam1 - lam0))
    dt = time.perf_counter() - t0
    ok = ok and worst <= 1e-2 and dt < 10
    return ok, f"lambda0 = {lam0:.2e}, lambda1 = {lam1:.6f}, scaling dev {worst:.1e}, {dt:.2f} s"


def criterion_4():
    rep = coords_check(ellipse(0.3, 0.2, 256), eps=0.01, eps_list=(0.1, 0.05, 0.025))
    ok = all(v[2] for v in rep.values())
    return ok, ", ".join(f"{k} {v[0]:.2e}" for k, v in rep.items())


def criterion_5():
    t0 = time.perf_counter()
    err = exact_solution_error(n=256, dt=1e-3)
    rep = kappa_scaling_report(scaled_forcing_family, [1.0, 0.25, 1 / 16, 1 / 64],
                               max_spread=2.0, max_slope=0.15)
    dt = time.perf_counter() - t0
    ok = err <= 1e-3 and rep["passed"] and dt < 30
    return ok, (f"exact error {err:.2e}, spreads {rep['spread_l2']:.2f}/{rep['spread_h1']:.2f}, "
                f"slopes {rep['slope_l2']:+.3f}/{rep['slope_h1']:+.3f}, {dt:.1f} s")


def criterion_6():
    cfg, res, dt = laplace_run()
    d = res.diagnostics
    jump = pressure_jump(res.final.p, cfg, (d["cx"][-1], d["cy"][-1]), d["radius"][-1])
    target = laplace_jump(0.25)
    rel = abs(jump / target - 1)
    ok = rel <= 0.1 and dt < 600
    return ok, f"jump {jump:.4f} vs {target:.4f} (rel {rel:.3f}), 256^2, {dt:.0f} s"


def criterion_7():
    growth = {"laplace": laplace_run()[1].max_energy_growth,
              "transport": transport_run()[1].max_energy_growth}
    for r in mobility_rows()[0]:
        growth[f"mobility a={r['alpha']:g}"] = r["energy_growth"]
    for r in convergence_report()[0].records:
        if r["reference"] == "corrected":
            growth[f"study eps={r['eps']:g}"] = r["energy_growth"]
    worst = max(growth.values())
    ac = allen_cahn_run()[1]
    ok = worst <= 1e-3 and ac.max_step_increase <= 1e-8 and ac.energy_ok
    return ok, (f"max E/E0 - 1 = {worst:.1e} over {len(growth)} runs, AC-only max step "
                f"increase {ac.max_step_increase:.1e} E0")


def criterion_8():
    rows, dt = mobility_rows()
    by = {r["alpha"]: r for r in rows}
    tol = {0.0: 0.15, 0.5: 0.15, 1.0: 0.20}
    ok = all(by[a]["rel_error"] <= tol[a] for a in tol)
    ratio = by[0.0]["rate"] / by[0.5]["rate"]
    target = (1 / 32) ** -0.5
    ok = ok and abs(ratio / target - 1) <= 0.2 and dt < 1800
    errs = "/".join(f"{by[a]['rel_error']:.3f}" for a in tol)
    return ok, f"rel errors {errs}, ratio {ratio:.3f} vs {target:.3f}, {dt:.0f} s"


def criterion_9():
    rep, dt = convergence_report()
    if rep.failed:
        return False, rep.failed
    corr = rep.fits[("corrected", "linf_l2")].order
    plain = rep.fits[("uncorrected", "linf_l2")].order
    ok = corr >= 0.4 and plain <= 0.1 and dt < 7200
    return ok, f"corrected order {corr:.3f}, uncorrected order {plain:.3f}, {dt:.0f} s"


def criterion_10():
    cfg, res = transport_run()
    d = res.diagnostics
    expected = transported_center((0.5, 0.5), (1.0, 0.0), d["t"][-1], (0.0, 0.0, 1.0, 1.0))
    err = float(np.hypot(d["cx"][-1] - expected[0], d["cy"][-1] - expected[1]))
    drift = 0.25 - ReferenceScenario("mobility_corrected_bubble", eps=1 / 32,
                                     alpha=0.5).radius_at(cfg.T)
    ok = err <= 2 * cfg.h and drift <= 0.025
    return ok, f"center error {err:.2e} (2h = {2 * cfg.h:.4f}), drift {drift:.4f}"


CRITERIA = {
    1: ("profile", criterion_1),
    2: ("matched ODE", criterion_2),
    3: ("spectrum", criterion_3),
    4: ("coordinates", criterion_4),
    5: ("surface PDE", criterion_5),
    6: ("Laplace jump", criterion_6),
    7: ("energy", criterion_7),
    8: ("mobility scaling", criterion_8),
    9: ("convergence contrast", criterion_9),
    10: ("pure transport", criterion_10),
}


@pytest.mark.slow
@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n):
    title, fn = CRITERIA[n]
    ok, detail = fn()
    line = _emit(n, title, ok, detail)
    assert ok, line


if __name__ == "__main__":
    for n, (title, fn) in sorted(CRITERIA.items()):
        ok, detail = fn()
        print(_emit(n, title, ok, detail), flush=True)
