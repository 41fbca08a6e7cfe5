# %% [markdown]
# # A parabolic equation on the interface
#
# The interface corrections solve `h_t + a h_s + b h - kappa c h_ss = g` on
# the circle, with `kappa` possibly small.  The energy estimates must not
# deteriorate as `kappa -> 0`.  We check accuracy on two closed-form
# solutions (a damped travelling wave with constant coefficients, and a
# manufactured one with variable `c`) and then measure both estimate ratios
# over four decades of `kappa`.

# %%
from nsaclab.surface_pde import (exact_solution_error, fixed_data_family, kappa_scaling_report,
                                 scaled_forcing_family)

for case in ("translating", "variable"):
    for dt in (2e-3, 1e-3, 5e-4):
        err = exact_solution_error(n=256, dt=dt, case=case)
        print(f"{case:12s} dt = {dt:.0e}: max error at T = 1: {err:.3e}")

# %% [markdown]
# With forcing at the diffusive scale (`g = sin(m s)`, `m ~ kappa^(-1/2)`)
# both ratios stay flat:

# %%
kappas = [1.0, 0.25, 1 / 16, 1 / 64]
rep = kappa_scaling_report(scaled_forcing_family, kappas)
for row in rep["rows"]:
    print(f"kappa = {row['kappa']:<8.4g} L2 ratio {row['ratio_l2']:.4f}   H1 ratio {row['ratio_h1']:.4f}")
print(f"spreads {rep['spread_l2']:.2f} / {rep['spread_h1']:.2f}, slopes {rep['slope_l2']:+.3f} / {rep['slope_h1']:+.3f}")

# %% [markdown]
# Fixed smooth data is a poor probe of the H1-level estimate: the left side
# shrinks like `kappa^(1/2)` while the right side stays put, so the ratio
# tends to zero.  The estimate holds, it is just not attained.

# %%
rep = kappa_scaling_report(fixed_data_family, kappas)
print([round(r["ratio_h1"], 4) for r in rep["rows"]], f"slope {rep['slope_h1']:+.3f}")
