# %% [markdown]
# # Why the interface needs an eps^(1/2) correction
#
# With `alpha = 1/2` the interface drifts by `O(eps^(1/2))` over unit time.
# Compared against the drift-corrected circle the error shrinks with `eps`;
# compared against the uncorrected (purely transported) circle it does not.

# %%
from nsaclab.reference import ReferenceScenario
from nsaclab.solver import SimConfig
from nsaclab.study import convergence_study

rep = convergence_study(0.5, [1 / 16, 1 / 32, 1 / 64], ReferenceScenario("stationary_bubble"),
                        SimConfig(), T=1 / 64, n_snap=4)
for r in rep.records:
    print(f"eps = {r['eps']:<8.4g} {r['reference']:12s} LinfL2 {r['linf_l2']:.4e}  "
          f"radius error {r['radius_error']:.2e}")
for ref in ("corrected", "uncorrected"):
    fit = rep.fits[(ref, "linf_l2")]
    print(f"{ref:12s} fitted order {fit.order:.3f}  95% CI [{fit.ci_low:.2f}, {fit.ci_high:.2f}]")
