# %% [markdown]
# # The optimal profile and its linearization
#
# The diffuse interface has the shape of the heteroclinic solution
# `theta0'' = f'(theta0)` connecting -1 to +1.  For the quartic well it is
# `tanh(rho/2)`, with surface tension `sigma = int theta0'^2 = 2/3`.

# %%
import numpy as np

from nsaclab.potential import DoubleWell, compute_profile, compute_sigma1
from nsaclab.spectral import assemble_and_solve

prof = compute_profile()
print(f"sigma = {prof.sigma:.10f}   (2/3 = {2 / 3:.10f})")
print(f"max |theta0 - tanh(rho/2)| = {np.max(np.abs(prof.theta0 - np.tanh(prof.rho / 2))):.2e}")
print(f"sigma1 = int theta0' eta' = {compute_sigma1(prof):.10f}")

# %% [markdown]
# A different even double well gives a different width and tension; nothing
# in the solver is specific to the quartic.

# %%
sextic = DoubleWell(f=lambda c: (1 - c**2) ** 2 * (1 + c**2) / 8,
                    df=lambda c: c * (c**2 - 1) * (3 * c**2 + 1) / 4,
                    d2f=lambda c: (15 * c**4 - 6 * c**2 - 1) / 4, name="sextic")
p6 = compute_profile(well=sextic)
print(f"sextic: sigma = {p6.sigma:.6f}, tail decay rate = {p6.alpha:.6f}")

# %% [markdown]
# Linearizing around the profile gives `-d^2 + f''(theta0)`.  The translation
# mode `theta0'` sits at eigenvalue 0 and the next level is 3/4, below the
# continuum edge at 1.  With width `eps` every eigenvalue scales as `1/eps^2`,
# which is where the spectral gap used in stability arguments comes from.

# %%
for eps in (1.0, 0.5, 0.25):
    sp = assemble_and_solve(L=20, n=4096, eps=eps, k=3)
    lam = sp.eigenvalues
    print(f"eps = {eps:<5} lambda = {lam.round(5)}   eps^2 lambda = {(eps**2 * lam).round(5)}")
