"""
Where the convergence conditions bite
=====================================

The validators return the binding limit. For Douglas-Rachford the
largest admissible denoiser Lipschitz constant depends on the
relaxation ``beta`` through a cubic.
"""

from proxpnp.algorithms import drs_lipschitz_limit, validate_alpha_pgd, validate_pgd

rep = validate_pgd(1.6, lipschitz_f=1.0, denoiser_lipschitz=0.6)
print(rep.message, "| largest lambda:", rep.bound)

M = 0.6 / 1.6
rep = validate_alpha_pgd(2.5, 0.38, 1.0, M)
print(rep.message)
print("alpha must lie in", rep.extras["alphaInterval"], "and lambda below", rep.extras["lambdaLimit"])

for beta in (0.9, 0.5, 0.25, 0.1, 1e-6):
    print(f"beta = {beta:<6g} L_max = {drs_lipschitz_limit(beta):.6f}")
