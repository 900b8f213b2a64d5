"""
Leaving the admissible region
=============================

On the scalar toy problem the PGD condition allows ``lam < 1.8``.
With ``lam = 3`` the run is refused unless forced, and the forced run
blows up with a strictly increasing merit function.
"""

import warnings

import numpy as np

from proxpnp.algorithms import AlgoConfig, Problem, run
from proxpnp.errors import ValidationError
from proxpnp.fidelity import L2Fidelity
from proxpnp.operators import CircularConvOp, IdentityOp
from proxpnp.prior import LinearSmootherPotential, ProxDenoiser

d = ProxDenoiser(LinearSmootherPotential(CircularConvOp(np.array([0.5]), (1,)), 1.0))
prob = Problem(L2Fidelity(IdentityOp((1,)), np.zeros(1)), np.ones(1), denoiser=d)

try:
    run("pgd", prob, AlgoConfig(lam=3.0, max_iter=20))
except ValidationError as exc:
    print("refused:", exc)

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    rep = run("pgd", prob, AlgoConfig(lam=3.0, max_iter=20, unsafe=True, stop_residual=0.0))
for r in rep.rows[::5]:
    print(f"k={r.k:2d}  merit {r.lyapunov:.4g}")

# inside the region the same problem converges
rep = run("pgd", prob, AlgoConfig(lam=1.5, max_iter=20, stop_residual=0.0))
print("lam = 1.5 final merit:", rep.rows[-1].lyapunov)
