"""
A gradient-step denoiser is a proximal operator
===============================================

``D = Id - gamma grad g`` with ``gamma L_g < 1`` is one-to-one, and
``D(z)`` minimises ``phi(u) + 1/2 ||u - z||^2`` for the implicit
regulariser ``phi``. The scalar smoother with transfer 1/2 makes this explicit.
"""

import numpy as np

from proxpnp.operators import CircularConvOp
from proxpnp.prior import LinearSmootherPotential, ProxDenoiser, brute_force_prox

pot = LinearSmootherPotential(CircularConvOp(np.array([0.5]), (1,)), scale=1.0)
d = ProxDenoiser(pot, gamma=1.0)

print("D(2) =", d.denoise(np.array([2.0]))[0])          # 1.5
print("phi(1.5) =", d.phi(np.array([1.5])))             # 1.5^2 / 6
print("weak convexity M =", d.weak_convexity_constant())  # 0.2

###############################################################################
# A grid search over u agrees with the denoiser to the grid step.

res = brute_force_prox(d.phi_batch, np.array([2.0]), 0.0, 3.0, step=1e-3)
print("grid argmin:", res.minimizer[0])

###############################################################################
# On a 3-sample signal the same holds coordinate-wise.

smooth = ProxDenoiser(LinearSmootherPotential(CircularConvOp(np.array([0.25, 0.5, 0.25]), (3,)), 0.9))
z = np.array([0.2, 0.9, 0.4])
res = brute_force_prox(smooth.phi_batch, z, -1.0, 2.0, step=1e-3)
print("D(z)       :", smooth.denoise(z))
print("grid argmin:", res.minimizer)
