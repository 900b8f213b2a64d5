"""
Degradation operators
=====================

Blur and decimation are applied in the Fourier domain with periodic
boundaries. Their spectral norms are exact, and a power iteration
gives the same number.
"""

import numpy as np

from proxpnp.operators import CircularConvOp, DownsampleOp, gaussian_kernel, power_iteration

rng = np.random.default_rng(0)
x = rng.uniform(0, 1, (32, 32))

# a 25x25 Gaussian blur of std 1.6
blur = CircularConvOp(gaussian_kernel(1.6, 25), x.shape)
print("blur norm (exact):", blur.norm())
print("blur norm (power):", power_iteration(blur, tol=1e-12))

# blur then keep every second sample
sr = DownsampleOp(2, CircularConvOp(gaussian_kernel(0.7), x.shape))
y = sr.apply(x)
print("observation shape:", y.shape)

# the adjoint passes the dot test
v = rng.standard_normal(y.shape)
print("dot test gap:", abs(np.vdot(sr.apply(x), v) - np.vdot(x, sr.adjoint(v))))
# the top of the decimated spectrum is nearly degenerate, so the iteration is slow
print("decimation norm (exact, power):", sr.norm(), power_iteration(sr, tol=1e-10, max_iter=20000))
