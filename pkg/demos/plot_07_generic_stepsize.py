"""
Stepsizes away from one
=======================

With a regulariser whose prox is known for every stepsize, PGD and its
averaged variant accept ``tau != 1``. The minimax concave penalty is
weakly convex with constant ``1 / concavity``.
"""

import numpy as np

from proxpnp.algorithms import AlgoConfig, Problem, run, validate_alpha_pgd, validate_pgd
from proxpnp.fidelity import L2Fidelity
from proxpnp.operators import CircularConvOp, gaussian_kernel
from proxpnp.prior import MinimaxConcavePenalty

rng = np.random.default_rng(1)
truth = np.where(rng.uniform(size=(32, 32)) < 0.05, 1.0, 0.0)  # sparse spikes
op = CircularConvOp(gaussian_kernel(1.0, 7), truth.shape)
fid = L2Fidelity(op, op.apply(truth) + 0.01 * rng.standard_normal(truth.shape))
reg = MinimaxConcavePenalty(threshold=0.05, concavity=2.0)
prob = Problem(fid, fid.y, regularizer=reg, reference=truth)

rep = validate_pgd(1.0, fid.lipschitz, tau=1.0, weak_convexity=reg.weak_convexity)
print(rep.message)
tau = 0.95 * rep.bound
out = run("pgd_generic", prob, AlgoConfig(lam=1.0, tau=tau, max_iter=300))
print(f"pgd tau={tau:.3f}: merit {out.rows[0].lyapunov:.4f} -> {out.rows[-1].lyapunov:.4f}")

rep = validate_alpha_pgd(1.0, 0.6, fid.lipschitz, reg.weak_convexity, generic=True, refined=True)
print(rep.message)
out = run("alpha_pgd_generic", prob, AlgoConfig(lam=1.0, alpha=0.6, tau=0.95 * rep.bound,
                                                max_iter=300, refined_bound=True))
print(f"averaged: max violation {out.max_violation:.1e}, psnr {out.rows[-1].psnr:.2f} dB")
