"""Quadratic data-fidelity term ``f(x) = 1/2 ||A x - y||^2``."""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator as _ScipyOperator
from scipy.sparse.linalg import cg

from .errors import ConvergenceError
from .operators import CircularConvOp, IdentityOp

__all__ = ["L2Fidelity"]


class L2Fidelity:
    """Least-squares fidelity for a linear forward model.

    The regularisation weight is owned by the algorithm, so ``value`` and
    ``gradient`` are unweighted and ``prox`` takes the weight explicitly.

    Parameters
    ----------
    op : LinearOperator
    y : ndarray
        Observation in the output space of ``op``.
    cg_tol, cg_maxiter :
        Relative tolerance and iteration cap of the conjugate-gradient
        solver used by ``prox`` when no Fourier solution exists.
    """

    def __init__(self, op, y, cg_tol=1e-10, cg_maxiter=500):
        self.op = op
        self.y = op._check(y, op.out_shape, "observation")
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter
        self._lipschitz = None
        self._aty = op.adjoint(self.y)

    @property
    def lipschitz(self):
        """Lipschitz constant of the gradient, ``||A||^2``."""
        if self._lipschitz is None:
            self._lipschitz = self.op.norm() ** 2
        return self._lipschitz

    def residual(self, x):
        return self.op.apply(x) - self.y

    def value(self, x):
        r = self.residual(x)
        return 0.5 * float(np.vdot(r, r))

    def gradient(self, x):
        return self.op.adjoint(self.residual(x))

    def prox(self, x, weight):
        """Solve ``argmin_p 1/2 ||p - x||^2 + weight * f(p)``.

        Exact per Fourier mode for convolutions; conjugate gradient on
        ``(I + weight A^T A) p = x + weight A^T y`` otherwise.
        """
        x = self.op._check(x, self.op.in_shape, "prox")
        if weight < 0:
            raise ValueError(f"prox weight must be non-negative, got {weight}")
        if weight == 0:
            return x.copy()
        op = self.op
        if isinstance(op, IdentityOp):
            s = op.scale
            return (x + weight * s * self.y) / (1.0 + weight * s * s)
        if isinstance(op, CircularConvOp):
            h = op.multiplier
            num = op.fft(x) + weight * np.conj(h) * op.fft(self.y)
            return op.ifft(num / (1.0 + weight * np.abs(h) ** 2))
        return self._prox_cg(x, weight)

    def _prox_cg(self, x, weight):
        shape = x.shape
        n = x.size

        def matvec(v):
            v = v.reshape(shape)
            return (v + weight * self.op.normal(v)).ravel()

        system = _ScipyOperator((n, n), matvec=matvec, dtype=float)
        b = (x + weight * self._aty).ravel()
        p, info = cg(system, b, x0=x.ravel(), rtol=self.cg_tol, atol=0.0,
                     maxiter=self.cg_maxiter)
        res = float(np.linalg.norm(matvec(p) - b))
        if info != 0:
            raise ConvergenceError(
                f"conjugate gradient stopped after {self.cg_maxiter} iterations "
                f"with residual {res:.3e}",
                residual=res,
                estimate=p.reshape(shape),
            )
        return p.reshape(shape)
