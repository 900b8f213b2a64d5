"""Gradient-step denoisers that are exact proximal maps.

A potential ``g`` with ``L``-Lipschitz gradient, ``L < 1``, defines the
denoiser ``D = Id - gamma * grad g``. ``D`` is the proximal map of a
weakly convex regulariser ``phi`` which is known in closed form on the
image of ``D``::

    phi(x) = gamma * g(u) - 1/2 ||u - x||^2,   u = D^{-1}(x),

with the additive constant fixed to zero. Every potential here has a
globally Lipschitz gradient with ``gamma * L < 1``, so ``D`` is a
bijection of the whole space and ``D^{-1}`` is computed by the
contraction ``u <- x + gamma * grad g(u)``.

Like the operators, potentials act on the trailing ``ndim`` axes of a
signal and treat leading axes (channels, batches) independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import expit

from .errors import InversionError
from .operators import CircularConvOp, _axes, _embed_kernel, gaussian_kernel

__all__ = [
    "GradPotential",
    "LinearSmootherPotential",
    "RandomNonlinearPotential",
    "CoerciveWrapper",
    "SumPotential",
    "ProxDenoiser",
    "brute_force_prox",
    "BruteForceResult",
    "estimate_lipschitz",
    "QuadraticRegularizer",
    "MinimaxConcavePenalty",
    "DenoiserRegularizer",
]


class GradPotential:
    """Smooth non-negative potential with certified gradient Lipschitz bound.

    Subclasses set ``shape`` and ``lipschitz`` and implement ``_density``
    (an array that sums to the value) and ``grad``.
    """

    shape: tuple
    lipschitz: float

    @property
    def ndim(self):
        return len(self.shape)

    def value(self, x):
        return float(self._density(np.asarray(x, dtype=float)).sum())

    def values(self, X):
        """Values for a stack of signals along the first axis."""
        X = np.asarray(X, dtype=float)
        return self._density(X).reshape(len(X), -1).sum(axis=1)

    def grad(self, x):
        raise NotImplementedError

    def _density(self, x):
        raise NotImplementedError


class LinearSmootherPotential(GradPotential):
    """``g(x) = c/2 ||x - K x||^2`` for a symmetric smoothing convolution ``K``.

    The smoother's transfer function must be real and lie in ``[0, 1]``.
    ``grad g`` is diagonal in Fourier with symbol ``c (1 - k)^2``, so the
    Lipschitz constant is exact: ``L = c * max (1 - k)^2``.
    """

    def __init__(self, smoother, scale=0.9, tol=1e-9):
        m = smoother.multiplier
        if np.abs(m.imag).max() > tol:
            raise ValueError("smoother transfer function is not real; use a symmetric kernel")
        k = m.real
        if k.min() < -tol or k.max() > 1 + tol:
            raise ValueError(
                f"smoother transfer function must lie in [0, 1], got [{k.min():.3g}, {k.max():.3g}]"
            )
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        self.smoother = smoother
        self.scale = float(scale)
        self.shape = smoother.in_shape
        self.gradient_symbol = self.scale * (1.0 - k) ** 2
        self.lipschitz = float(self.gradient_symbol.max())
        if self.lipschitz >= 1:
            raise ValueError(f"Lipschitz constant {self.lipschitz:.4g} is not below 1")

    @classmethod
    def gaussian(cls, shape, std, scale=None, lipschitz=None, size=None):
        """Gaussian-like smoother of the requested std.

        A truncated sampled Gaussian can have slightly negative Fourier
        coefficients, so the kernel is a Gaussian of std ``std / sqrt(2)``
        convolved with itself; its transfer function is ``|k|^2 >= 0``.
        ``size`` is the side of the half kernel. Give either ``scale`` or
        the target ``lipschitz`` constant; the default is ``lipschitz=0.9``.
        """
        half_std = std / np.sqrt(2.0)
        if size is None:
            size = 2 * int(np.ceil(4 * half_std)) + 1
        half = gaussian_kernel(half_std, size, ndim=len(shape))
        smoother = CircularConvOp(fftconvolve(half, half), shape)
        if scale is None:
            target = 0.9 if lipschitz is None else lipschitz
            scale = target / float(((1.0 - smoother.multiplier.real) ** 2).max())
        elif lipschitz is not None:
            raise ValueError("give scale or lipschitz, not both")
        return cls(smoother, scale=scale)

    def fft(self, x):
        return self.smoother.fft(x)

    def ifft(self, X):
        return self.smoother.ifft(X)

    def _density(self, x):
        r = x - self.smoother.apply(x)
        return 0.5 * self.scale * r**2

    def grad(self, x):
        return self.ifft(self.gradient_symbol * self.fft(x))


def _softplus(t, eps):
    return np.logaddexp(0.0, eps * t) / eps


class RandomNonlinearPotential(GradPotential):
    """Fixed random two-layer convolutional potential.

    ``g(x) = c/2 ||W2 h(W1 x + b)||^2`` with ``h(t) = s(t) - s(t - 1)`` a
    smooth ramp built from two softplus units ``s(t) = log(1 + e^{eps t}) / eps``.
    ``W1`` maps the signal to ``channels`` feature maps by circular
    convolution and ``W2`` sums them back. Equivalently ``g = 1/2 ||x - N(x)||^2``
    with ``N(x) = x - sqrt(c) W2 h(W1 x + b)``.

    ``h`` is bounded with bounded derivatives, which yields the global bound::

        ||hess g|| <= c ||W1||^2 (||W2||^2 max|h'|^2 + max|h''| ||W2^T W2||_inf)

    All three operator quantities are computed exactly from the Fourier
    symbols, and ``c`` is chosen so that this bound equals ``lipschitz``.

    Parameters
    ----------
    shape : tuple of int
        Spatial shape.
    channels : int
        Number of hidden feature maps.
    kernel_size : int
        Odd side length of the random kernels.
    sharpness : float
        Softplus parameter ``eps``.
    input_gain : float
        Scale of ``W1``; larger values move more pixels to the curved part
        of the ramp.
    lipschitz : float
        Certified Lipschitz constant of ``grad g``, in ``(0, 1)``.
    seed : int
    """

    def __init__(self, shape, channels=8, kernel_size=3, sharpness=4.0,
                 input_gain=2.0, lipschitz=0.9, seed=0):
        if not 0 < lipschitz < 1:
            raise ValueError(f"lipschitz must lie in (0, 1), got {lipschitz}")
        self.shape = tuple(int(n) for n in shape)
        self.channels = int(channels)
        self.kernel_size = int(kernel_size)
        self.sharpness = float(sharpness)
        self.input_gain = float(input_gain)
        self.seed = int(seed)
        d = self.ndim
        rng = np.random.default_rng(seed)
        ksh = (self.channels,) + (self.kernel_size,) * d
        w1 = rng.standard_normal(ksh) * (self.input_gain / self.kernel_size ** (d / 2))
        self.bias = rng.uniform(-0.5, 1.5, self.channels)
        w2 = rng.standard_normal(ksh) / np.sqrt(self.channels * self.kernel_size**d)
        self._w1 = np.stack([np.fft.rfftn(_embed_kernel(k, self.shape)) for k in w1])
        self._w2 = np.stack([np.fft.rfftn(_embed_kernel(k, self.shape)) for k in w2])
        self._bias = self.bias.reshape((-1,) + (1,) * d)

        norm_w1 = np.sqrt((np.abs(self._w1) ** 2).sum(axis=0).max())
        norm_w2 = np.sqrt((np.abs(self._w2) ** 2).sum(axis=0).max())
        eps = self.sharpness
        dh_max = np.tanh(eps / 4.0)
        d2h_max = eps / 4.0
        gram = np.fft.irfftn(
            np.conj(self._w2)[:, None] * self._w2[None, :], s=self.shape, axes=_axes(d)
        )
        gram_inf = np.abs(gram).reshape(self.channels, -1).sum(axis=1).max()
        raw = norm_w1**2 * (norm_w2**2 * dh_max**2 + d2h_max * gram_inf)
        self.scale = lipschitz / raw
        self.lipschitz = float(lipschitz)

    def config(self):
        """Constructor arguments, enough to rebuild the potential exactly."""
        return {
            "shape": list(self.shape), "channels": self.channels,
            "kernel_size": self.kernel_size, "sharpness": self.sharpness,
            "input_gain": self.input_gain, "lipschitz": self.lipschitz,
            "seed": self.seed,
        }

    def _fft(self, x):
        return np.fft.rfftn(x, axes=_axes(self.ndim))

    def _ifft(self, X):
        return np.fft.irfftn(X, s=self.shape, axes=_axes(self.ndim))

    def _ramp(self, a):
        eps = self.sharpness
        return _softplus(a, eps) - _softplus(a - 1.0, eps)

    def _ramp_slope(self, a):
        eps = self.sharpness
        return expit(eps * a) - expit(eps * (a - 1.0))

    def _forward(self, x):
        d = self.ndim
        X = np.expand_dims(self._fft(x), -d - 1)
        a = self._ifft(X * self._w1) + self._bias
        r = self._ifft((self._fft(self._ramp(a)) * self._w2).sum(axis=-d - 1))
        return a, r

    def _density(self, x):
        _, r = self._forward(x)
        return 0.5 * self.scale * r**2

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        d = self.ndim
        a, r = self._forward(x)
        R = np.expand_dims(self._fft(r), -d - 1)
        back = self._ifft(np.conj(self._w2) * R) * self._ramp_slope(a)
        out = self._ifft((np.conj(self._w1) * self._fft(back)).sum(axis=-d - 1))
        return self.scale * out


class SumPotential(GradPotential):
    """Weighted sum ``sum_i w_i g_i``; the Lipschitz bounds add up likewise."""

    def __init__(self, terms):
        terms = [(float(w), p) for w, p in terms]
        if not terms or any(w < 0 for w, _ in terms):
            raise ValueError("need at least one term with non-negative weight")
        shapes = {p.shape for _, p in terms}
        if len(shapes) != 1:
            raise ValueError(f"potentials act on different shapes {shapes}")
        self.terms = terms
        self.shape = terms[0][1].shape
        self.lipschitz = float(sum(w * p.lipschitz for w, p in terms))
        if self.lipschitz >= 1:
            raise ValueError(f"Lipschitz constant {self.lipschitz:.4g} is not below 1")

    def _density(self, x):
        return sum(w * p._density(x) for w, p in self.terms)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return sum(w * p.grad(x) for w, p in self.terms)


class CoerciveWrapper(GradPotential):
    """Add a box-distance term so the potential grows outside ``[lo, hi]^n``.

    ``g(x) = s (g_inner(x) + 1/2 ||x - P(x)||^2)`` with ``P`` the clamp onto
    the box. The distance term has a 1-Lipschitz gradient, so
    ``s = lipschitz / (L_inner + 1)`` keeps the certified constant at
    ``lipschitz`` (default: that of the inner potential).
    """

    def __init__(self, inner, lo=-1.0, hi=2.0, lipschitz=None):
        if not lo < hi:
            raise ValueError(f"empty box [{lo}, {hi}]")
        target = inner.lipschitz if lipschitz is None else float(lipschitz)
        if not 0 < target < 1:
            raise ValueError(f"lipschitz must lie in (0, 1), got {target}")
        self.inner = inner
        self.lo, self.hi = float(lo), float(hi)
        self.shape = inner.shape
        self.weight = target / (inner.lipschitz + 1.0)
        self.lipschitz = target

    def _density(self, x):
        dist = x - np.clip(x, self.lo, self.hi)
        return self.weight * (self.inner._density(x) + 0.5 * dist**2)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.weight * (self.inner.grad(x) + x - np.clip(x, self.lo, self.hi))


class ProxDenoiser:
    """Relaxed gradient-step denoiser ``D = Id - gamma * grad g``.

    Parameters
    ----------
    potential : GradPotential
    gamma : float
        Relaxation in ``[0, 1]``; ``gamma * potential.lipschitz`` must be
        below 1.
    tol, max_iter :
        Stopping rule for the inversion of ``D``.
    """

    def __init__(self, potential, gamma=1.0, tol=1e-11, max_iter=10_000):
        if not 0 <= gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        self.potential = potential
        self.gamma = float(gamma)
        self.tol = tol
        self.max_iter = max_iter
        if self.lipschitz >= 1:
            raise ValueError(
                f"gamma * L = {self.lipschitz:.4g} must be below 1 for a proximal denoiser"
            )

    @property
    def lipschitz(self):
        """Lipschitz constant of ``gamma * grad g``."""
        return self.gamma * self.potential.lipschitz

    def weak_convexity_constant(self):
        """Weak convexity constant ``M = gamma L / (gamma L + 1)`` of ``phi``."""
        gl = self.lipschitz
        if gl >= 1:
            raise ValueError(f"gamma * L = {gl} must be below 1")
        return gl / (gl + 1.0)

    def relaxed_gradient(self, x):
        if self.gamma == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return self.gamma * self.potential.grad(x)

    def denoise(self, x):
        x = np.asarray(x, dtype=float)
        return x - self.relaxed_gradient(x)

    __call__ = denoise

    def invert(self, x, guess=None, return_history=False):
        """Return the unique ``u`` with ``D(u) = x``.

        Linear smoothers are inverted exactly in Fourier. Otherwise the
        contraction ``u <- x + gamma grad g(u)`` (factor ``gamma L``) runs
        until ``||D(u) - x|| < tol``.

        Raises
        ------
        InversionError
            If ``max_iter`` iterations do not reach ``tol``.
        """
        x = np.asarray(x, dtype=float)
        pot = self.potential
        if self.gamma == 0:
            return (x.copy(), [0.0]) if return_history else x.copy()
        if hasattr(pot, "gradient_symbol") and not return_history:
            return pot.ifft(pot.fft(x) / (1.0 - self.gamma * pot.gradient_symbol))
        u = x.copy() if guess is None else np.array(guess, dtype=float)
        history = []
        for _ in range(self.max_iter):
            nxt = x + self.relaxed_gradient(u)
            res = float(np.linalg.norm(u - nxt))
            history.append(res)
            if res < self.tol:
                return (u, history) if return_history else u
            u = nxt
        raise InversionError(
            f"denoiser inversion did not reach {self.tol:g} in {self.max_iter} "
            f"iterations (residual {res:.3e}); input may lie outside Im(D)",
            residual=res,
            estimate=u,
        )

    def phi_at_preimage(self, u, x=None):
        """``phi(D(u))`` without any inversion; ``x = D(u)`` may be supplied."""
        u = np.asarray(u, dtype=float)
        if x is None:
            x = self.denoise(u)
        if self.gamma == 0:
            return 0.0
        diff = u - x
        return self.gamma * self.potential.value(u) - 0.5 * float(np.vdot(diff, diff))

    def phi(self, x, preimage=None, guess=None):
        """Implicit regulariser ``phi(x) = gamma g(u) - 1/2 ||u - x||^2``."""
        x = np.asarray(x, dtype=float)
        if self.gamma == 0:
            return 0.0
        u = self.invert(x, guess=guess) if preimage is None else preimage
        return self.phi_at_preimage(u, x)

    def phi_batch(self, X):
        """``phi`` for a stack of signals along the first axis."""
        X = np.asarray(X, dtype=float)
        if self.gamma == 0:
            return np.zeros(len(X))
        U = self.invert(X)
        diff = (U - X).reshape(len(X), -1)
        return self.gamma * self.potential.values(U) - 0.5 * (diff**2).sum(axis=1)

    def phi_grad(self, x, guess=None):
        """``grad phi(x) = D^{-1}(x) - x``."""
        x = np.asarray(x, dtype=float)
        return self.invert(x, guess=guess) - x

    def phi_grad_lipschitz(self):
        """Lipschitz constant ``gamma L / (1 - gamma L)`` of ``grad phi``."""
        gl = self.lipschitz
        return gl / (1.0 - gl)


@dataclass
class BruteForceResult:
    minimizer: np.ndarray
    value: float
    margin: float


def brute_force_prox(phi_oracle, z, lo, hi, step=1e-3, coarse=41, window=3):
    """Grid search for ``argmin_u 1/2 ||u - z||^2 + phi(u)`` in dimension <= 3.

    An exhaustive coarse grid over ``[lo, hi]^n`` is refined around the
    best point, ``window`` cells either side, until the cell size equals
    ``step``. The objective is strongly convex for proximal denoisers, so
    refinement cannot lose the minimiser.

    Parameters
    ----------
    phi_oracle : callable
        Maps a stack ``(N,) + z.shape`` of points to ``N`` values of ``phi``.
    z : array_like
        Point whose proximal map is sought, at most 3 entries.

    Returns
    -------
    BruteForceResult
        ``margin`` is the smallest objective increase found on the border
        of the final window; positive means the minimum is bracketed.

    Raises
    ------
    ValueError
        If the minimiser lies on the border of the search box or window.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if not 1 <= n <= 3:
        raise ValueError(f"brute force is limited to dimension <= 3, got {n}")
    zf = z.ravel()

    def objective(U):
        return 0.5 * ((U - zf) ** 2).sum(axis=1) + np.asarray(
            phi_oracle(U.reshape((len(U),) + z.shape)), dtype=float
        )

    h = (hi - lo) / (coarse - 1)
    start = np.full(n, float(lo))
    count = coarse
    first = True
    while True:
        axes = [start[i] + h * np.arange(count) for i in range(n)]
        U = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = objective(U)
        best = int(np.argmin(vals))
        ijk = np.unravel_index(best, (count,) * n)
        if any(i in (0, count - 1) for i in ijk):
            where = "search box" if first else "refinement window"
            raise ValueError(f"minimum lies on the border of the {where}; grid does not bracket it")
        if h <= step * (1 + 1e-12):
            grid = vals.reshape((count,) * n)
            border = np.ones(grid.shape, dtype=bool)
            border[(slice(1, -1),) * n] = False
            return BruteForceResult(U[best].reshape(z.shape), float(vals[best]),
                                    float(grid[border].min() - vals[best]))
        new_h = max(step, h / 10)
        count = int(round(2 * window * h / new_h)) + 1
        start = U[best] - window * h
        h = new_h
        first = False


def estimate_lipschitz(potential, points, n_iter=30, fd_step=1e-5, seed=0):
    """Largest Hessian norm of ``potential`` at ``points`` by power iteration.

    Hessian-vector products use central differences of the gradient. This is
    a sampled, local estimate; it does not certify a global bound.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for x in points:
        v = rng.standard_normal(np.shape(x))
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(n_iter):
            hv = (potential.grad(x + fd_step * v) - potential.grad(x - fd_step * v)) / (2 * fd_step)
            est = float(np.linalg.norm(hv))
            if est == 0:
                break
            v = hv / est
        best = max(best, est)
    return best


# Weakly convex regularisers with a proximal map at arbitrary stepsize.
# They drive the generic-stepsize PGD and alpha-PGD schemes.


class QuadraticRegularizer:
    """``phi(x) = 1/2 <x, Q x>`` for a circulant ``Q`` with real symbol ``q``."""

    def __init__(self, symbol, fft, ifft):
        self.symbol = np.asarray(symbol, dtype=float)
        self._fft, self._ifft = fft, ifft
        self.weak_convexity = max(0.0, -float(self.symbol.min()))

    @classmethod
    def from_denoiser(cls, d):
        """Regulariser whose unit-step proximal map is a linear-smoother denoiser."""
        pot = d.potential
        if not hasattr(pot, "gradient_symbol"):
            raise TypeError("closed-form regulariser needs a Fourier-diagonal potential")
        dsym = 1.0 - d.gamma * pot.gradient_symbol
        return cls(1.0 / dsym - 1.0, pot.fft, pot.ifft)

    def value(self, x):
        Qx = self._ifft(self.symbol * self._fft(x))
        return 0.5 * float(np.vdot(x, Qx))

    def grad(self, x):
        return self._ifft(self.symbol * self._fft(x))

    def prox(self, x, tau):
        denom = 1.0 + tau * self.symbol
        if denom.min() <= 0:
            raise ValueError(f"prox of stepsize {tau} is not defined for this quadratic")
        return self._ifft(self._fft(x) / denom)


class MinimaxConcavePenalty:
    """Separable minimax concave penalty, ``1/concavity``-weakly convex.

    Per entry ``p(t) = threshold |t| - t^2 / (2 concavity)`` for
    ``|t| <= concavity * threshold`` and ``concavity * threshold^2 / 2``
    beyond. Its proximal map is firm thresholding, defined for
    ``tau < concavity``.
    """

    def __init__(self, threshold, concavity):
        if not threshold > 0 or not concavity > 0:
            raise ValueError("threshold and concavity must be positive")
        self.threshold = float(threshold)
        self.concavity = float(concavity)
        self.weak_convexity = 1.0 / self.concavity

    def value(self, x):
        t = np.abs(np.asarray(x, dtype=float))
        th, b = self.threshold, self.concavity
        inner = th * t - t**2 / (2 * b)
        return float(np.where(t <= b * th, inner, 0.5 * b * th**2).sum())

    def prox(self, x, tau):
        th, b = self.threshold, self.concavity
        if not tau < b:
            raise ValueError(f"firm thresholding needs tau < {b}, got {tau}")
        x = np.asarray(x, dtype=float)
        t = np.abs(x)
        shrunk = np.sign(x) * (t - tau * th) / (1.0 - tau / b)
        out = np.where(t <= tau * th, 0.0, shrunk)
        return np.where(t > b * th, x, out)


class DenoiserRegularizer:
    """The implicit regulariser of a denoiser; its prox exists only at step 1."""

    def __init__(self, d):
        self.denoiser = d
        self.weak_convexity = d.weak_convexity_constant()

    def value(self, x):
        return self.denoiser.phi(x)

    def prox(self, x, tau):
        if tau != 1:
            raise ValueError(f"a proximal denoiser only provides Prox_phi at stepsize 1, got {tau}")
        return self.denoiser.denoise(x)
