"""Linear forward models with circular boundary conditions.

Signals are real ``numpy`` arrays whose trailing ``ndim`` axes are spatial
(``(n,)`` for 1D, ``(h, w)`` for 2D). Any leading axes (colour channels,
batches) are carried along untouched, so a colour image is stored as
``(3, h, w)``.

All operators here are diagonal, or block-diagonal, in the discrete Fourier
basis, which gives exact adjoints and exact spectral norms.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ConvergenceError

__all__ = [
    "LinearOperator",
    "IdentityOp",
    "CircularConvOp",
    "DownsampleOp",
    "gaussian_kernel",
    "uniform_kernel",
    "load_kernel",
    "kernel_bank",
    "power_iteration",
    "spectral_norm",
    "antialias_support",
]


def _axes(ndim):
    return tuple(range(-ndim, 0))


class LinearOperator:
    """Base class for a real linear map between spatial grids.

    Subclasses implement ``_apply`` and ``_adjoint``; shape checking and
    broadcasting over leading axes are handled here.
    """

    def __init__(self, in_shape, out_shape):
        self.in_shape = tuple(int(n) for n in in_shape)
        self.out_shape = tuple(int(n) for n in out_shape)

    @property
    def ndim(self):
        return len(self.in_shape)

    def _check(self, x, shape, what):
        x = np.asarray(x, dtype=float)
        if x.ndim < len(shape) or x.shape[x.ndim - len(shape):] != shape:
            raise ValueError(
                f"{type(self).__name__}.{what} expects trailing shape {shape}, "
                f"got array of shape {x.shape}"
            )
        return x

    def apply(self, x):
        """Return ``A x``."""
        return self._apply(self._check(x, self.in_shape, "apply"))

    def adjoint(self, y):
        """Return ``A^T y``."""
        return self._adjoint(self._check(y, self.out_shape, "adjoint"))

    __call__ = apply

    def normal(self, x):
        """Return ``A^T A x``."""
        return self.adjoint(self.apply(x))

    def norm(self):
        """Spectral norm ``||A||``; generic operators use power iteration."""
        return power_iteration(self)

    def scaled(self, factor):
        raise NotImplementedError

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError


class IdentityOp(LinearOperator):
    """Identity on a grid of the given shape."""

    def __init__(self, shape, scale=1.0):
        super().__init__(shape, shape)
        self.scale = float(scale)

    def _apply(self, x):
        return self.scale * x

    _adjoint = _apply

    def norm(self):
        return abs(self.scale)

    def scaled(self, factor):
        return IdentityOp(self.in_shape, self.scale * factor)


def _embed_kernel(kernel, shape):
    """Place a centred kernel on a periodic grid with its centre at index 0.

    Kernels larger than the grid wrap around and overlapping taps add up.
    """
    kernel = np.asarray(kernel, dtype=float)
    out = np.zeros(shape)
    center = [s // 2 for s in kernel.shape]
    idx = np.indices(kernel.shape).reshape(kernel.ndim, -1)
    target = tuple((idx[d] - center[d]) % shape[d] for d in range(kernel.ndim))
    np.add.at(out, target, kernel.ravel())
    return out


class CircularConvOp(LinearOperator):
    """Circular convolution with a centred kernel of odd side lengths.

    Parameters
    ----------
    kernel : array_like
        Real kernel with ``kernel.ndim == len(shape)``; every side odd.
    shape : tuple of int
        Spatial shape of the signals the operator acts on.

    Notes
    -----
    The Fourier multiplier is the real FFT of the kernel circularly shifted
    so that its centre lies at the origin. ``apply`` multiplies by it,
    ``adjoint`` by its conjugate.
    """

    def __init__(self, kernel, shape):
        kernel = np.asarray(kernel, dtype=float)
        shape = tuple(int(n) for n in shape)
        if kernel.ndim != len(shape):
            raise ValueError(
                f"kernel has {kernel.ndim} dims but signal shape {shape} has {len(shape)}"
            )
        if any(s % 2 == 0 for s in kernel.shape):
            raise ValueError(f"kernel sides must be odd, got {kernel.shape}")
        if not np.all(np.isfinite(kernel)):
            raise ValueError("kernel contains non-finite entries")
        super().__init__(shape, shape)
        self.kernel = kernel
        self._multiplier = np.fft.rfftn(_embed_kernel(kernel, shape))
        self._multiplier.setflags(write=False)

    @property
    def multiplier(self):
        """Real-FFT transfer function of the kernel (read-only)."""
        return self._multiplier

    def fft(self, x):
        return np.fft.rfftn(x, axes=_axes(self.ndim))

    def ifft(self, X):
        return np.fft.irfftn(X, s=self.in_shape, axes=_axes(self.ndim))

    def _apply(self, x):
        return self.ifft(self.fft(x) * self._multiplier)

    def _adjoint(self, y):
        return self.ifft(self.fft(y) * np.conj(self._multiplier))

    def norm(self):
        return float(np.abs(self._multiplier).max())

    def scaled(self, factor):
        return CircularConvOp(self.kernel * factor, self.in_shape)


class DownsampleOp(LinearOperator):
    """Blur followed by ``s``-fold decimation, ``A = S H``.

    ``S`` keeps every ``s``-th sample along each spatial axis starting at
    index 0; its adjoint is zero-insertion upsampling.
    """

    def __init__(self, factor, blur):
        factor = int(factor)
        if factor < 1:
            raise ValueError(f"downsampling factor must be positive, got {factor}")
        if any(n % factor for n in blur.in_shape):
            raise ValueError(
                f"signal shape {blur.in_shape} not divisible by factor {factor}"
            )
        super().__init__(blur.in_shape, tuple(n // factor for n in blur.in_shape))
        self.factor = factor
        self.blur = blur

    def _decimate_index(self):
        return (Ellipsis,) + (slice(None, None, self.factor),) * self.ndim

    def _apply(self, x):
        return self.blur.apply(x)[self._decimate_index()]

    def upsample(self, y):
        """Zero-insertion upsampling ``S^T y``."""
        y = self._check(y, self.out_shape, "upsample")
        out = np.zeros(y.shape[: y.ndim - self.ndim] + self.in_shape)
        out[self._decimate_index()] = y
        return out

    def _adjoint(self, y):
        return self.blur.adjoint(self.upsample(y))

    def norm(self):
        """Exact norm from the aliasing structure of ``S H H^T S^T``.

        ``S H H^T S^T`` is circulant on the coarse grid with multiplier
        ``s^-d * sum_j |h(w + j n / s)|^2`` over the ``s^d`` aliases of ``w``.
        """
        full = np.abs(np.fft.fftn(_embed_kernel(self.blur.kernel, self.in_shape))) ** 2
        s = self.factor
        split = []
        for n in self.in_shape:
            split += [s, n // s]
        folded = full.reshape(split).sum(axis=tuple(range(0, 2 * self.ndim, 2)))
        return float(np.sqrt(folded.max() / s**self.ndim))

    def scaled(self, factor):
        return DownsampleOp(self.factor, self.blur.scaled(factor))


def power_iteration(op, tol=1e-8, max_iter=500, seed=0):
    """Estimate ``||A||`` by power iteration on ``A^T A``.

    Parameters
    ----------
    op : LinearOperator
    tol : float
        Relative change of the estimate below which iteration stops.
    max_iter : int
    seed : int
        Seed of the random starting vector, fixed for reproducibility.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` is reached; ``estimate`` holds the last value.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.in_shape)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = op.normal(v)
        new = math.sqrt(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / np.linalg.norm(w)
        if abs(new - estimate) <= tol * new:
            return new
        estimate = new
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        residual=abs(new - estimate),
        estimate=new,
    )


def spectral_norm(op, method="auto", **kwargs):
    """Spectral norm of ``op``: exact when available, else power iteration."""
    if method == "power":
        return power_iteration(op, **kwargs)
    if method != "auto":
        raise ValueError(f"unknown method {method!r}")
    return op.norm()


def _check_size(size):
    size = int(size)
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {size}")
    return size


def antialias_support(std):
    """Smallest odd integer not below ``6 * std``."""
    size = math.ceil(6 * std)
    return size + 1 if size % 2 == 0 else size


def gaussian_kernel(std, size=None, ndim=2):
    """Isotropic sampled Gaussian normalised to unit sum."""
    if not std > 0:
        raise ValueError(f"Gaussian std must be positive, got {std}")
    size = _check_size(antialias_support(std) if size is None else size)
    r = np.arange(size) - size // 2
    grids = np.meshgrid(*([r] * ndim), indexing="ij")
    k = np.exp(-sum(g**2 for g in grids) / (2 * std**2))
    return k / k.sum()


def uniform_kernel(size, ndim=2):
    size = _check_size(size)
    return np.full((size,) * ndim, 1.0 / size**ndim)


def load_kernel(path):
    """Read a whitespace-separated text matrix and normalise it to unit sum."""
    try:
        k = np.loadtxt(Path(path), ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot read kernel file {path}: {exc}") from exc
    if any(s % 2 == 0 for s in k.shape):
        raise ValueError(f"kernel in {path} has even side length {k.shape}")
    total = k.sum()
    if not np.isfinite(total) or total == 0:
        raise ValueError(f"kernel in {path} cannot be normalised (sum={total})")
    return k / total


def kernel_bank(name, shape, std=None, size=None, path=None):
    """Build the blur operator used in the restoration experiments.

    ``name`` is one of ``"gaussian"`` (``std``, optional ``size``),
    ``"uniform"`` (``size``) or ``"file"`` (``path``).
    """
    ndim = len(shape)
    if name == "gaussian":
        if std is None:
            raise ValueError("gaussian kernel requires std")
        kernel = gaussian_kernel(std, size, ndim=ndim)
    elif name == "uniform":
        kernel = uniform_kernel(9 if size is None else size, ndim=ndim)
    elif name == "file":
        if path is None:
            raise ValueError("file kernel requires path")
        kernel = load_kernel(path)
    else:
        raise ValueError(f"unknown kernel {name!r}")
    return CircularConvOp(kernel, shape)
