"""Decreasing merit functions, residuals and image metrics.

All merit functions use the zero additive constant of the implicit
regulariser, so only their differences along a run are meaningful.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "TraceRow",
    "lyap_pgd",
    "lyap_alpha_pgd",
    "lyap_drs",
    "objective",
    "residual",
    "running_residual",
    "psnr",
    "stationarity",
    "rate_slope",
    "write_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("k", "lyapunov", "residual", "psnr", "violation")


@dataclass
class TraceRow:
    """Per-iteration record.

    ``residual`` is the running minimum of ``||x_i - x_{i-1}||^2 / ||x_0||^2``
    over ``1 <= i <= k`` (NaN at ``k = 0``); ``step`` is the unminimised
    value at ``k``. ``violation`` is ``max(0, lyapunov_k - lyapunov_{k-1})``.
    """

    k: int
    lyapunov: float
    objective: float = math.nan
    residual: float = math.nan
    step: float = math.nan
    psnr: float = math.nan
    violation: float = 0.0


def lyap_pgd(x, preimage, fid, d, lam):
    """``lam f(x) + gamma g(z) - 1/2 ||z - x||^2`` with ``x = D(z)``.

    Equals ``lam f(x) + phi(x)`` but needs no inversion.
    """
    return lam * fid.value(x) + d.phi_at_preimage(preimage, x)


def lyap_alpha_pgd(y, y_prev, fid, d, lam, alpha, tau=1.0, phi_value=None, guess=None):
    """``lam f(y) + phi(y) + alpha/(2 tau) (1 - 1/alpha)^2 ||y - y_prev||^2``.

    ``phi_value`` may be passed when ``phi(y)`` is already known; otherwise
    ``d`` must provide ``phi``, which inverts the denoiser at ``y``.
    """
    if phi_value is None:
        phi_value = d.phi(y, guess=guess)
    diff = np.asarray(y) - np.asarray(y_prev)
    inertia = alpha / (2 * tau) * (1 - 1 / alpha) ** 2 * float(np.vdot(diff, diff))
    return lam * fid.value(y) + phi_value + inertia


def lyap_drs(x_prev, y, z, fid, d, lam, variant="drs", preimage=None):
    """Douglas-Rachford envelope for the two orderings of the splitting.

    ``variant="drs"`` (denoiser first): ``lam f(z) + phi(y) + <y - x, y - z> + 1/2 ||y - z||^2``
    with ``y = D(x)``. ``variant="drsdiff"`` (data prox first): ``lam f(y) + phi(z) + ...``
    with ``z = D(2y - x)``. The preimage of the denoised point is known in
    both cases, so no inversion is run unless ``preimage`` is overridden.
    """
    x_prev, y, z = (np.asarray(a, dtype=float) for a in (x_prev, y, z))
    gap = y - z
    coupling = float(np.vdot(y - x_prev, gap)) + 0.5 * float(np.vdot(gap, gap))
    if variant == "drs":
        u = x_prev if preimage is None else preimage
        return lam * fid.value(z) + d.phi_at_preimage(u, y) + coupling
    if variant == "drsdiff":
        u = 2 * y - x_prev if preimage is None else preimage
        return lam * fid.value(y) + d.phi_at_preimage(u, z) + coupling
    raise ValueError(f"unknown envelope variant {variant!r}")


def objective(x, fid, d, lam, preimage=None):
    """``lam f(x) + phi(x)``; inverts the denoiser unless ``preimage`` is given."""
    if preimage is not None:
        return lam * fid.value(x) + d.phi_at_preimage(preimage, x)
    return lam * fid.value(x) + d.phi(x)


def _norm0(x0):
    n = float(np.vdot(x0, x0))
    return n if n > 0 else 1.0


def residual(x_next, x, x0):
    """``||x_next - x||^2 / ||x0||^2``; a zero ``x0`` normalises by 1."""
    diff = np.asarray(x_next) - np.asarray(x)
    return float(np.vdot(diff, diff)) / _norm0(x0)


def running_residual(iterates):
    """``gamma_k = min_{i <= k} ||x_{i+1} - x_i||^2 / ||x_0||^2`` for a sequence.

    Returns an array of length ``len(iterates) - 1``.
    """
    x0 = iterates[0]
    steps = [residual(b, a, x0) for a, b in zip(iterates[:-1], iterates[1:])]
    return np.minimum.accumulate(np.array(steps, dtype=float)) if steps else np.array([])


def psnr(x, reference, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``inf`` when the images coincide."""
    x = np.asarray(x, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if x.shape != reference.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {reference.shape}")
    mse = float(np.mean((x - reference) ** 2))
    if mse == 0:
        return math.inf
    return 10 * math.log10(peak**2 / mse)


def stationarity(x, fid, d, lam):
    """``||lam grad f(x) + grad phi(x)||``, zero at critical points."""
    return float(np.linalg.norm(lam * fid.gradient(x) + d.phi_grad(x)))


def rate_slope(rows, floor=1e-26):
    """Least-squares slope of ``log gamma_k`` against ``log k``.

    Rows at ``k = 0`` and residuals at or below ``floor`` (where rounding
    takes over) are excluded. Returns NaN with fewer than 3 usable rows.
    """
    k = np.array([r.k for r in rows], dtype=float)
    g = np.array([r.residual for r in rows], dtype=float)
    keep = (k >= 1) & np.isfinite(g) & (g > floor)
    if keep.sum() < 3:
        return math.nan
    slope, _ = np.polyfit(np.log(k[keep]), np.log(g[keep]), 1)
    return float(slope)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(rows, path):
    """Write the trace with columns ``k, lyapunov, residual, psnr, violation``.

    Floats are written with ``repr`` so identical runs give identical files.
    """
    names = {f.name for f in fields(TraceRow)}
    assert set(CSV_COLUMNS) <= names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
