"""Plug-and-play proximal schemes with a proximal denoiser, and their validators.

Every scheme targets critical points of ``lam f + phi`` where ``phi`` is
the implicit regulariser of the denoiser. The denoiser only provides
``Prox_phi`` at unit stepsize, so all the denoiser-driven schemes run with
``tau = 1``. ``pgd_generic`` and ``alpha_pgd_generic`` take an explicit
weakly convex regulariser with a proximal map at any stepsize, which is
how the general stepsize conditions are exercised.

Schemes
-------
pgd
    ``x+ = D(x - lam grad f(x))``
alpha_pgd
    ``q = (1-a) y + a x``, ``x+ = D(x - lam grad f(q))``, ``y+ = (1-a) y + a x+``
pd_form
    The same iterates written as a primal-dual method with extrapolation.
drs
    ``y = D(x)``, ``z = Prox_{lam f}(2y - x)``, ``x+ = x + 2 beta (z - y)``
drsdiff
    ``y = Prox_{lam f}(x)``, ``z = D(2y - x)``, ``x+ = x + 2 beta (z - y)``
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import monitors as mon
from .errors import ConvergenceError, ValidationError

__all__ = [
    "Scheme",
    "AlgoConfig",
    "AlgoState",
    "Problem",
    "BoundReport",
    "RunReport",
    "pgd_step",
    "alpha_pgd_step",
    "pd_form_step",
    "drs_step",
    "drsdiff_step",
    "pgd_generic_step",
    "alpha_pgd_generic_step",
    "init_state",
    "validate_pgd",
    "validate_alpha_pgd",
    "validate_drs",
    "validate_drsdiff",
    "drs_cubic",
    "drs_lipschitz_limit",
    "drs_decrease_constant",
    "validate",
    "run",
]

BOUNDARY_RTOL = 1e-9


class Scheme(str, Enum):
    PGD = "pgd"
    ALPHA_PGD = "alpha_pgd"
    DRS = "drs"
    DRSDIFF = "drsdiff"
    PGD_GENERIC = "pgd_generic"
    ALPHA_PGD_GENERIC = "alpha_pgd_generic"
    PD_FORM = "pd_form"


GENERIC = (Scheme.PGD_GENERIC, Scheme.ALPHA_PGD_GENERIC)


@dataclass
class AlgoConfig:
    """Run parameters.

    ``lam`` weighs the data term. ``alpha`` is for the averaged schemes,
    ``beta`` for the Douglas-Rachford schemes and ``tau`` for the generic
    schemes only (denoiser-driven schemes reject ``tau != 1``). ``unsafe`` lets a
    configuration that fails its validator run anyway.
    """

    lam: float
    alpha: float = 1.0
    beta: float = 0.5
    tau: float = 1.0
    max_iter: int = 1000
    stop_residual: float = 1e-8
    unsafe: bool = False
    refined_bound: bool = False
    keep_iterates: bool = False


@dataclass
class AlgoState:
    """Iterates of one scheme after ``k`` steps.

    pgd: ``x`` and ``z`` with ``x = D(z)``.
    alpha_pgd / pd_form: ``x``, ``z`` (preimage of ``x``), the average ``y``,
    ``y_prev``, the extrapolation point ``q`` and, for pd_form, ``x_bar``.
    drs / drsdiff: ``x`` together with the pair ``(y, z)`` computed from
    this ``x``; the next step only applies ``x + 2 beta (z - y)``.
    """

    k: int
    x: np.ndarray
    z: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    y_prev: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    x_bar: Optional[np.ndarray] = None
    x_prev: Optional[np.ndarray] = None
    y_preimage: Optional[np.ndarray] = None


@dataclass
class Problem:
    """Data term, prior and starting point of a run.

    ``denoiser`` feeds the denoiser-driven schemes, ``regularizer`` (anything with
    ``value``, ``prox(x, tau)`` and ``weak_convexity``) the generic ones.
    """

    fidelity: Any
    x0: np.ndarray
    denoiser: Any = None
    regularizer: Any = None
    reference: Optional[np.ndarray] = None


# steps


def pgd_step(state, fid, d, cfg):
    z = state.x - cfg.lam * fid.gradient(state.x)
    return AlgoState(state.k + 1, d.denoise(z), z=z, x_prev=state.x)


def alpha_pgd_step(state, fid, d, cfg):
    a = cfg.alpha
    q = (1 - a) * state.y + a * state.x
    z = state.x - cfg.lam * fid.gradient(q)
    x = d.denoise(z)
    y = (1 - a) * state.y + a * x
    return AlgoState(state.k + 1, x, z=z, y=y, y_prev=state.y, q=q, x_prev=state.x)


def pd_form_step(state, fid, d, cfg):
    """Primal-dual form: ``y_pd`` is an average of the extrapolated primal point.

    ``L_f / sigma = (1 - alpha) / alpha`` and the extrapolation weight is
    ``1 - alpha``; ``q`` holds the dual-side average ``y_pd``.
    """
    a = cfg.alpha
    ratio = (1 - a) / a
    q = (state.x_bar + ratio * state.q) / (1 + ratio)
    z = state.x - cfg.lam * fid.gradient(q)
    x = d.denoise(z)
    x_bar = x + (1 - a) * (x - state.x)
    y = (1 - a) * state.y + a * x
    return AlgoState(state.k + 1, x, z=z, y=y, y_prev=state.y, q=q, x_bar=x_bar,
                     x_prev=state.x)


def _drs_pair(x, fid, d, lam):
    y = d.denoise(x)
    return y, fid.prox(2 * y - x, lam)


def _drsdiff_pair(x, fid, d, lam):
    y = fid.prox(x, lam)
    return y, d.denoise(2 * y - x)


def drs_step(state, fid, d, cfg):
    x = state.x + 2 * cfg.beta * (state.z - state.y)
    y, z = _drs_pair(x, fid, d, cfg.lam)
    return AlgoState(state.k + 1, x, y=y, z=z, x_prev=state.x)


def drsdiff_step(state, fid, d, cfg):
    x = state.x + 2 * cfg.beta * (state.z - state.y)
    y, z = _drsdiff_pair(x, fid, d, cfg.lam)
    return AlgoState(state.k + 1, x, y=y, z=z, x_prev=state.x)


def pgd_generic_step(state, fid, reg, cfg):
    t = cfg.tau
    x = reg.prox(state.x - t * cfg.lam * fid.gradient(state.x), t)
    return AlgoState(state.k + 1, x, x_prev=state.x)


def alpha_pgd_generic_step(state, fid, reg, cfg):
    a, t = cfg.alpha, cfg.tau
    q = (1 - a) * state.y + a * state.x
    x = reg.prox(state.x - t * cfg.lam * fid.gradient(q), t)
    y = (1 - a) * state.y + a * x
    return AlgoState(state.k + 1, x, y=y, y_prev=state.y, q=q, x_prev=state.x)


_STEPS = {
    Scheme.PGD: pgd_step,
    Scheme.ALPHA_PGD: alpha_pgd_step,
    Scheme.PD_FORM: pd_form_step,
    Scheme.DRS: drs_step,
    Scheme.DRSDIFF: drsdiff_step,
    Scheme.PGD_GENERIC: pgd_generic_step,
    Scheme.ALPHA_PGD_GENERIC: alpha_pgd_generic_step,
}


def init_state(scheme, problem, cfg):
    scheme = Scheme(scheme)
    x0 = np.array(problem.x0, dtype=float)
    fid, d = problem.fidelity, problem.denoiser
    if scheme is Scheme.PGD:
        return AlgoState(0, x0)
    if scheme in (Scheme.ALPHA_PGD, Scheme.ALPHA_PGD_GENERIC):
        return AlgoState(0, x0, y=x0.copy(), y_prev=x0.copy())
    if scheme is Scheme.PD_FORM:
        return AlgoState(0, x0, y=x0.copy(), y_prev=x0.copy(), q=x0.copy(), x_bar=x0.copy())
    if scheme is Scheme.DRS:
        y, z = _drs_pair(x0, fid, d, cfg.lam)
        return AlgoState(0, x0, y=y, z=z)
    if scheme is Scheme.DRSDIFF:
        y, z = _drsdiff_pair(x0, fid, d, cfg.lam)
        return AlgoState(0, x0, y=y, z=z)
    return AlgoState(0, x0)


# validators


@dataclass
class BoundReport:
    """Outcome of a convergence-condition check.

    ``passed`` means every inequality holds strictly. ``on_boundary`` means
    they hold with at least one equality (to relative ``1e-9``); the merit
    function is then still non-increasing but sufficient decrease is lost.
    ``bound`` and ``value`` are the binding limit and the checked quantity.
    """

    validator: str
    passed: bool
    on_boundary: bool
    bound: float
    value: float
    message: str
    extras: dict = field(default_factory=dict)

    @property
    def admissible(self):
        return self.passed or self.on_boundary

    def to_dict(self):
        out = {"validator": self.validator, "bound": self.bound, "value": self.value,
               "pass": self.passed, "onBoundary": self.on_boundary, "message": self.message}
        out.update(self.extras)
        return out


def _le(a, b):
    return a <= b or math.isclose(a, b, rel_tol=BOUNDARY_RTOL, abs_tol=1e-15)


def _judge(name, conditions, bound, value, describe, extras=None):
    """``conditions`` is a list of ``(lhs, rhs)`` requiring ``lhs < rhs``."""
    strict = all(lhs < rhs and not math.isclose(lhs, rhs, rel_tol=BOUNDARY_RTOL, abs_tol=1e-15)
                 for lhs, rhs in conditions)
    weak = all(_le(lhs, rhs) for lhs, rhs in conditions)
    if strict:
        status = "satisfied"
    elif weak:
        status = "holds with equality (boundary)"
    else:
        status = "violated"
    return BoundReport(name, strict, weak and not strict, float(bound), float(value),
                       f"{name}: {describe} {status}", extras or {})


def validate_pgd(lam, lipschitz_f, denoiser_lipschitz=None, *, tau=1.0, weak_convexity=None):
    """Stepsize condition of proximal gradient descent.

    With ``denoiser_lipschitz = gamma L_g`` given, checks the unit-stepsize
    condition ``lam L_f < (L + 2) / (L + 1)``; ``bound`` is the largest
    admissible ``lam``. Otherwise checks ``tau < max(2 / (lam L_f + M), 1 / (lam L_f))``
    for an ``M``-weakly convex regulariser.
    """
    if denoiser_lipschitz is not None:
        L = float(denoiser_lipschitz)
        if not 0 <= L < 1:
            raise ValueError(f"denoiser Lipschitz constant must lie in [0, 1), got {L}")
        limit = 1 + 1 / (L + 1)
        bound = limit / lipschitz_f if lipschitz_f > 0 else math.inf
        return _judge("pgd", [(lam * lipschitz_f, limit)], bound, lam,
                      f"lam L_f = {lam * lipschitz_f:.6g} < (L+2)/(L+1) = {limit:.6g}",
                      {"lambdaLimit": bound})
    if weak_convexity is None:
        raise ValueError("generic mode needs the weak convexity constant")
    s = lam * lipschitz_f
    M = float(weak_convexity)
    cands = [2 / (s + M) if s + M > 0 else math.inf, 1 / s if s > 0 else math.inf]
    bound = max(cands)
    return _judge("pgd_generic", [(tau, bound)], bound, tau,
                  f"tau = {tau:.6g} < max(2/(lam L_f + M), 1/(lam L_f)) = {bound:.6g}")


def validate_alpha_pgd(lam, alpha, lipschitz_f, weak_convexity, *, tau=1.0, generic=False,
                       refined=False):
    """Conditions of the averaged (alpha) proximal gradient scheme.

    Unit-stepsize form: ``lam L_f M < 1`` and ``M < alpha < 1 / (lam L_f)``;
    ``bound`` is ``lam_lim = 1 / (L_f M)`` and ``extras["alphaInterval"]``
    the feasible ``alpha`` range. Generic form: ``tau < min(1/(alpha lam L_f), alpha/M)``,
    or with ``refined`` the larger second term ``2 alpha / (alpha^3 lam L_f + (2 - alpha) M)``.
    """
    s = lam * lipschitz_f
    M = float(weak_convexity)
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    inv_s = 1 / s if s > 0 else math.inf
    extras = {
        "alphaInterval": [M, inv_s],
        "lambdaLimit": (1 / (lipschitz_f * M)) if M > 0 and lipschitz_f > 0 else math.inf,
    }
    refined_bound = min(1 / (alpha * s) if s > 0 else math.inf,
                        2 * alpha / (alpha**3 * s + (2 - alpha) * M) if alpha**3 * s + (2 - alpha) * M > 0
                        else math.inf)
    extras["refinedTauBound"] = refined_bound
    if not generic:
        if tau != 1:
            raise ValueError("the denoiser-driven form runs at tau = 1")
        conds = [(s * M, 1.0), (M, alpha), (alpha, inv_s)]
        return _judge("alpha_pgd", conds, extras["lambdaLimit"], lam,
                      f"lam L_f M = {s * M:.6g} < 1 and M = {M:.6g} < alpha = {alpha:.6g} "
                      f"< 1/(lam L_f) = {inv_s:.6g}", extras)
    if refined:
        bound = refined_bound
        text = "min(1/(alpha lam L_f), 2 alpha/(alpha^3 lam L_f + (2-alpha) M))"
    else:
        bound = min(1 / (alpha * s) if s > 0 else math.inf, alpha / M if M > 0 else math.inf)
        text = "min(1/(alpha lam L_f), alpha/M)"
    return _judge("alpha_pgd_generic", [(tau, bound)], bound, tau,
                  f"tau = {tau:.6g} < {text} = {bound:.6g}", extras)


def drs_cubic(beta, L):
    """``beta (2L^3 - 3L^2 + 1) + (2L^2 + L - 1)``; negative means admissible."""
    return beta * (2 * L**3 - 3 * L**2 + 1) + (2 * L**2 + L - 1)


def drs_lipschitz_limit(beta, tol=1e-13):
    """Root in ``(0, 1/2)`` of the DRS cubic in ``L``, found by bisection.

    The cubic equals ``beta - 1 < 0`` at 0 and ``beta / 2 > 0`` at 1/2 and is
    increasing in between, so the root is the largest admissible ``L``.
    """
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if drs_cubic(beta, mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def validate_drs(beta, L):
    """Check the DRS cubic condition for denoiser Lipschitz constant ``L = gamma L_g``."""
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if not 0 <= L < 1:
        raise ValueError(f"L must lie in [0, 1), got {L}")
    limit = drs_lipschitz_limit(beta)
    value = drs_cubic(beta, L)
    rep = _judge("drs", [(value, 0.0)], limit, L,
                 f"cubic(beta={beta:.6g}, L={L:.6g}) = {value:.6g} < 0 (L < {limit:.6f})",
                 {"lipschitzLimit": limit, "cubic": value})
    return rep


def drs_decrease_constant(beta, L, rigorous=False):
    """Sufficient-decrease constant of the DRS envelope.

    Default is ``1/2 (1 - L) ((1/beta)(1 - L^2/(1-L)^2) - (1 + M))`` with
    ``M = L / (L + 1)``. ``rigorous=True`` returns the constant that the
    supporting chain of inequalities yields, with ``(1 - L)^2`` in front;
    it is smaller, so it is the one the trace tests rely on.
    """
    M = L / (L + 1)
    inner = (1 / beta) * (1 - L**2 / (1 - L) ** 2) - (1 + M)
    front = (1 - L) ** 2 if rigorous else (1 - L)
    return 0.5 * front * inner


def validate_drsdiff(lam, lipschitz_f):
    """Check ``lam L_f < 1`` for the splitting with the data prox first."""
    s = lam * lipschitz_f
    bound = 1 / lipschitz_f if lipschitz_f > 0 else math.inf
    return _judge("drsdiff", [(s, 1.0)], bound, lam, f"lam L_f = {s:.6g} < 1")


def _check_cfg(scheme, cfg):
    if cfg.lam < 0:
        raise ValueError(f"lam must be non-negative, got {cfg.lam}")
    if cfg.max_iter < 0:
        raise ValueError("max_iter must be non-negative")
    if scheme in (Scheme.ALPHA_PGD, Scheme.PD_FORM, Scheme.ALPHA_PGD_GENERIC) and not 0 < cfg.alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {cfg.alpha}")
    if scheme in (Scheme.DRS, Scheme.DRSDIFF) and not 0 < cfg.beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {cfg.beta}")
    if scheme in GENERIC:
        if not cfg.tau > 0:
            raise ValueError(f"tau must be positive, got {cfg.tau}")
    elif cfg.tau != 1:
        raise ValueError(f"{scheme.value} runs at tau = 1; use the generic scheme for other stepsizes")


def validate(scheme, problem, cfg):
    """Run the validator matching ``scheme`` on the problem's constants."""
    scheme = Scheme(scheme)
    _check_cfg(scheme, cfg)
    Lf = problem.fidelity.lipschitz
    if scheme in GENERIC:
        M = problem.regularizer.weak_convexity
        if scheme is Scheme.PGD_GENERIC:
            return validate_pgd(cfg.lam, Lf, tau=cfg.tau, weak_convexity=M)
        return validate_alpha_pgd(cfg.lam, cfg.alpha, Lf, M, tau=cfg.tau, generic=True,
                                  refined=cfg.refined_bound)
    d = problem.denoiser
    if scheme is Scheme.PGD:
        return validate_pgd(cfg.lam, Lf, d.lipschitz)
    if scheme in (Scheme.ALPHA_PGD, Scheme.PD_FORM):
        return validate_alpha_pgd(cfg.lam, cfg.alpha, Lf, d.weak_convexity_constant())
    if scheme is Scheme.DRS:
        return validate_drs(cfg.beta, d.lipschitz)
    return validate_drsdiff(cfg.lam, Lf)


# runs


@dataclass
class RunReport:
    scheme: Scheme
    config: AlgoConfig
    bound: BoundReport
    rows: list
    state: AlgoState
    estimate: np.ndarray
    stop_reason: str
    error: Optional[str] = None
    iterates: Optional[list] = None

    @property
    def iterations(self):
        return self.state.k

    @property
    def max_violation(self):
        return max((r.violation for r in self.rows), default=0.0)

    def rate_slope(self, floor=1e-26):
        return mon.rate_slope(self.rows, floor)

    def to_csv(self, path):
        mon.write_csv(self.rows, path)


def _estimate(scheme, state):
    if scheme in (Scheme.ALPHA_PGD, Scheme.PD_FORM, Scheme.ALPHA_PGD_GENERIC):
        return state.y
    if scheme is Scheme.DRS:
        return state.y
    if scheme is Scheme.DRSDIFF:
        return state.z
    return state.x


def _merit(scheme, state, problem, cfg):
    """Return ``(lyapunov, objective)`` at ``state``; may update ``y_preimage``."""
    fid, d, reg, lam = problem.fidelity, problem.denoiser, problem.regularizer, cfg.lam
    if scheme is Scheme.PGD:
        u = state.z if state.z is not None else d.invert(state.x)
        v = mon.lyap_pgd(state.x, u, fid, d, lam)
        return v, v
    if scheme in (Scheme.ALPHA_PGD, Scheme.PD_FORM):
        a = cfg.alpha
        if state.k == 0:
            guess = None
        elif state.y_preimage is None:
            guess = state.z
        else:
            guess = (1 - a) * state.y_preimage + a * state.z
        u = d.invert(state.y, guess=guess)
        state.y_preimage = u
        phi = d.phi_at_preimage(u, state.y)
        v = mon.lyap_alpha_pgd(state.y, state.y_prev, fid, d, lam, a, phi_value=phi)
        return v, lam * fid.value(state.y) + phi
    if scheme is Scheme.DRS:
        v = mon.lyap_drs(state.x, state.y, state.z, fid, d, lam, "drs")
        return v, mon.objective(state.y, fid, d, lam, preimage=state.x)
    if scheme is Scheme.DRSDIFF:
        v = mon.lyap_drs(state.x, state.y, state.z, fid, d, lam, "drsdiff")
        return v, mon.objective(state.z, fid, d, lam, preimage=2 * state.y - state.x)
    if scheme is Scheme.PGD_GENERIC:
        v = lam * fid.value(state.x) + reg.value(state.x)
        return v, v
    diff = state.y - state.y_prev
    base = lam * fid.value(state.y) + reg.value(state.y)
    a, t = cfg.alpha, cfg.tau
    return base + a / (2 * t) * (1 - 1 / a) ** 2 * float(np.vdot(diff, diff)), base


def run(scheme, problem, cfg, monitors: Sequence[Callable] = ()):
    """Validate, iterate and trace one scheme.

    Stops after ``cfg.max_iter`` steps or once the running residual drops
    below ``cfg.stop_residual``. Failures inside a step (inner solver,
    non-finite iterates) end the run with a partial trace and ``error`` set.

    Parameters
    ----------
    monitors : sequence of callables
        Each is called as ``monitor(row, state)`` after every row.

    Raises
    ------
    ValidationError
        If the configuration violates its condition strictly and
        ``cfg.unsafe`` is not set. Boundary cases only warn.
    """
    scheme = Scheme(scheme)
    report = validate(scheme, problem, cfg)
    if not report.passed:
        if report.on_boundary:
            warnings.warn(f"{report.message}; merit monotonicity holds only without margin",
                          stacklevel=2)
        elif cfg.unsafe:
            warnings.warn(f"{report.message}; running anyway (unsafe)", stacklevel=2)
        else:
            raise ValidationError(report)

    step = _STEPS[scheme]
    prior = problem.regularizer if scheme in GENERIC else problem.denoiser
    fid = problem.fidelity
    ref = problem.reference
    x0 = np.asarray(problem.x0, dtype=float)

    def make_row(state, prev_lyap, best):
        lyap, obj = _merit(scheme, state, problem, cfg)
        row = mon.TraceRow(state.k, lyap, obj)
        if state.x_prev is not None:
            row.step = mon.residual(state.x, state.x_prev, x0)
            row.residual = min(best, row.step)
        if ref is not None:
            row.psnr = mon.psnr(_estimate(scheme, state), ref)
        if prev_lyap is not None:
            row.violation = max(0.0, lyap - prev_lyap)
        return row

    error = None
    stop = "max_iter"
    rows = []
    iterates = []
    with np.errstate(over="ignore", invalid="ignore"):
        state = init_state(scheme, problem, cfg)
        try:
            rows.append(make_row(state, None, math.inf))
        except ConvergenceError as exc:
            error = f"merit evaluation failed at k=0: {exc}"
        if cfg.keep_iterates:
            iterates.append(replace(state))
        for hook in monitors:
            if rows:
                hook(rows[-1], state)
        while error is None and state.k < cfg.max_iter:
            try:
                new = step(state, fid, prior, cfg)
                new.y_preimage = state.y_preimage
                if not np.all(np.isfinite(new.x)):
                    raise FloatingPointError(f"iterate became non-finite at k={new.k}")
                row = make_row(new, rows[-1].lyapunov, rows[-1].residual if rows[-1].k else math.inf)
                if not math.isfinite(row.lyapunov):
                    raise FloatingPointError(f"merit function became non-finite at k={new.k}")
            except (ConvergenceError, FloatingPointError) as exc:
                error = f"{type(exc).__name__} at k={state.k + 1}: {exc}"
                stop = "error"
                break
            state = new
            rows.append(row)
            if cfg.keep_iterates:
                iterates.append(replace(state))
            for hook in monitors:
                hook(row, state)
            if row.residual < cfg.stop_residual:
                stop = "residual"
                break
    if error is not None:
        stop = "error"
    return RunReport(scheme, cfg, report, rows, state, _estimate(scheme, state), stop, error,
                     iterates if cfg.keep_iterates else None)
