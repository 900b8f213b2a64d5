"""Deblurring and super-resolution experiments with surrogate priors.

``resolve_defaults`` holds the default hyperparameters per scheme and noise
level, ``build_problem`` assembles the degraded observation and the prior,
and ``run_experiment`` runs one scheme and writes its artifacts.

Noise levels ``nu`` are standard deviations in ``[0, 1]`` intensity units.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .algorithms import AlgoConfig, Problem, Scheme, run
from .fidelity import L2Fidelity
from .operators import DownsampleOp, antialias_support, gaussian_kernel, kernel_bank, CircularConvOp
from .prior import (
    CoerciveWrapper,
    LinearSmootherPotential,
    ProxDenoiser,
    RandomNonlinearPotential,
    SumPotential,
)

__all__ = [
    "Defaults",
    "resolve_defaults",
    "ExperimentSpec",
    "BuiltProblem",
    "build_problem",
    "build_prior",
    "run_experiment",
    "load_image",
    "save_image",
    "bundled_image",
    "read_config",
    "NOISE_KEYS",
]

NOISE_KEYS = (0.01, 0.03, 0.05)

# per noise key: (gamma, sigma / nu); lambda and alpha follow from gamma
_GAMMA_SIGMA = {
    "pgd": {0.01: (0.6, 1.25), 0.03: (1.0, 0.75), 0.05: (1.0, 0.5)},
    "alpha_pgd": {0.01: (0.6, 1.25), 0.03: (1.0, 0.75), 0.05: (1.0, 0.5)},
    "drs": {0.01: (0.45, 2.0), 0.03: (0.45, 1.0), 0.05: (0.45, 0.5)},
    "drsdiff": {0.01: (1.0, 0.75), 0.03: (1.0, 0.5), 0.05: (1.0, 0.5)},
}
_DRS_LAMBDA = {0.01: 5.0, 0.03: 1.5, 0.05: 0.75}


@dataclass(frozen=True)
class Defaults:
    """Default hyperparameters of one scheme at one noise level (``L_f = 1``)."""

    scheme: str
    nu: float
    gamma: float
    lam: float
    sigma_ratio: float
    alpha: float = 1.0
    beta: float = 0.5

    @property
    def sigma(self):
        return self.sigma_ratio * self.nu


def _nearest_key(nu):
    key = min(NOISE_KEYS, key=lambda k: abs(k - nu))
    if not math.isclose(key, nu, rel_tol=1e-9, abs_tol=1e-12):
        warnings.warn(f"noise level {nu:g} has no table entry; using defaults of nu={key:g}",
                      stacklevel=3)
    return key


def resolve_defaults(scheme, nu):
    """Default hyperparameters for ``scheme`` at noise level ``nu``.

    PGD uses ``lam = (gamma + 2) / (gamma + 1)``; averaged PGD uses
    ``lam = (gamma + 1) / gamma`` and ``alpha = 1 / lam``; both are the
    largest values their unit-stepsize conditions allow for ``L_g <= 1``.
    Levels off the table fall back to the nearest key with a warning. The
    pd_form and generic schemes share the averaged / plain PGD entries.
    """
    name = Scheme(scheme).value
    base = {"pd_form": "alpha_pgd", "alpha_pgd_generic": "alpha_pgd",
            "pgd_generic": "pgd"}.get(name, name)
    key = _nearest_key(float(nu))
    gamma, ratio = _GAMMA_SIGMA[base][key]
    if base == "pgd":
        return Defaults(name, key, gamma, 1 + 1 / (gamma + 1), ratio)
    if base == "alpha_pgd":
        lam = (gamma + 1) / gamma
        return Defaults(name, key, gamma, lam, ratio, alpha=1 / lam)
    if base == "drs":
        return Defaults(name, key, gamma, _DRS_LAMBDA[key], ratio, beta=0.25)
    return Defaults(name, key, gamma, 1.0, ratio, beta=0.5)


# images


def load_image(path):
    """Read an 8-bit image as floats in ``[0, 1]``: ``(h, w)`` or ``(3, h, w)``."""
    try:
        with Image.open(path) as im:
            gray = im.mode in ("1", "L", "LA", "I", "I;16", "F")
            arr = np.asarray(im.convert("L" if gray else "RGB"), dtype=float) / 255.0
    except OSError as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return arr if gray else arr.transpose(2, 0, 1)


def save_image(path, x):
    """Write ``x`` clipped to ``[0, 1]`` as 8-bit PNG, PGM or PPM (by suffix)."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    data = np.round(x * 255).astype(np.uint8)
    if data.ndim == 3:
        data = data.transpose(1, 2, 0)
    Image.fromarray(data).save(path)


def bundled_image(name="astronaut64.png"):
    """Path of a test image shipped with the package."""
    return resources.files("proxpnp") / "data" / name


# problems


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one restoration run.

    ``kernel_std`` defaults to 1.6 for deblurring and 0.7 for
    super-resolution; ``kernel_size`` defaults to 25 for the deblurring
    Gaussian and to ``antialias_support(std)`` for super-resolution.
    ``gamma``, ``lam``, ``alpha`` and ``beta`` override the table defaults.
    """

    task: str = "deblur"
    scheme: str = "drs"
    nu: float = 0.03
    kernel: str = "gaussian"
    kernel_std: Optional[float] = None
    kernel_size: Optional[int] = None
    kernel_path: Optional[str] = None
    scale: int = 2
    prior: str = "hybrid"
    prior_seed: int = 0
    prior_lipschitz: float = 0.9
    gamma: Optional[float] = None
    lam: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    max_iter: int = 400
    stop_residual: float = 1e-8
    seed: int = 0
    image: Optional[str] = None
    out: str = "out"
    unsafe: bool = False

    def resolved(self):
        """Hyperparameters after applying defaults then overrides."""
        dflt = resolve_defaults(self.scheme, self.nu) if self.nu > 0 else resolve_defaults(self.scheme, 0.01)
        pick = lambda v, d: d if v is None else v  # noqa: E731
        return {
            "gamma": pick(self.gamma, dflt.gamma),
            "lam": pick(self.lam, dflt.lam),
            "alpha": pick(self.alpha, dflt.alpha),
            "beta": pick(self.beta, dflt.beta),
            "sigma": dflt.sigma_ratio * max(self.nu, 0.0),
        }


@dataclass
class BuiltProblem:
    fidelity: L2Fidelity
    denoiser: ProxDenoiser
    reference: np.ndarray
    degraded: np.ndarray
    x0: np.ndarray
    prior_config: dict = field(default_factory=dict)

    def problem(self):
        return Problem(self.fidelity, self.x0, denoiser=self.denoiser, reference=self.reference)


def smoother_std(sigma):
    """Pixel std of the surrogate smoother for denoiser strength ``sigma``."""
    return 0.5 + 50.0 * sigma


def build_prior(kind, shape, sigma, gamma, lipschitz=0.9, seed=0):
    """Surrogate denoiser ``D = Id - gamma grad g`` and its description.

    ``linear``: Gaussian smoother potential of width ``smoother_std(sigma)``.
    ``nonlinear``: random two-layer potential with the box-distance term.
    ``hybrid``: 3/4 of the first plus 1/4 of the second.
    Every potential is scaled to the certified constant ``lipschitz``.
    """
    std = smoother_std(sigma)

    def linear():
        return LinearSmootherPotential.gaussian(shape, std, lipschitz=lipschitz)

    def nonlinear():
        inner = RandomNonlinearPotential(shape, lipschitz=lipschitz, seed=seed)
        return CoerciveWrapper(inner, -1.0, 2.0, lipschitz=lipschitz), inner.config()

    info = {"type": kind, "sigma": sigma, "smootherStd": std, "gamma": gamma,
            "lipschitz": lipschitz, "seed": seed}
    if kind == "linear":
        pot = linear()
    elif kind == "nonlinear":
        pot, info["network"] = nonlinear()
    elif kind == "hybrid":
        nl, info["network"] = nonlinear()
        pot = SumPotential([(0.75, linear()), (0.25, nl)])
    else:
        raise ValueError(f"unknown prior {kind!r}")
    return ProxDenoiser(pot, gamma), info


def _forward_model(spec, shape):
    ndim = len(shape)
    if spec.task == "deblur":
        std = 1.6 if spec.kernel_std is None else spec.kernel_std
        size = spec.kernel_size
        if spec.kernel == "gaussian" and size is None:
            size = 25
        op = kernel_bank(spec.kernel, shape, std=std, size=size, path=spec.kernel_path)
        norm = op.norm()
        return (op if math.isclose(norm, 1.0, rel_tol=1e-12) else op.scaled(1 / norm)), None
    if spec.task == "sr":
        std = 0.7 if spec.kernel_std is None else spec.kernel_std
        size = antialias_support(std) if spec.kernel_size is None else spec.kernel_size
        blur = CircularConvOp(gaussian_kernel(std, size, ndim=ndim), shape)
        raw = DownsampleOp(spec.scale, blur)
        norm = raw.norm()
        return raw.scaled(1 / norm), (raw, norm)
    raise ValueError(f"unknown task {spec.task!r}")


def build_problem(spec, image=None):
    """Degrade the reference image and assemble fidelity, prior and start.

    The forward operator is rescaled so that ``L_f = ||A||^2 = 1``. Noise
    is white Gaussian with std ``spec.nu`` drawn from ``spec.seed``.
    Deblurring starts from the observation; super-resolution from the
    zero-filled upsampled observation smoothed by the blur (times ``s^d``).
    """
    if image is None:
        image = load_image(spec.image if spec.image else bundled_image())
    x_ref = np.asarray(image, dtype=float)
    shape = x_ref.shape[-2:] if x_ref.ndim >= 2 else x_ref.shape
    op, sr_info = _forward_model(spec, shape)
    rng = np.random.default_rng(spec.seed)
    clean = op.apply(x_ref)
    y = clean + spec.nu * rng.standard_normal(clean.shape) if spec.nu > 0 else clean
    fid = L2Fidelity(op, y)
    if sr_info is None:
        x0 = y.copy()
    else:
        raw, norm = sr_info
        x0 = spec.scale ** len(shape) * raw.blur.adjoint(raw.upsample(y / norm))
    hp = spec.resolved()
    d, info = build_prior(spec.prior, shape, hp["sigma"], hp["gamma"],
                          spec.prior_lipschitz, spec.prior_seed)
    return BuiltProblem(fid, d, x_ref, y, x0, info)


# config files


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentSpec)}


def _coerce(name, raw):
    kind = _FIELD_TYPES[name]
    text = raw.strip()
    if "Optional" in str(kind) and text.lower() in ("", "none"):
        return None
    if "bool" in str(kind):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if "int" in str(kind):
        return int(text)
    if "float" in str(kind):
        return float(text)
    return text


def read_config(path):
    """Parse the ``[experiment]`` section of an INI file into field overrides."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise OSError(f"cannot read config file {path}")
    if "experiment" not in parser:
        raise ValueError(f"{path}: missing [experiment] section")
    out = {}
    for key, raw in parser["experiment"].items():
        name = key.replace("-", "_")
        if name not in _FIELD_TYPES:
            raise ValueError(f"{path}: unknown key {key!r}")
        out[name] = _coerce(name, raw)
    return out


# runs


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def certificate(report, spec, built):
    """Summary dictionary written to ``certificate.json``."""
    b = report.bound
    hp = spec.resolved()
    final_psnr = report.rows[-1].psnr if report.rows else math.nan
    cert = {
        "validator": b.validator,
        "bound": b.bound,
        "value": b.value,
        "pass": b.passed,
        "onBoundary": b.on_boundary,
        "message": b.message,
        "maxViolation": report.max_violation,
        "rateSlope": report.rate_slope(),
        "iterations": report.iterations,
        "stopReason": report.stop_reason,
        "error": report.error,
        "psnr": final_psnr,
        "psnrNote": "surrogate-prior, not comparable",
        "denoiserLipschitz": built.denoiser.lipschitz,
        "fidelityLipschitz": built.fidelity.lipschitz,
        "spec": dataclasses.asdict(spec),
        "resolved": hp,
        "prior": built.prior_config,
        "extras": b.extras,
    }
    return _jsonable(cert)


def run_experiment(spec, write=True):
    """Build, validate and run ``spec``; optionally write the artifacts.

    Writes ``trace.csv``, ``restored.png``, ``degraded.png`` and
    ``certificate.json`` to ``spec.out``. Returns ``(report, built)``.

    Raises
    ------
    ValidationError
        When the resolved configuration is rejected and ``unsafe`` is not set.
    """
    built = build_problem(spec)
    hp = spec.resolved()
    cfg = AlgoConfig(lam=hp["lam"], alpha=hp["alpha"], beta=hp["beta"], max_iter=spec.max_iter,
                     stop_residual=spec.stop_residual, unsafe=spec.unsafe)
    report = run(spec.scheme, built.problem(), cfg)
    if write:
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "trace.csv")
        save_image(out / "restored.png", report.estimate)
        save_image(out / "degraded.png", built.degraded)
        with open(out / "certificate.json", "w") as fh:
            json.dump(certificate(report, spec, built), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report, built
