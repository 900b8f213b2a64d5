"""Command line entry point: ``proxpnp run`` and ``proxpnp validate``.

Exit codes: 0 on success, 2 when a validator rejects the configuration,
1 on any runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from .algorithms import (
    Scheme,
    validate_alpha_pgd,
    validate_drs,
    validate_drsdiff,
    validate_pgd,
)
from .errors import ValidationError
from .harness import ExperimentSpec, read_config, resolve_defaults, run_experiment

# CLI flag -> ExperimentSpec field
_RUN_FLAGS = {
    "task": "task", "scheme": "scheme", "nu": "nu", "kernel": "kernel",
    "kernel_std": "kernel_std", "kernel_size": "kernel_size", "kernel_path": "kernel_path",
    "scale": "scale", "prior": "prior", "prior_seed": "prior_seed",
    "prior_lipschitz": "prior_lipschitz", "gamma": "gamma", "lam": "lam", "alpha": "alpha",
    "beta": "beta", "max_iter": "max_iter", "stop_residual": "stop_residual", "seed": "seed",
    "image": "image", "out": "out",
}


def _parser():
    p = argparse.ArgumentParser(prog="proxpnp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a restoration experiment and write its artifacts")
    r.add_argument("--config", help="INI file with an [experiment] section")
    r.add_argument("--task", choices=["deblur", "sr"])
    r.add_argument("--scheme", help="scheme name, or a comma-separated list")
    r.add_argument("--nu", type=float, help="noise std")
    r.add_argument("--nu-unit", choices=["unit", "255"], default="unit",
                   help="'unit' for [0,1] intensities (default), '255' for 8-bit levels")
    r.add_argument("--image")
    r.add_argument("--kernel", choices=["gaussian", "uniform", "file"])
    r.add_argument("--kernel-std", type=float)
    r.add_argument("--kernel-size", type=int)
    r.add_argument("--kernel-path")
    r.add_argument("--scale", type=int, help="super-resolution factor")
    r.add_argument("--prior", choices=["linear", "nonlinear", "hybrid"])
    r.add_argument("--prior-seed", type=int)
    r.add_argument("--prior-lipschitz", type=float)
    r.add_argument("--gamma", type=float)
    r.add_argument("--lambda", dest="lam", type=float)
    r.add_argument("--alpha", type=float)
    r.add_argument("--beta", type=float)
    r.add_argument("--max-iter", type=int)
    r.add_argument("--stop-residual", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory (default: out)")
    r.add_argument("--unsafe", action="store_true", help="run even if the validator rejects")

    v = sub.add_parser("validate", help="check a parameter choice against its condition")
    v.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    v.add_argument("--nu", type=float, default=0.01, help="noise level used for defaults")
    v.add_argument("--lambda", dest="lam", type=float)
    v.add_argument("--gamma", type=float)
    v.add_argument("--alpha", type=float)
    v.add_argument("--beta", type=float)
    v.add_argument("--tau", type=float, default=1.0)
    v.add_argument("--lipschitz-g", type=float, default=1.0,
                   help="Lipschitz constant of the potential gradient (default 1)")
    v.add_argument("--L", dest="L", type=float,
                   help="effective constant gamma * L_g; overrides --gamma and --lipschitz-g")
    v.add_argument("--lf", type=float, default=1.0, help="data-term Lipschitz constant")
    v.add_argument("--weak-convexity", type=float,
                   help="regulariser weak convexity for the generic schemes")
    v.add_argument("--refined", action="store_true", help="use the refined generic bound")
    return p


def _spec_from_args(args):
    fields = {}
    if args.config:
        fields.update(read_config(args.config))
    for flag, name in _RUN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            fields[name] = value
    if args.unsafe:
        fields["unsafe"] = True
    if args.nu_unit == "255" and "nu" in fields:
        fields["nu"] = fields["nu"] / 255.0
    return ExperimentSpec(**fields)


def _cmd_run(args):
    base = _spec_from_args(args)
    schemes = [s.strip() for s in str(base.scheme).split(",") if s.strip()]
    status = 0
    for name in schemes:
        out = base.out if len(schemes) == 1 else str(Path(base.out) / name)
        spec = dataclasses.replace(base, scheme=name, out=out)
        try:
            report, _ = run_experiment(spec)
        except ValidationError as exc:
            print(f"rejected: {exc}", file=sys.stderr)
            status = max(status, 2)
            continue
        print(f"{name}: {report.iterations} iterations ({report.stop_reason}), "
              f"max violation {report.max_violation:.3e}, rate slope {report.rate_slope():.3f}, "
              f"artifacts in {spec.out}")
        if report.error:
            print(f"{name}: run halted: {report.error}", file=sys.stderr)
            status = 1 if status == 0 else status
    return status


def _cmd_validate(args):
    scheme = Scheme(args.scheme)
    d = resolve_defaults(scheme, args.nu)
    gamma = d.gamma if args.gamma is None else args.gamma
    L = gamma * args.lipschitz_g if args.L is None else args.L
    lam = d.lam if args.lam is None else args.lam
    M = L / (L + 1)
    note = None
    if scheme is Scheme.PGD:
        rep = validate_pgd(lam, args.lf, L)
    elif scheme in (Scheme.ALPHA_PGD, Scheme.PD_FORM):
        alpha = args.alpha
        if alpha is None:
            lo, hi = M, (1 / (lam * args.lf) if lam > 0 else math.inf)
            alpha = min(0.5 * (lo + hi), 1.0) if hi > lo else hi
            note = f"alpha not given; checked at {alpha:.6g} inside the feasible interval"
        rep = validate_alpha_pgd(lam, alpha, args.lf, M)
    elif scheme is Scheme.DRS:
        rep = validate_drs(d.beta if args.beta is None else args.beta, L)
    elif scheme is Scheme.DRSDIFF:
        rep = validate_drsdiff(lam, args.lf)
    elif scheme is Scheme.PGD_GENERIC:
        rep = validate_pgd(lam, args.lf, tau=args.tau,
                           weak_convexity=M if args.weak_convexity is None else args.weak_convexity)
    else:
        rep = validate_alpha_pgd(lam, d.alpha if args.alpha is None else args.alpha, args.lf,
                                 M if args.weak_convexity is None else args.weak_convexity,
                                 tau=args.tau, generic=True, refined=args.refined)
    print(rep.message)
    if "alphaInterval" in rep.extras:
        lo, hi = rep.extras["alphaInterval"]
        print(f"feasible alpha interval: ({lo:.6g}, {hi:.6g})"
              + ("" if hi > lo else " is empty"))
    if note:
        print(note)
    out = rep.to_dict()
    out = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in out.items()}
    print(json.dumps(out, sort_keys=True, default=str))
    return 0 if rep.admissible else 2


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_validate(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
