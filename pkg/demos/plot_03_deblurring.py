"""
Deblurring with the four convergent schemes
===========================================

Each scheme runs with its default hyperparameters on the bundled
64x64 test image. The merit function of every run is non-increasing,
and the squared residual falls at least like 1/k.
PSNR values come from a surrogate prior, not a trained network.
"""

import warnings

from proxpnp.algorithms import AlgoConfig, run
from proxpnp.harness import ExperimentSpec, build_problem
from proxpnp.monitors import psnr

for scheme in ("pgd", "alpha_pgd", "drs", "drsdiff"):
    spec = ExperimentSpec(task="deblur", scheme=scheme, nu=0.03, prior="hybrid")
    built = build_problem(spec)
    hp = spec.resolved()
    cfg = AlgoConfig(lam=hp["lam"], alpha=hp["alpha"], beta=hp["beta"], max_iter=200,
                     stop_residual=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # two defaults sit exactly on their bound
        rep = run(scheme, built.problem(), cfg)
    print(f"{scheme:9s} psnr {psnr(built.degraded, built.reference):5.2f} -> "
          f"{rep.rows[-1].psnr:5.2f} dB  max violation {rep.max_violation:.1e}  "
          f"slope {rep.rate_slope():.2f}")
