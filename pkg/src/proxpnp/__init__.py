"""Plug-and-play restoration with gradient-step denoisers and monitored merit decrease."""

from .algorithms import (
    AlgoConfig,
    AlgoState,
    BoundReport,
    Problem,
    RunReport,
    Scheme,
    drs_lipschitz_limit,
    run,
    validate,
    validate_alpha_pgd,
    validate_drs,
    validate_drsdiff,
    validate_pgd,
)
from .errors import ConvergenceError, InversionError, ValidationError
from .fidelity import L2Fidelity
from .operators import CircularConvOp, DownsampleOp, IdentityOp, kernel_bank, spectral_norm
from .prior import (
    CoerciveWrapper,
    LinearSmootherPotential,
    ProxDenoiser,
    RandomNonlinearPotential,
    SumPotential,
    brute_force_prox,
)

__version__ = "0.1.0"
