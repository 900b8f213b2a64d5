import numpy as np
import pytest

from proxpnp.fidelity import L2Fidelity
from proxpnp.operators import CircularConvOp, IdentityOp, gaussian_kernel
from proxpnp.prior import (
    CoerciveWrapper,
    LinearSmootherPotential,
    ProxDenoiser,
    RandomNonlinearPotential,
)


def scalar_denoiser(gamma=1.0):
    """Transfer 0.5 and scale 1: grad g(x) = x / 4, so phi(x) = x^2 / 6 at gamma = 1."""
    pot = LinearSmootherPotential(CircularConvOp(np.array([0.5]), (1,)), scale=1.0)
    return ProxDenoiser(pot, gamma)


def scalar_identity_problem(y=0.0):
    return L2Fidelity(IdentityOp((1,)), np.array([y]))


def linear_denoiser(shape, std=1.0, lipschitz=0.9, gamma=1.0):
    return ProxDenoiser(LinearSmootherPotential.gaussian(shape, std, lipschitz=lipschitz), gamma)


def nonlinear_denoiser(shape, lipschitz=0.9, gamma=1.0, seed=0, coercive=True):
    pot = RandomNonlinearPotential(shape, lipschitz=lipschitz, seed=seed)
    if coercive:
        pot = CoerciveWrapper(pot, -1.0, 2.0)
    return ProxDenoiser(pot, gamma)


def random_deblur(shape, seed=0, noise=0.02):
    rng = np.random.default_rng(seed)
    k = rng.uniform(0.0, 1.0, (3,) * len(shape))
    op = CircularConvOp(k / k.sum(), shape)
    op = op.scaled(1 / op.norm())
    truth = rng.uniform(0, 1, shape)
    y = op.apply(truth) + noise * rng.standard_normal(shape)
    return L2Fidelity(op, y), truth


def blur_problem(shape=(16, 16), std=1.2, seed=0, noise=0.02):
    rng = np.random.default_rng(seed)
    op = CircularConvOp(gaussian_kernel(std, 7, ndim=len(shape)), shape)
    truth = rng.uniform(0, 1, shape)
    y = op.apply(truth) + noise * rng.standard_normal(shape)
    return L2Fidelity(op, y), truth


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def priors_1d():
    """Both surrogate priors on a 16-sample signal, as ``{name: denoiser}``."""
    return {
        "linear": linear_denoiser((16,), std=1.5),
        "nonlinear": nonlinear_denoiser((16,)),
    }
