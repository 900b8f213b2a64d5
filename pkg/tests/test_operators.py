import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxpnp.errors import ConvergenceError
from proxpnp.operators import (
    CircularConvOp,
    DownsampleOp,
    IdentityOp,
    antialias_support,
    gaussian_kernel,
    kernel_bank,
    load_kernel,
    power_iteration,
    spectral_norm,
    uniform_kernel,
)


def direct_circular_conv(x, k):
    """O(n^2) spatial sum: out[i, j] = sum_ab k[a, b] x[i - a + c0, j - b + c1]."""
    h, w = x.shape
    c0, c1 = k.shape[0] // 2, k.shape[1] // 2
    out = np.zeros_like(x)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(k.shape[0]):
                for b in range(k.shape[1]):
                    acc += k[a, b] * x[(i - (a - c0)) % h, (j - (b - c1)) % w]
            out[i, j] = acc
    return out


def delta(size=3):
    k = np.zeros((size, size))
    k[size // 2, size // 2] = 1.0
    return k


def test_delta_kernel_is_identity(rng):
    x = rng.standard_normal((8, 8))
    op = CircularConvOp(delta(), x.shape)
    np.testing.assert_allclose(op.apply(x), x, atol=1e-14)
    np.testing.assert_allclose(op.adjoint(x), x, atol=1e-14)
    assert spectral_norm(op) == pytest.approx(1.0, abs=1e-14)


def test_uniform_kernel_preserves_constants():
    op = CircularConvOp(uniform_kernel(3), (8, 8))
    np.testing.assert_allclose(op.apply(np.full((8, 8), 0.3)), 0.3, atol=1e-14)


def test_fft_matches_direct_convolution(rng):
    x = rng.standard_normal((8, 8))
    k = gaussian_kernel(0.8, 3)
    np.testing.assert_allclose(CircularConvOp(k, x.shape).apply(x), direct_circular_conv(x, k),
                               atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(h=st.integers(3, 16), w=st.integers(3, 16), kh=st.sampled_from([1, 3, 5]),
       kw=st.sampled_from([1, 3, 5]), seed=st.integers(0, 2**31))
def test_fft_matches_direct_convolution_property(h, w, kh, kw, seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((h, w))
    k = r.standard_normal((kh, kw))
    np.testing.assert_allclose(CircularConvOp(k, (h, w)).apply(x), direct_circular_conv(x, k),
                               atol=1e-10)


def test_kernel_larger_than_grid_wraps(rng):
    x = rng.standard_normal((4, 4))
    k = rng.standard_normal((7, 7))
    np.testing.assert_allclose(CircularConvOp(k, x.shape).apply(x), direct_circular_conv(x, k),
                               atol=1e-10)


def test_symmetric_kernel_is_self_adjoint(rng):
    op = CircularConvOp(gaussian_kernel(1.0, 5), (8, 8))
    x = rng.standard_normal((8, 8))
    np.testing.assert_allclose(op.adjoint(x), op.apply(x), atol=1e-14)


def _dot_test(op, r, trials):
    worst = 0.0
    for _ in range(trials):
        x = r.standard_normal(op.in_shape)
        y = r.standard_normal(op.out_shape)
        worst = max(worst, abs(np.vdot(op.apply(x), y) - np.vdot(x, op.adjoint(y))))
    return worst


def test_downsample_dot_test(rng):
    op = DownsampleOp(2, CircularConvOp(gaussian_kernel(0.7), (8, 8)))
    assert op.out_shape == (4, 4)
    assert _dot_test(op, rng, 100) < 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), s=st.sampled_from([1, 2, 3]), n=st.sampled_from([6, 12]))
def test_dot_test_property(seed, s, n):
    r = np.random.default_rng(seed)
    blur = CircularConvOp(r.standard_normal((3, 3)), (n, n))
    for op in (blur, DownsampleOp(s, blur), IdentityOp((n, n), 0.7)):
        assert _dot_test(op, r, 3) < 1e-10


def test_downsample_keeps_every_sth_sample_from_zero(rng):
    x = rng.standard_normal((6, 6))
    op = DownsampleOp(3, CircularConvOp(delta(), (6, 6)))
    np.testing.assert_allclose(op.apply(x), x[::3, ::3])
    up = op.upsample(np.ones((2, 2)))
    assert up.sum() == 4 and up[0, 0] == 1 and up[3, 3] == 1 and up[1, 1] == 0


def test_spectral_norms():
    assert CircularConvOp(0.5 * delta(), (8, 8)).norm() == pytest.approx(0.5)
    assert CircularConvOp(delta(), (8, 8)).scaled(0.5).norm() == pytest.approx(0.5)
    op = CircularConvOp(uniform_kernel(9), (32, 32))
    mult = np.abs(op.multiplier)
    assert np.unravel_index(np.argmax(mult), mult.shape) == (0, 0)
    assert op.norm() ** 2 == pytest.approx(1.0, abs=1e-14)


def test_exact_norms_agree_with_power_iteration():
    r = np.random.default_rng(3)
    blur = CircularConvOp(r.standard_normal((3, 3)), (12, 12))
    for op in (blur, DownsampleOp(2, blur), DownsampleOp(3, blur)):
        assert op.norm() == pytest.approx(power_iteration(op, tol=1e-12, max_iter=5000), rel=1e-6)
        assert spectral_norm(op, method="power", tol=1e-12, max_iter=5000) == pytest.approx(
            op.norm(), rel=1e-6)


def test_norm_is_upper_envelope(rng):
    blur = CircularConvOp(gaussian_kernel(1.2, 7), (16, 16))
    for op in (blur, DownsampleOp(2, blur)):
        n2 = op.norm() ** 2
        for _ in range(50):
            x = rng.standard_normal(op.in_shape)
            assert np.vdot(op.apply(x), op.apply(x)) / np.vdot(x, x) <= n2 * (1 + 1e-12)


def test_power_iteration_reports_last_estimate():
    op = CircularConvOp(np.random.default_rng(0).standard_normal((3, 3)), (16, 16))
    with pytest.raises(ConvergenceError) as info:
        power_iteration(op, tol=1e-16, max_iter=2)
    assert info.value.estimate > 0


def test_kernel_bank_default_kernels():
    g = kernel_bank("gaussian", (64, 64), std=1.6, size=25).kernel
    assert g.shape == (25, 25)
    assert g.sum() == pytest.approx(1.0)
    u = kernel_bank("uniform", (64, 64), size=9).kernel
    np.testing.assert_allclose(u, 1 / 81)
    sr = kernel_bank("gaussian", (64, 64), std=0.7).kernel
    assert sr.shape == (antialias_support(0.7),) * 2 == (5, 5)
    assert sr.sum() == pytest.approx(1.0)


def test_kernel_file_roundtrip(tmp_path):
    k = np.arange(1.0, 10.0).reshape(3, 3)
    p = tmp_path / "motion.txt"
    np.savetxt(p, k)
    loaded = load_kernel(p)
    np.testing.assert_allclose(loaded, k / k.sum())
    assert kernel_bank("file", (8, 8), path=p).kernel.shape == (3, 3)


def test_antialias_support_is_odd():
    assert antialias_support(0.7) == 5
    assert antialias_support(1.2) == 9  # ceil(7.2) = 8 -> 9
    assert antialias_support(2.0) == 13


@pytest.mark.parametrize("call", [
    lambda: gaussian_kernel(0.0),
    lambda: gaussian_kernel(-1.0),
    lambda: gaussian_kernel(1.0, 4),
    lambda: CircularConvOp(np.ones((2, 3)), (8, 8)),
    lambda: CircularConvOp(np.ones(3), (8, 8)),
    lambda: kernel_bank("box", (8, 8)),
    lambda: load_kernel("/nonexistent/kernel.txt"),
])
def test_invalid_kernels_are_rejected(call):
    with pytest.raises(ValueError):
        call()


def test_even_kernel_file_rejected(tmp_path):
    p = tmp_path / "even.txt"
    np.savetxt(p, np.ones((2, 2)))
    with pytest.raises(ValueError, match="even"):
        load_kernel(p)


def test_shape_mismatch_diagnostic(rng):
    op = CircularConvOp(delta(), (8, 8))
    with pytest.raises(ValueError, match="trailing shape"):
        op.apply(rng.standard_normal((8, 7)))
    with pytest.raises(ValueError):
        DownsampleOp(3, op)


def test_leading_axes_are_channels(rng):
    op = DownsampleOp(2, CircularConvOp(gaussian_kernel(0.7), (8, 8)))
    x = rng.standard_normal((3, 8, 8))
    out = op.apply(x)
    assert out.shape == (3, 4, 4)
    np.testing.assert_allclose(out[1], op.apply(x[1]))


def test_one_dimensional_signals(rng):
    k = np.array([0.25, 0.5, 0.25])
    op = CircularConvOp(k, (10,))
    x = rng.standard_normal(10)
    expected = 0.25 * np.roll(x, 1) + 0.5 * x + 0.25 * np.roll(x, -1)
    np.testing.assert_allclose(op.apply(x), expected, atol=1e-14)
