"""Kernel construction, closed forms, tails, and contraction estimates."""

import logging

import numpy as np
import pytest

from mixheat import (
    ConfigurationError,
    convolve,
    gaussian_kernel,
    half_width_for_tail,
    integral,
    kernel_lq_norm,
    make_field,
    make_grid,
    mixed_kernel,
    mixed_kernel_quadrature,
    stable_kernel,
    stable_kernel_quadrature,
    stable_tail_constant,
    stable_tail_mass,
    taylor_contraction_error,
)

ALPHAS = (0.5, 1.0, 1.5)


def test_gaussian_kernel_closed_form():
    g = make_grid(1, 30.0, 2048)
    x = g.axis_coords()
    t = 0.7
    k = gaussian_kernel(g, t)
    exact = (4.0 * np.pi * t) ** -0.5 * np.exp(-x * x / (4.0 * t))
    np.testing.assert_allclose(k.values, exact, rtol=1e-15)


def test_gaussian_kernel_unit_peak_time():
    # at t = 1/(4 pi) the prefactor is exactly one
    g = make_grid(1, 20.0, 4096)
    k = gaussian_kernel(g, 1.0 / (4.0 * np.pi))
    assert k.values[4096 // 2] == pytest.approx(1.0, rel=1e-15)


def test_gaussian_kernel_needs_positive_time():
    g = make_grid(1, 10.0, 64)
    with pytest.raises(ConfigurationError):
        gaussian_kernel(g, 0.0)


def test_cauchy_closed_form_moderate_grid():
    g = make_grid(1, 2000.0, 2 ** 17)
    x = g.axis_coords()
    t = 1.0
    k = stable_kernel(g, 1.0, t)
    exact = t / (np.pi * (t * t + x * x))
    mask = np.abs(x) <= 5.0
    rel = np.abs(k.values[mask] - exact[mask]) / exact[mask]
    assert rel.max() < 2e-4


def test_stable_self_similarity_exact_on_dilated_lattice():
    """P(lam^alpha t, lam x) = lam^-1 P(t, x) holds exactly when the grid
    is dilated along with the argument, so the check is roundoff-level."""
    lam = 4.0
    for alpha in ALPHAS:
        gA = make_grid(1, 50.0, 1024)
        gB = make_grid(1, 50.0 * lam, 1024)
        pA = stable_kernel(gA, alpha, 1.0)
        pB = stable_kernel(gB, alpha, lam ** alpha)
        np.testing.assert_allclose(pB.values, pA.values / lam, rtol=0, atol=1e-15)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_mixed_kernel_is_product_of_factors(alpha):
    g = make_grid(1, 80.0, 2048)
    t = 1.3
    direct = mixed_kernel(g, alpha, t)
    factored = convolve(gaussian_kernel(g, t), stable_kernel(g, alpha, t))
    np.testing.assert_allclose(direct.values, factored.values, rtol=0, atol=1e-12)


def test_mixed_kernel_mass_exact():
    for dim in (1, 2):
        g = make_grid(dim, 40.0, 256)
        k = mixed_kernel(g, 1.0, 2.0)
        assert abs(integral(k) - 1.0) < 1e-12


def test_mixed_kernel_ripple_warning(caplog):
    # alpha = 1.5 on a deliberately coarse box leaves visible negative ripple
    g = make_grid(1, 40.0, 64)
    with caplog.at_level(logging.WARNING, logger="mixheat.kernels"):
        mixed_kernel(g, 1.5, 0.1)
    assert any("negative ripple" in r.message for r in caplog.records)


def test_kernel_lq_norms():
    g = make_grid(1, 60.0, 4096)
    k = mixed_kernel(g, 1.0, 1.0)
    assert kernel_lq_norm(k, 1.0) == pytest.approx(1.0, abs=1e-10)
    assert kernel_lq_norm(k, np.inf) == pytest.approx(float(np.abs(k.values).max()))
    l2 = float(np.sqrt(np.sum(k.values ** 2) * g.spacing))
    assert kernel_lq_norm(k, 2.0) == pytest.approx(l2, rel=1e-13)
    with pytest.raises(ConfigurationError):
        kernel_lq_norm(k, 0.5)


@pytest.mark.parametrize("q", [1.0, 2.0, np.inf])
def test_young_contraction(q):
    """Convolution against a unit-mass kernel cannot raise any Lq norm."""
    rng = np.random.default_rng(11)
    g = make_grid(1, 60.0, 2048)
    v = make_field(g, rng.random(2048))
    for alpha in ALPHAS:
        k = mixed_kernel(g, alpha, 0.5)
        out = convolve(k, v)
        assert kernel_lq_norm(out, q) <= kernel_lq_norm(v, q) * (1.0 + 1e-6)


def test_sup_norm_decreases_in_time():
    g = make_grid(1, 200.0, 8192)
    sups = [kernel_lq_norm(mixed_kernel(g, 1.0, t), np.inf)
            for t in (0.5, 1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(sups, sups[1:]))


def test_stable_tail_constant_cauchy_value():
    # alpha = 1, N = 1: the tail coefficient is 1/pi
    assert stable_tail_constant(1.0, 1) == pytest.approx(1.0 / np.pi, rel=1e-12)


def test_stable_tail_mass_matches_cauchy_integral():
    # exact tail of the Cauchy law: 1 - (2/pi) arctan(L/t)
    t, L = 2.0, 50.0
    exact = 1.0 - 2.0 / np.pi * np.arctan(L / t)
    approx = stable_tail_mass(1.0, t, L, 1)
    assert approx == pytest.approx(exact, rel=0.05)


def test_half_width_for_tail_inverts_tail_mass():
    for alpha in ALPHAS:
        L = half_width_for_tail(alpha, 3.0, 1, tail_mass=1e-6)
        assert stable_tail_mass(alpha, 3.0, L, 1) == pytest.approx(1e-6, rel=1e-9)
    # tighter tolerance must demand a wider box
    assert (half_width_for_tail(1.0, 3.0, 1, tail_mass=1e-8)
            > half_width_for_tail(1.0, 3.0, 1, tail_mass=1e-6))


def test_stable_quadrature_matches_cauchy():
    for x in (0.0, 0.7, 3.0):
        val = stable_kernel_quadrature(x, 1.0, 1.5)
        exact = 1.5 / (np.pi * (1.5 ** 2 + x * x))
        assert val == pytest.approx(exact, rel=1e-8)


def test_mixed_quadrature_matches_grid_kernel():
    # box wide enough that periodized tail mass sits below the tolerance;
    # at L = 300 the wrap-around alone is ~3e-6 relative
    g = make_grid(1, 4800.0, 2 ** 19)
    k = mixed_kernel(g, 1.2, 0.8)
    x = g.axis_coords()
    for xq in (0.0, 1.0, 4.0):
        idx = int(np.argmin(np.abs(x - xq)))
        assert mixed_kernel_quadrature(x[idx], 1.2, 0.8) == pytest.approx(
            k.values[idx], rel=1e-6)


def test_taylor_contraction_zero_for_centered_even_data():
    """A centered even bump has vanishing first moment only in the signed
    sense; the bound uses | |x| g |, so the error is controlled but small."""
    g = make_grid(1, 120.0, 8192)
    x = g.axis_coords()
    bump = np.exp(-x * x)
    f = make_field(g, bump / (np.sum(bump) * g.spacing))
    errors, moment = taylor_contraction_error(f, [50.0, 100.0], 1.0)
    assert moment > 0.0
    assert errors[1] < errors[0]
    # centered data contracts faster than t^-1: second-moment rate
    rate = np.log(errors[1] / errors[0]) / np.log(2.0)
    assert rate < -1.5


def test_taylor_contraction_shift_sets_the_rate():
    g = make_grid(1, 512.0, 8192)
    x = g.axis_coords()
    bump = np.exp(-((x - 1.0) ** 2) / 2.0)
    f = make_field(g, bump / (np.sum(bump) * g.spacing))
    ts = np.geomspace(10.0, 100.0, 5)
    errors, moment = taylor_contraction_error(f, ts, 1.0)
    assert moment == pytest.approx(np.sum(np.abs(x) * f.values) * g.spacing)
    slope = np.polyfit(np.log(ts), np.log(errors), 1)[0]
    assert slope < -0.9
