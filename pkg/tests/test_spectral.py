import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viscolab.spectral import (
    ContractViolation,
    Grid,
    SpectralField,
    divergence,
    divergence_ratio,
    forward_transform,
    gradient,
    grid_lp_norm,
    inverse_transform,
    lambda_power,
    leray_project,
    random_field,
    spectral_derivative,
    zeros,
)


def test_grid_validation():
    with pytest.raises(ValueError, match="power of two"):
        Grid(2, 96, 1.0)
    with pytest.raises(ValueError, match="power of two"):
        Grid(2, 4, 1.0)
    with pytest.raises(ValueError, match="L must be > 0"):
        Grid(2, 16, 0.0)
    with pytest.raises(ValueError, match="dim"):
        Grid(4, 16, 1.0)


def test_grid_defaults_and_lattice():
    g = Grid()
    assert (g.dim, g.M) == (2, 128)
    assert g.L == pytest.approx(32 * math.pi)
    assert g.k_index.min() == -64 and g.k_index.max() == 63
    assert np.allclose(g.xi, 2 * math.pi * g.k_index / g.L)
    nyq = g.k_index == -64
    assert np.all(g.xi_deriv[nyq] == 0)
    assert np.all(g.xi_deriv[~nyq] == g.xi[~nyq])


def test_constant_field_transforms_to_mean(grid64):
    f = forward_transform(np.ones(grid64.shape), grid64)
    expected = np.zeros(grid64.shape, dtype=complex)
    expected[0, 0] = 1.0
    assert np.allclose(f.coeffs, expected, atol=1e-15)


def test_cosine_gives_two_conjugate_modes(grid64):
    x = grid64.coordinates
    f = forward_transform(np.cos(2 * math.pi * x[0] / grid64.L), grid64)
    assert f.coeffs[1, 0] == pytest.approx(0.5, abs=1e-15)
    assert f.coeffs[-1, 0] == pytest.approx(0.5, abs=1e-15)
    rest = f.coeffs.copy()
    rest[1, 0] = rest[-1, 0] = 0
    assert np.max(np.abs(rest)) < 1e-15


def test_round_trip_and_parseval(grid64, rng):
    samples = rng.standard_normal((2,) + grid64.shape)
    f = forward_transform(samples, grid64)
    back = inverse_transform(f)
    assert np.max(np.abs(back - samples)) < 1e-12 * np.max(np.abs(samples))
    direct = math.sqrt(grid64.dx**2 * np.sum(samples**2))
    assert f.l2_coeff_norm() == pytest.approx(direct, rel=1e-12)
    assert grid_lp_norm(f, 2) == pytest.approx(direct, rel=1e-12)


def test_forward_rejects_shape_mismatch(grid64):
    with pytest.raises(ValueError, match="incompatible"):
        forward_transform(np.zeros((32, 32)), grid64)
    with pytest.raises(ValueError, match="real"):
        forward_transform(np.zeros(grid64.shape, dtype=complex), grid64)


def test_inverse_of_zero_and_single_pair(grid64):
    assert np.all(inverse_transform(zeros(grid64)) == 0)
    c = np.zeros(grid64.shape, dtype=complex)
    c[2, 3] = c[-2, -3] = 0.5
    x = grid64.coordinates
    xi = 2 * math.pi / grid64.L * np.array([2, 3])
    expected = np.cos(xi[0] * x[0] + xi[1] * x[1])
    assert np.max(np.abs(inverse_transform(SpectralField(grid64, c)) - expected)) < 1e-12


def test_inverse_rejects_asymmetric(grid64):
    c = np.zeros(grid64.shape, dtype=complex)
    c[2, 3] = 1.0
    with pytest.raises(ContractViolation):
        inverse_transform(SpectralField(grid64, c))


def test_random_field_is_conjugate_symmetric(grid64, rng):
    f = random_field(grid64, rng, (2, 2))
    assert f.conjugate_asymmetry() < 1e-14
    out = np.fft.ifftn(f.coeffs, axes=(-2, -1))
    assert np.max(np.abs(out.imag)) < 1e-12 * np.max(np.abs(out.real))


def test_derivative_of_cosine_and_constant(grid64):
    x = grid64.coordinates
    xi = 2 * math.pi * 3 / grid64.L
    f = forward_transform(np.cos(xi * x[0]), grid64)
    d = inverse_transform(spectral_derivative(f, 0))
    assert np.max(np.abs(d + xi * np.sin(xi * x[0]))) < 1e-12
    const = forward_transform(np.full(grid64.shape, 2.0), grid64)
    assert np.all(spectral_derivative(const, 1).coeffs == 0)
    with pytest.raises(IndexError):
        spectral_derivative(f, 2)


def test_derivative_zeroes_nyquist(grid64):
    c = np.zeros(grid64.shape, dtype=complex)
    c[32, 0] = 1.0  # k = -M/2
    d = spectral_derivative(SpectralField(grid64, c), 0)
    assert np.all(d.coeffs == 0)


def test_mixed_derivatives_commute(grid64, rng):
    f = random_field(grid64, rng)
    a = spectral_derivative(spectral_derivative(f, 0), 1)
    b = spectral_derivative(spectral_derivative(f, 1), 0)
    assert np.max(np.abs(inverse_transform(a) - inverse_transform(b))) < 1e-12


def test_gradient_and_divergence_layout(grid64, rng):
    f = random_field(grid64, rng)
    g = gradient(f)
    assert g.rank == "vector"
    assert np.allclose(g.coeffs[1], spectral_derivative(f, 1).coeffs)
    T = random_field(grid64, rng, (2, 2))
    dT = divergence(T)
    expected = spectral_derivative(T.with_coeffs(T.coeffs[:, 0]), 0).coeffs + spectral_derivative(
        T.with_coeffs(T.coeffs[:, 1]), 1
    ).coeffs
    assert np.allclose(dT.coeffs, expected)


def test_lambda_power_examples(grid64, rng):
    f = random_field(grid64, rng, kmin=1)
    assert lambda_power(f, 0) is f
    c = np.zeros(grid64.shape, dtype=complex)
    # |xi| = 3 needs 2 pi k / L = 3, i.e. k = 3 L / (2 pi) = 48 > M/2; use a box where it fits
    g = Grid(2, 16, 2 * math.pi)
    c = np.zeros(g.shape, dtype=complex)
    c[3, 0] = c[-3, 0] = 0.5
    out = lambda_power(SpectralField(g, c), 2)
    assert out.coeffs[3, 0] == pytest.approx(4.5)
    back = lambda_power(lambda_power(f, 1), -1)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-12 * np.max(np.abs(f.coeffs))


def test_lambda_power_zero_mode_rules(grid64, rng):
    f = random_field(grid64, rng)
    assert lambda_power(f, 1.5).zero_mode() == 0
    with pytest.raises(ContractViolation, match="zero-mean"):
        lambda_power(f, -1)


def test_derivative_and_lambda_commute(grid64, rng):
    f = random_field(grid64, rng, kmin=1)
    a = lambda_power(spectral_derivative(f, 0), 0.7).coeffs
    b = spectral_derivative(lambda_power(f, 0.7), 0).coeffs
    assert np.max(np.abs(a - b)) <= 1e-15 * np.max(np.abs(a))


def test_leray_annihilates_gradients(grid64, rng):
    g = random_field(grid64, rng)
    assert np.max(np.abs(leray_project(gradient(g)).coeffs)) < 1e-14


def test_leray_keeps_stream_function_fields(grid64, rng):
    psi = random_field(grid64, rng)
    u = SpectralField(
        grid64, np.stack([-spectral_derivative(psi, 1).coeffs, spectral_derivative(psi, 0).coeffs])
    )
    assert np.max(np.abs(leray_project(u).coeffs - u.coeffs)) < 1e-14


def test_leray_closed_form_and_properties(grid64, rng):
    u = random_field(grid64, rng, (2,))
    w = random_field(grid64, rng, (2,))
    Pu = leray_project(u)
    xi = grid64.xi_deriv
    k2 = np.sum(xi**2, axis=0)
    safe = np.where(k2 > 0, k2, 1.0)
    oracle = u.coeffs - xi * np.sum(xi * u.coeffs, axis=0) / safe * (k2 > 0)
    assert np.max(np.abs(Pu.coeffs - oracle)) < 1e-12
    assert divergence_ratio(Pu) < 1e-12
    assert np.max(np.abs(leray_project(Pu).coeffs - Pu.coeffs)) < 1e-14
    lhs = np.vdot(Pu.coeffs, w.coeffs)
    rhs = np.vdot(u.coeffs, leray_project(w).coeffs)
    assert abs(lhs - rhs) < 1e-12 * abs(lhs)


def test_lp_norm_examples(grid64):
    one = forward_transform(np.ones(grid64.shape), grid64)
    V = grid64.volume
    for p in (1, 2, 3.5):
        assert grid_lp_norm(one, p) == pytest.approx(V ** (1 / p), rel=1e-12)
    assert grid_lp_norm(one, math.inf) == 1.0
    x = grid64.coordinates
    cos = forward_transform(np.cos(2 * math.pi * x[0] / grid64.L), grid64)
    # |cos| has kinks, so the Riemann sum is only second-order accurate here
    assert grid_lp_norm(cos, 1) == pytest.approx(2 / math.pi * V, rel=1e-3)
    with pytest.raises(ValueError):
        grid_lp_norm(cos, 0.5)


@given(st.integers(0, 2**32 - 1), st.floats(-2.0, 2.0), st.floats(0.1, 10.0))
def test_linear_operators_preserve_symmetry(seed, s, a):
    g = Grid(2, 16, 2 * math.pi)
    f = random_field(g, np.random.default_rng(seed), (2,), kmin=1)
    for out in (leray_project(f), lambda_power(f, s), f * a, spectral_derivative(f, 1)):
        assert out.conjugate_asymmetry() < 1e-13


@given(st.integers(0, 2**32 - 1))
def test_parseval_property(seed):
    g = Grid(2, 16, 3.0)
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(g.shape) * rng.uniform(0.1, 100)
    f = forward_transform(samples, g)
    assert f.l2_coeff_norm() == pytest.approx(math.sqrt(g.dx**2 * np.sum(samples**2)), rel=1e-12)


def test_three_dimensional_grid_round_trip(rng):
    g = Grid(3, 8, 2.0)
    samples = rng.standard_normal((3,) + g.shape)
    f = forward_transform(samples, g)
    assert np.max(np.abs(inverse_transform(f) - samples)) < 1e-12
    assert divergence_ratio(leray_project(f)) < 1e-12
