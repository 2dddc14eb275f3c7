"""Tests for the Fourier-analysis core: transforms, multipliers, norms,
dealiasing, and commutators, checked against naive direct-summation oracles.
"""

import numpy as np
import pytest

from rieszlab.errors import MeanNotZero, NonHermitianSymbol, ParameterError
from rieszlab.spectral import (
    Field,
    Grid,
    Multiplier,
    VectorField,
    apply_multiplier,
    commutator_apply,
    dealias,
    divergence,
    forward_transform,
    fractional_power,
    gradient,
    green_potential,
    inverse_transform,
    sobolev_norm,
    sobolev_norm_fractional,
)


def random_field(grid: Grid, seed: int, band_limit: bool = True, mean_free: bool = False) -> Field:
    rng = np.random.default_rng(seed)
    f = Field(grid, rng.standard_normal(grid.shape))
    if band_limit:
        f = dealias(f)
    if mean_free:
        f = Field(grid, f.samples - f.samples.mean())
    return f


def naive_dft(samples: np.ndarray) -> np.ndarray:
    """O(P^{2d}) direct-summation forward transform, FFT layout."""
    shape = samples.shape
    p = shape[0]
    d = samples.ndim
    modes = np.fft.fftfreq(p) * p
    out = np.zeros(shape, dtype=complex)
    grids = np.meshgrid(*[np.arange(p) for _ in range(d)], indexing="ij")
    x = [g * (2 * np.pi / p) for g in grids]
    for idx in np.ndindex(shape):
        n = [modes[i] for i in idx]
        phase = sum(nj * xj for nj, xj in zip(n, x))
        out[idx] = np.sum(samples * np.exp(-1j * phase))
    return out


def naive_multiplier(samples: np.ndarray, symbol_of_n) -> np.ndarray:
    """Direct-summation application of a multiplier, zero mode annihilated."""
    shape = samples.shape
    p = shape[0]
    coeffs = naive_dft(samples)
    modes = np.fft.fftfreq(p) * p
    grids = np.meshgrid(*[np.arange(p) for _ in range(samples.ndim)], indexing="ij")
    x = [g * (2 * np.pi / p) for g in grids]
    out = np.zeros(shape, dtype=complex)
    for idx in np.ndindex(shape):
        n = np.array([modes[i] for i in idx])
        if not n.any():
            continue
        phase = sum(nj * xj for nj, xj in zip(n, x))
        out += symbol_of_n(n) * coeffs[idx] * np.exp(1j * phase)
    return (out / p**samples.ndim).real


class TestGrid:
    def test_invariants(self):
        g = Grid(2, 16)
        assert g.spacing == pytest.approx(2 * np.pi / 16)
        assert g.cell_volume == pytest.approx((2 * np.pi / 16) ** 2)
        assert g.volume == pytest.approx((2 * np.pi) ** 2)
        assert g.cell_volume * 16**2 == pytest.approx(g.volume)

    def test_rejects_odd_or_tiny(self):
        with pytest.raises(ParameterError):
            Grid(1, 15)
        with pytest.raises(ParameterError):
            Grid(1, 2)
        with pytest.raises(ParameterError):
            Grid(4, 16)

    def test_wavenumber_range(self):
        g = Grid(1, 8)
        ks = np.sort(g.k_axes[0].ravel())
        assert ks.tolist() == [-4, -3, -2, -1, 0, 1, 2, 3]


class TestForwardTransform:
    def test_zero_field(self):
        g = Grid(2, 8)
        assert np.all(forward_transform(Field.zeros(g)) == 0)

    def test_pure_mode_symmetry(self):
        g = Grid(1, 16)
        f = Field.from_function(g, np.cos)
        coeffs = forward_transform(f)
        assert abs(coeffs[1]) == pytest.approx(abs(coeffs[-1]), rel=1e-14)
        mask = np.ones(16, dtype=bool)
        mask[[1, -1]] = False
        assert np.max(np.abs(coeffs[mask])) < 1e-12 * abs(coeffs[1])

    def test_matches_direct_summation(self):
        g = Grid(2, 8)
        f = random_field(g, seed=3, band_limit=False)
        coeffs = forward_transform(f)
        ref = naive_dft(f.samples)
        assert np.max(np.abs(coeffs - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_roundtrip(self):
        g = Grid(2, 16)
        f = random_field(g, seed=5, band_limit=False)
        back = inverse_transform(forward_transform(f), g)
        assert np.max(np.abs(back.samples - f.samples)) <= 1e-12 * f.max_abs()


class TestApplyMultiplier:
    def test_identity(self):
        g = Grid(2, 8)
        f = random_field(g, seed=1)
        ident = Multiplier(lambda ks: np.ones(()), name="1")
        out = apply_multiplier(f, ident)
        assert np.max(np.abs(out.samples - f.samples)) < 1e-13

    def test_derivative_of_sine(self):
        g = Grid(1, 16)
        f = Field.from_function(g, np.sin)

        def deriv_symbol(ks):
            # i*n with the self-conjugate Nyquist entry zeroed, as gradient does
            k = ks[0].copy()
            k[k == -g.n_points // 2] = 0.0
            return 1j * k

        out = apply_multiplier(f, Multiplier(deriv_symbol, name="i n1"))
        expected = Field.from_function(g, np.cos)
        assert np.max(np.abs(out.samples - expected.samples)) < 1e-13

    def test_fractional_symbol_vs_direct_summation(self):
        g = Grid(1, 16)
        f = random_field(g, seed=7)
        m = Multiplier(
            lambda ks: np.sqrt(sum(k**2 for k in ks)) ** 1.3,
            zero_mode_policy="annihilate",
            name="|n|^1.3",
        )
        out = apply_multiplier(f, m)
        ref = naive_multiplier(f.samples, lambda n: np.linalg.norm(n) ** 1.3)
        assert np.max(np.abs(out.samples - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_reject_policy(self):
        g = Grid(1, 16)
        f = Field.constant(g, 1.0)
        m = Multiplier(lambda ks: np.ones(()), zero_mode_policy="reject", name="1")
        with pytest.raises(MeanNotZero):
            apply_multiplier(f, m)

    def test_non_hermitian_symbol_rejected(self):
        g = Grid(1, 16)
        f = random_field(g, seed=2)
        bad = Multiplier(
            lambda ks: 1j * np.sqrt(sum(k**2 for k in ks)),
            zero_mode_policy="annihilate",
            name="i|n|",
        )
        with pytest.raises(NonHermitianSymbol):
            apply_multiplier(f, bad)

    def test_composition_is_pointwise_product_and_commutes(self):
        g = Grid(2, 16)
        f = random_field(g, seed=11)
        m1 = Multiplier(lambda ks: sum(k**2 for k in ks), name="|n|^2")
        m2 = Multiplier(lambda ks: np.cos(ks[0]) + 2.0, name="cos(n1)+2")
        two_step = apply_multiplier(apply_multiplier(f, m2), m1)
        swapped = apply_multiplier(apply_multiplier(f, m1), m2)
        prod = Multiplier(
            lambda ks: sum(k**2 for k in ks) * (np.cos(ks[0]) + 2.0), name="product"
        )
        one_step = apply_multiplier(f, prod)
        scale = max(one_step.max_abs(), 1.0)
        assert np.max(np.abs(two_step.samples - one_step.samples)) <= 1e-12 * scale
        assert np.max(np.abs(two_step.samples - swapped.samples)) <= 1e-12 * scale


class TestFractionalPower:
    @pytest.mark.parametrize("s", [-0.5, 0.3, 1.0, 2.0])
    def test_unit_mode_fixed(self, s):
        g = Grid(1, 16)
        f = Field.from_function(g, np.cos)
        out = fractional_power(f, s)
        assert np.max(np.abs(out.samples - f.samples)) < 1e-12

    def test_pure_mode_scaling(self):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: np.cos(2 * x))
        out = fractional_power(f, 0.7)
        assert np.max(np.abs(out.samples - 2**0.7 * f.samples)) < 1e-12

    def test_inverse_composition(self):
        g = Grid(1, 16)
        f = random_field(g, seed=13, mean_free=True)
        back = fractional_power(fractional_power(f, 0.5), -0.5)
        assert np.max(np.abs(back.samples - f.samples)) <= 1e-11 * max(f.max_abs(), 1)

    def test_additive_composition(self):
        g = Grid(2, 16)
        f = random_field(g, seed=17, mean_free=True)
        a = fractional_power(fractional_power(f, 0.8), 0.6)
        b = fractional_power(f, 1.4)
        assert np.max(np.abs(a.samples - b.samples)) <= 1e-11 * max(b.max_abs(), 1)

    def test_negative_power_rejects_mean(self):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: 1.0 + 0 * x)
        with pytest.raises(MeanNotZero):
            fractional_power(f, -0.5)

    def test_mean_annihilated_for_positive_power(self):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: 3.0 + np.cos(x))
        out = fractional_power(f, 2.0)
        assert abs(out.mean()) < 1e-13


class TestGradientDivergence:
    def test_gradient_of_constant(self):
        g = Grid(2, 8)
        grad = gradient(Field.constant(g, 4.2))
        assert grad.max_abs() < 1e-14

    def test_laplacian_of_pure_modes(self):
        g = Grid(2, 16)
        f = Field.from_function(g, lambda x, y: np.cos(x) + np.cos(y))
        lap = divergence(gradient(f))
        assert np.max(np.abs(lap.samples + f.samples)) < 1e-12

    def test_divergence_integral_vanishes(self):
        g = Grid(2, 16)
        v = VectorField(tuple(random_field(g, seed=20 + j) for j in range(2)))
        assert abs(divergence(v).integral()) <= 1e-12

    def test_div_grad_is_minus_lambda_squared(self):
        g = Grid(2, 16)
        f = random_field(g, seed=23)  # band-limited: Nyquist-free
        a = divergence(gradient(f))
        b = fractional_power(f, 2.0)
        assert np.max(np.abs(a.samples + b.samples)) <= 1e-12 * max(b.max_abs(), 1.0)


class TestGreenPotential:
    def test_unit_mode(self):
        g = Grid(1, 16)
        f = Field.from_function(g, np.cos)
        u = green_potential(f)
        assert np.max(np.abs(u.samples - f.samples)) < 1e-13

    def test_mixed_mode_d2(self):
        g = Grid(2, 16)
        f = Field.from_function(g, lambda x, y: np.cos(2 * x + y))
        u = green_potential(f)
        assert np.max(np.abs(u.samples - f.samples / 5.0)) < 1e-13

    def test_residual_of_poisson_solve(self):
        g = Grid(2, 16)
        f = random_field(g, seed=29, mean_free=True)
        u = green_potential(f)
        lap_u = divergence(gradient(u))
        residual = Field(g, lap_u.samples + f.samples)
        assert residual.l2_norm() <= 1e-12 * f.l2_norm()

    def test_d1_same_multiplier(self):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: np.cos(3 * x))
        u = green_potential(f)
        assert np.max(np.abs(u.samples - f.samples / 9.0)) < 1e-13

    def test_rejects_nonzero_mean(self):
        g = Grid(2, 8)
        with pytest.raises(MeanNotZero):
            green_potential(Field.constant(g, 1.0))


class TestSobolevNorm:
    def test_zero_field(self):
        assert sobolev_norm(Field.zeros(Grid(1, 16)), 3) == 0.0

    @pytest.mark.parametrize("m", [0, 1, 2, 5])
    def test_unit_mode_closed_form(self, m):
        g = Grid(1, 16)
        f = Field.from_function(g, np.cos)
        expected = np.sqrt((m + 1) * (2 * np.pi) / 2)
        assert sobolev_norm(f, m) == pytest.approx(expected, rel=1e-13)

    def test_unit_mode_closed_form_d2(self):
        g = Grid(2, 16)
        f = Field.from_function(g, lambda x, y: np.cos(x))
        expected = np.sqrt(3 * (2 * np.pi) ** 2 / 2)
        assert sobolev_norm(f, 2) == pytest.approx(expected, rel=1e-13)

    def test_matches_physical_quadrature(self):
        g = Grid(2, 16)
        f = random_field(g, seed=31)
        pieces = [f, fractional_power(f, 1.0), fractional_power(f, 2.0)]
        quad = sum(p.l2_norm() ** 2 for p in pieces)
        assert sobolev_norm(f, 2) ** 2 == pytest.approx(quad, rel=1e-10)

    def test_fractional_matches_integer_weighting(self):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: np.cos(2 * x))
        # single mode |n| = 2: H^s norm = sqrt((1+4)^s) * ||f||_L2
        expected = (5.0**0.75) * f.l2_norm()
        assert sobolev_norm_fractional(f, 1.5) == pytest.approx(expected, rel=1e-13)


class TestDealias:
    def test_band_limited_unchanged(self):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: np.cos(5 * x))  # 5 <= 16/3
        out = dealias(f)
        assert np.max(np.abs(out.samples - f.samples)) < 1e-13

    def test_top_mode_removed(self):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: np.cos(7 * x))  # 7 > 16/3
        assert dealias(f).max_abs() < 1e-13

    def test_idempotent(self):
        g = Grid(2, 16)
        f = random_field(g, seed=37, band_limit=False)
        once = dealias(f)
        twice = dealias(once)
        assert np.max(np.abs(twice.samples - once.samples)) < 1e-13


class TestCommutator:
    def test_constant_g_commutes(self):
        g = Grid(1, 16)
        f = random_field(g, seed=41)
        out = commutator_apply(1.3, Field.constant(g, 2.5), f)
        assert out.max_abs() <= 1e-12 * max(f.max_abs(), 1)

    def test_s_zero_commutes(self):
        g = Grid(1, 16)
        f = random_field(g, seed=43)
        gg = random_field(g, seed=44)
        assert commutator_apply(0.0, gg, f).max_abs() == 0.0

    @pytest.mark.parametrize("s", [-0.5, 0.7, 1.5, 2.5])
    def test_bound_ratio_finite_over_trials(self, s):
        """Monte-Carlo estimate of the commutator bound constant stays finite."""
        eps = 0.01
        g = Grid(1, 32)
        d = 1
        ratios = []
        for trial in range(25):
            f = random_field(g, seed=1000 + trial, mean_free=True)
            gg = random_field(g, seed=2000 + trial, mean_free=True)
            comm = commutator_apply(s, gg, f)
            bound = sobolev_norm_fractional(gg, d / 2 + 1 + eps) * _lam_norm(f, s - 1) \
                + sobolev_norm_fractional(f, d / 2 + eps) * _lam_norm(gg, s)
            ratios.append(comm.l2_norm() / bound)
        ratios = np.array(ratios)
        assert np.all(np.isfinite(ratios))
        assert np.all(ratios >= 0)
        assert np.max(ratios) < 1e3


def _lam_norm(f: Field, s: float) -> float:
    from rieszlab.spectral import seminorm

    return seminorm(f, s)


class TestModuleProperties:
    @pytest.mark.parametrize("seed", range(5))
    def test_parseval(self, seed):
        g = Grid(2, 16)
        f = random_field(g, seed=100 + seed, band_limit=False)
        physical = f.l2_norm()
        coeffs = forward_transform(f)
        spectral = np.sqrt(g.parseval * np.sum(np.abs(coeffs) ** 2))
        assert abs(physical - spectral) <= 1e-10 * physical

    @pytest.mark.parametrize("seed", range(10))
    def test_sobolev_ordering(self, seed):
        rng = np.random.default_rng(500 + seed)
        g = Grid(1, 32)
        f = random_field(g, seed=600 + seed, mean_free=True)
        s1, s2 = np.sort(rng.uniform(-1.0, 3.0, size=2))
        from rieszlab.spectral import seminorm

        assert seminorm(f, s1) <= seminorm(f, s2) + 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_realness_preserved(self, seed):
        g = Grid(2, 16)
        f = random_field(g, seed=700 + seed, mean_free=True)
        for out in (
            fractional_power(f, 1.3),
            fractional_power(f, -0.4),
            green_potential(f),
            dealias(f),
            divergence(gradient(f)),
        ):
            assert out.samples.dtype == np.float64
            assert np.all(np.isfinite(out.samples))
