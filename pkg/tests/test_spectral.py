"""
Tests for the spectral layer.

Validates:
- slow-box transforms, derivatives, Sobolev norms and dealiased products
- torus spectra (symmetry, sampling, norms) and fast-torus multipliers
- two-scale realization and the oscillatory-average gap
- fast-period commensurability helpers
"""

import math

import numpy as np
import pytest

from shom.spectral import (
    MultiscaleField,
    SlowField,
    SlowGrid,
    TorusSpectrum,
    apply_multiplier,
    dealiased_product,
    divergence,
    fast_periods,
    gradient,
    is_commensurate,
    laplacian,
    op_dn_tanh,
    op_sech,
    oscillatory_average_gap,
    realize,
    resample,
    riesz_gradient,
    sech,
    snap_gamma,
    sobolev_norm,
    spectral_shift,
    torus_divergence,
    wavenumber_norm,
)


def _sine(grid: SlowGrid) -> SlowField:
    q = 2.0 * np.pi / grid.box_length
    return SlowField.from_function(grid, lambda x: np.sin(q * x))


class TestSlowGrid:
    def test_nodes_start_at_left_edge(self, unit_grid):
        assert unit_grid.axis[0] == pytest.approx(-math.pi)
        assert unit_grid.spacing == pytest.approx(2.0 * math.pi / 32)
        assert unit_grid.shape == (32,)

    def test_rejects_odd_point_count(self):
        with pytest.raises(ValueError, match="even"):
            SlowGrid(1, 1.0, 33)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError, match="dim"):
            SlowGrid(3, 1.0, 16)

    def test_two_dimensional_coordinates(self):
        grid = SlowGrid(2, 4.0, 8)
        x, y = grid.coordinates
        assert x.shape == (8, 8)
        assert np.allclose(x[:, 0], grid.axis)
        assert np.allclose(y[0, :], grid.axis)
        assert grid.wavevector.shape == (2, 8, 8)


class TestSlowOperators:
    """Multipliers and products on the slow box."""

    def test_spectrum_round_trip(self, unit_grid, rng):
        f = SlowField(unit_grid, rng.standard_normal(32))
        back = SlowField.from_spectrum(unit_grid, f.spectrum)
        assert np.allclose(back.values, f.values, atol=1e-13)

    def test_identity_multiplier(self, unit_grid, rng):
        f = SlowField(unit_grid, rng.standard_normal(32))
        g = apply_multiplier(f, lambda xi: 1.0)
        assert np.allclose(g.values, f.values, atol=1e-13)

    def test_derivative_of_sine(self, unit_grid):
        (dx,) = gradient(_sine(unit_grid))
        assert np.allclose(dx.values, np.cos(unit_grid.axis), atol=1e-12)

    def test_laplacian_equals_divergence_of_gradient(self):
        grid = SlowGrid(2, 2.0 * math.pi, 16)
        f = SlowField.from_function(grid, lambda x, y: np.sin(x) * np.cos(2 * y))
        assert np.allclose(laplacian(f).values, divergence(gradient(f)).values, atol=1e-12)
        assert np.allclose(laplacian(f).values, -5.0 * f.values, atol=1e-12)

    def test_multipliers_commute(self, unit_grid, rng):
        f = SlowField(unit_grid, rng.standard_normal(32))
        a = lambda xi: np.tanh(np.abs(xi[0]))
        b = lambda xi: 1j * xi[0]
        ab = apply_multiplier(apply_multiplier(f, a), b)
        ba = apply_multiplier(apply_multiplier(f, b), a)
        assert np.allclose(ab.values, ba.values, atol=1e-12)

    def test_multiplier_is_linear(self, unit_grid, rng):
        f = SlowField(unit_grid, rng.standard_normal(32))
        g = SlowField(unit_grid, rng.standard_normal(32))
        sym = lambda xi: np.exp(-xi[0] ** 2)
        lhs = apply_multiplier(f * 2.0 + g, sym)
        rhs = apply_multiplier(f, sym) * 2.0 + apply_multiplier(g, sym)
        assert np.allclose(lhs.values, rhs.values, atol=1e-12)

    def test_non_finite_symbol_names_wavevector(self, unit_grid):
        with pytest.raises(ValueError, match="not finite at k="):
            apply_multiplier(_sine(unit_grid), lambda xi: np.where(xi[0] == 0, np.inf, 1.0))

    def test_sobolev_l2_of_sine(self):
        grid = SlowGrid(1, 10.0, 64)
        assert sobolev_norm(_sine(grid), 0.0) == pytest.approx(math.sqrt(5.0), rel=1e-12)

    def test_sobolev_h1_of_sine(self, unit_grid):
        # (1 + 1) * 2 pi * (1/4 + 1/4)
        assert sobolev_norm(_sine(unit_grid), 1.0) == pytest.approx(math.sqrt(2.0 * math.pi), rel=1e-12)

    def test_sobolev_index_lower_bound(self, unit_grid):
        with pytest.raises(ValueError, match=">= -1"):
            sobolev_norm(_sine(unit_grid), -2.0)

    def test_dealiased_product_of_resolved_modes(self, unit_grid):
        s = _sine(unit_grid)
        c = SlowField.from_function(unit_grid, np.cos)
        p = dealiased_product(s, c)
        assert np.allclose(p.values, 0.5 * np.sin(2.0 * unit_grid.axis), atol=1e-13)

    def test_plain_product_is_refused(self, unit_grid):
        s = _sine(unit_grid)
        with pytest.raises(TypeError):
            s * s

    def test_resample_is_exact_for_band_limited_data(self, unit_grid):
        fine = resample(_sine(unit_grid), 64)
        assert fine.grid.n_points == 64
        assert np.allclose(fine.values, np.sin(fine.grid.axis), atol=1e-13)

    def test_spectral_shift_half_cell(self, unit_grid):
        dx = unit_grid.spacing
        shifted = spectral_shift(_sine(unit_grid), (0.5 * dx,))
        assert np.allclose(shifted.values, np.sin(unit_grid.axis + 0.5 * dx), atol=1e-12)

    def test_fields_on_different_grids_do_not_mix(self, unit_grid):
        with pytest.raises(ValueError, match="different grids"):
            _sine(unit_grid) + _sine(unit_grid.refined(64))


class TestTorusSpectrum:
    def _cos_sin3(self) -> TorusSpectrum:
        return TorusSpectrum.from_modes(1, 4, {1: 0.5, -1: 0.5, 3: 0.25j, -3: -0.25j})

    def test_non_hermitian_real_spectrum_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            TorusSpectrum.from_modes(1, 2, {1: 1.0})

    def test_complex_spectrum_accepted(self):
        s = TorusSpectrum.from_modes(1, 2, {1: 1.0}, real=False)
        assert s.coeff(1) == 1.0
        assert s.coeff(-1) == 0.0

    def test_sample_and_from_samples_agree(self):
        s = self._cos_sin3()
        back = TorusSpectrum.from_samples(s.sample(16), 4)
        assert np.allclose(back.coeffs, s.coeffs, atol=1e-14)

    def test_evaluate_matches_sample(self):
        s = self._cos_sin3()
        y = 2.0 * np.pi * np.arange(16) / 16
        assert np.allclose(s.evaluate(y), s.sample(16), atol=1e-13)

    def test_l2_norm_of_cosine(self):
        s = TorusSpectrum.from_modes(1, 3, {1: 0.5, -1: 0.5})
        assert s.l2_norm() == pytest.approx(math.sqrt(math.pi), rel=1e-14)

    def test_resize_keeps_coefficients(self):
        s = self._cos_sin3()
        grown = s.resized(6)
        assert grown.coeff(3) == s.coeff(3)
        assert s.resized(2).active_modes() == [(-1,), (1,)]

    def test_zero_mean_flag(self):
        assert self._cos_sin3().has_zero_mean
        assert not TorusSpectrum.from_modes(1, 1, {0: 1.0}).has_zero_mean

    def test_wavevector_beyond_cutoff(self):
        with pytest.raises(ValueError, match="exceeds cutoff"):
            self._cos_sin3().coeff(5)


class TestTorusOperators:
    def _field_2d(self) -> TorusSpectrum:
        return TorusSpectrum.from_modes(
            2, 3, {(1, 2): 0.3, (-1, -2): 0.3, (2, 0): 0.5j, (-2, 0): -0.5j}
        )

    def test_riesz_divergence_is_minus_abs_d(self):
        f = self._field_2d()
        lhs = torus_divergence(riesz_gradient(f))
        rhs = apply_multiplier(f, lambda k: -wavenumber_norm(k))
        assert np.allclose(lhs.coeffs, rhs.coeffs, atol=1e-14)

    def test_riesz_requires_zero_mean(self):
        f = TorusSpectrum.from_modes(1, 2, {0: 1.0, 1: 0.5, -1: 0.5})
        with pytest.raises(ValueError, match="zero-mean"):
            riesz_gradient(f)

    def test_dn_and_sech_symbols(self):
        f = TorusSpectrum.from_modes(1, 3, {2: 1.0, -2: 1.0})
        dn = op_dn_tanh(0.7, f)
        sc = op_sech(0.7, f)
        assert dn.coeff(2) == pytest.approx(2.0 * math.tanh(1.4))
        assert sc.coeff(2) == pytest.approx(1.0 / math.cosh(1.4))
        assert dn.real and sc.real

    def test_depth_must_be_positive(self):
        with pytest.raises(ValueError, match="positive"):
            op_dn_tanh(0.0, self._field_2d())

    def test_sech_does_not_overflow(self):
        with np.errstate(over="raise"):
            assert sech(1000.0) == 0.0
        assert sech(0.0) == 1.0


class TestTwoScale:
    def test_realize_separable_field(self):
        grid = SlowGrid(1, 2.0 * math.pi, 64)
        gamma = 0.25
        weight = SlowField.from_function(grid, lambda x: 1.0 + 0.5 * np.sin(x))
        g = TorusSpectrum.from_modes(1, 2, {1: 0.5, -1: 0.5})
        f = MultiscaleField.from_spectrum(grid, g, weight)
        assert f.zero_mean
        expected = weight.values * np.cos(grid.axis / gamma)
        assert np.allclose(realize(f, gamma).values, expected, atol=1e-12)

    def test_realize_rejects_nonpositive_gamma(self, unit_grid):
        f = MultiscaleField.zeros(unit_grid, 2)
        with pytest.raises(ValueError, match="gamma"):
            realize(f, 0.0)

    def test_zero_mean_multiscale_field_checked(self, unit_grid):
        g = TorusSpectrum.from_modes(1, 1, {0: 1.0})
        coeffs = np.broadcast_to(g.coeffs, (32, 3))
        with pytest.raises(ValueError, match="k=0"):
            MultiscaleField(unit_grid, 1, coeffs, True, True)

    def test_oscillatory_gap_decays_fast(self):
        grid = SlowGrid(1, 20.0, 512)
        f = SlowField.from_function(grid, lambda x: np.exp(-x ** 2))
        g = TorusSpectrum.from_modes(1, 2, {1: 0.5, -1: 0.5})
        coarse = oscillatory_average_gap(g, f, 0.25)
        fine = oscillatory_average_gap(g, f, 0.125)
        # int cos(X/gamma) exp(-X^2) dX = sqrt(pi) exp(-1/(4 gamma^2))
        assert coarse == pytest.approx(math.sqrt(math.pi) * math.exp(-4.0), rel=1e-6)
        assert coarse / fine >= 8.0


class TestCommensurability:
    def test_default_box_holds_integer_periods(self):
        L = 8.0 * math.pi
        assert fast_periods(L, 0.1) == pytest.approx(40.0)
        assert is_commensurate(L, 0.1)

    def test_snap_to_nearest_integer(self):
        L = 8.0 * math.pi
        assert not is_commensurate(L, 0.105)
        snapped = snap_gamma(L, 0.105)
        assert snapped == pytest.approx(4.0 / 38.0)
        assert is_commensurate(L, snapped)
