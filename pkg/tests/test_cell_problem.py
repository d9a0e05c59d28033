"""
Tests for the cell problem.

Validates:
- boundary conditions of the closed form
- consistency of the fast DN trace with d_z phi at the surface
- agreement with the finite-difference oracle and its second-order convergence
"""

import math

import numpy as np
import pytest

from shom.bathymetry import cosine_bottom, two_mode_bottom
from shom.cell_problem import (
    bottom_flux_coefficients,
    cell_residual,
    dn_trace_fast,
    oracle_cell_solve,
    phi0_first_corrector,
    relative_l2_error,
    solve_cell,
    vertical_grid,
)
from shom.spectral import SlowField, SlowGrid, TorusSpectrum


@pytest.fixture
def psi1() -> TorusSpectrum:
    return TorusSpectrum.from_modes(1, 10, {1: 0.3, -1: 0.3, 2: 0.1j, -2: -0.1j})


class TestClosedForm:
    def test_top_trace_is_psi1(self, psi1, cos_bottom):
        phi = solve_cell(0.8, psi1, cos_bottom, [0.7])
        assert np.allclose(phi.evaluate(0.0)[..., 0], psi1.coeffs, atol=1e-14)
        assert np.allclose(phi.top_trace(), psi1.coeffs, atol=1e-14)

    def test_bottom_flux(self, psi1):
        b = two_mode_bottom()
        h0 = 0.8
        phi = solve_cell(h0, psi1, b, [0.7])
        flux = bottom_flux_coefficients(b.spectrum.resized(phi.cutoff), np.array([0.7]))
        assert np.allclose(phi.derivative(-1.0)[..., 0] / h0, flux, atol=1e-13)

    def test_zero_mode_vanishes(self, psi1, cos_bottom):
        phi = solve_cell(1.0, psi1, cos_bottom, [1.0])
        assert np.all(phi.samples[phi.cutoff] == 0.0)

    def test_surface_flux_matches_dn_trace(self, psi1, cos_bottom):
        h0 = 1.3
        phi = solve_cell(h0, psi1, cos_bottom, [0.4])
        trace = dn_trace_fast(h0, psi1, cos_bottom, [0.4])
        assert np.allclose(phi.derivative(0.0)[..., 0] / h0, trace.coeffs, atol=1e-13)

    def test_sampled_residual_is_second_order(self, psi1, cos_bottom):
        coarse = cell_residual(solve_cell(1.0, psi1, cos_bottom, [1.0], nz=32), 1.0, cos_bottom, [1.0], psi1)
        fine = cell_residual(solve_cell(1.0, psi1, cos_bottom, [1.0], nz=64), 1.0, cos_bottom, [1.0], psi1)
        assert fine < 1e-3
        assert coarse / fine > 3.0

    def test_deep_cells_do_not_overflow(self, psi1, cos_bottom):
        with np.errstate(over="raise"):
            phi = solve_cell(60.0, psi1, cos_bottom, [1.0])
        assert np.all(np.isfinite(phi.samples))

    def test_two_dimensional_bottom_flux(self):
        b = cosine_bottom(wavenumber=(1, 1), dim=2)
        psi1 = TorusSpectrum.zeros(2, b.cutoff)
        phi = solve_cell(1.0, psi1, b, [0.5, -0.2])
        flux = bottom_flux_coefficients(b.spectrum, np.array([0.5, -0.2]))
        assert np.allclose(phi.derivative(-1.0)[..., 0], flux, atol=1e-13)

    def test_invalid_inputs(self, psi1, cos_bottom):
        with pytest.raises(ValueError, match="positive"):
            solve_cell(0.0, psi1, cos_bottom, [1.0])
        with pytest.raises(ValueError, match="zero fast mean"):
            solve_cell(1.0, TorusSpectrum.from_modes(1, 2, {0: 1.0}), cos_bottom, [1.0])
        with pytest.raises(ValueError, match="components"):
            solve_cell(1.0, psi1, cos_bottom, [1.0, 2.0])


class TestInteriorCorrector:
    def test_value_at_bottom(self):
        grid = SlowGrid(1, 4.0, 32)
        q = 2.0 * math.pi / 4.0
        psi0 = SlowField.from_function(grid, lambda x: np.sin(q * x))
        h0 = SlowField.constant(grid, 1.0)
        phi = phi0_first_corrector(h0, psi0)
        expected = -0.5 * q ** 2 * np.sin(q * grid.axis)
        assert np.allclose(phi.bottom_trace(), expected, atol=1e-12)
        assert np.allclose(phi.top_trace(), 0.0)
        assert np.allclose(phi.derivative(-1.0)[..., 0], 0.0)


class TestOracle:
    def test_matches_closed_form(self, cos_bottom):
        psi1 = cos_bottom.spectrum
        exact = solve_cell(1.0, psi1, cos_bottom, [1.0], nz=64)
        oracle = oracle_cell_solve(1.0, psi1, cos_bottom, [1.0], ny=64, nz=64)
        assert relative_l2_error(oracle, exact) <= 1e-3

    def test_second_order_refinement(self, cos_bottom):
        psi1 = cos_bottom.spectrum
        errors = []
        for n in (64, 128):
            exact = solve_cell(1.0, psi1, cos_bottom, [1.0], nz=n)
            oracle = oracle_cell_solve(1.0, psi1, cos_bottom, [1.0], ny=n, nz=n)
            errors.append(relative_l2_error(oracle, exact))
        assert 3.5 <= errors[0] / errors[1] <= 4.5

    def test_oracle_satisfies_discrete_top_condition(self, cos_bottom):
        psi1 = cos_bottom.spectrum
        oracle = oracle_cell_solve(1.0, psi1, cos_bottom, [1.0], ny=32, nz=32)
        assert np.allclose(oracle.top_trace(), psi1.coeffs, atol=1e-13)
        assert np.allclose(oracle.z, vertical_grid(32))

    def test_grid_limits(self, cos_bottom):
        psi1 = cos_bottom.spectrum
        with pytest.raises(ValueError, match="at least 16"):
            oracle_cell_solve(1.0, psi1, cos_bottom, [1.0], ny=8, nz=32)
        with pytest.raises(ValueError, match="cannot resolve"):
            oracle_cell_solve(1.0, psi1.resized(20), cos_bottom, [1.0], ny=32, nz=32)
