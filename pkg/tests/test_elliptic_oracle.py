"""
Tests for the strip Dirichlet-Neumann oracle.

Validates:
- the flat-strip symbol |xi| tanh(sqrt(mu)|xi|) / sqrt(mu)
- the discrete Green identity, symmetry and positivity
- second-order self-convergence
- depth and argument checks
"""

import math

import numpy as np
import pytest

from shom.bathymetry import cosine_bottom, flat_bottom
from shom.elliptic_oracle import build_sigma, dn_apply, solve_potential, strip_energy
from shom.errors import DepthError
from shom.spectral import SlowField, SlowGrid


@pytest.fixture
def grid() -> SlowGrid:
    return SlowGrid(1, 2.0 * math.pi, 64)


@pytest.fixture
def wavy_problem(grid):
    zeta = SlowField.from_function(grid, lambda x: 0.1 * np.cos(x))
    return build_sigma(zeta, cosine_bottom(), 0.04, nz=32)


def _pairing(a: SlowField, b: SlowField) -> float:
    return float(np.sum(a.values * b.values) * a.grid.spacing)


class TestFlatStrip:
    def test_single_mode_symbol(self, grid):
        mu = 0.01
        sp = build_sigma(SlowField.constant(grid, 0.0), flat_bottom(), mu, nz=32)
        psi = SlowField.from_function(grid, np.cos)
        g = dn_apply(sp, psi).values / mu
        symbol = math.tanh(math.sqrt(mu)) / math.sqrt(mu)
        assert np.allclose(g, symbol * psi.values, rtol=0.0, atol=5e-3 * symbol)

    def test_coefficients_are_identity(self, grid):
        sp = build_sigma(SlowField.constant(grid, 0.0), flat_bottom(), 0.01, nz=16)
        assert sp.min_eigenvalue() == pytest.approx(1.0)
        assert np.allclose(sp.p12, 0.0)
        assert sp.meta["min_depth"] == pytest.approx(1.0)


class TestDiscreteIdentities:
    def test_green_identity(self, grid, wavy_problem):
        psi = SlowField.from_function(grid, lambda x: np.sin(x) + 0.3 * np.cos(2 * x))
        potential = solve_potential(wavy_problem, psi)
        flux = dn_apply(wavy_problem, psi, potential)
        energy = strip_energy(wavy_problem, potential)
        assert _pairing(psi, flux) == pytest.approx(energy, rel=1e-8)

    def test_symmetric_and_positive(self, grid, wavy_problem, rng):
        psi1 = SlowField(grid, rng.standard_normal(64))
        psi2 = SlowField(grid, rng.standard_normal(64))
        g1 = dn_apply(wavy_problem, psi1)
        g2 = dn_apply(wavy_problem, psi2)
        a, b = _pairing(psi1, g2), _pairing(psi2, g1)
        assert abs(a - b) <= 1e-8 * max(abs(a), 1.0)
        assert _pairing(psi1, g1) >= -1e-8
        assert _pairing(psi2, g2) >= -1e-8

    def test_constants_are_annihilated(self, grid, wavy_problem):
        g = dn_apply(wavy_problem, SlowField.constant(grid, 1.0))
        assert np.max(np.abs(g.values)) < 1e-10

    def test_potential_keeps_dirichlet_data(self, grid, wavy_problem):
        psi = SlowField.from_function(grid, np.sin)
        potential = solve_potential(wavy_problem, psi)
        assert np.allclose(potential.values[:, -1], psi.values)
        assert potential.residual < 1e-10

    def test_iterative_solver_agrees_with_direct(self, grid):
        zeta = SlowField.from_function(grid, lambda x: 0.1 * np.cos(x))
        psi = SlowField.from_function(grid, np.sin)
        direct = dn_apply(build_sigma(zeta, cosine_bottom(), 0.04, nz=16), psi)
        iterative = dn_apply(build_sigma(zeta, cosine_bottom(), 0.04, nz=16, solver="cg"), psi)
        scale = np.max(np.abs(direct.values))
        assert np.allclose(iterative.values, direct.values, atol=1e-4 * scale)


@pytest.mark.slow
class TestSelfConvergence:
    def test_second_order(self):
        energies = []
        for n in (32, 64, 128):
            grid = SlowGrid(1, 2.0 * math.pi, n)
            zeta = SlowField.from_function(grid, lambda x: 0.1 * np.cos(x))
            psi = SlowField.from_function(grid, np.sin)
            sp = build_sigma(zeta, flat_bottom(), 0.1, nz=n // 2)
            energies.append(_pairing(psi, dn_apply(sp, psi)))
        order = math.log2((energies[0] - energies[1]) / (energies[1] - energies[2]))
        assert 1.8 <= order <= 2.2


class TestArguments:
    def test_shallow_point_raises(self, grid):
        with pytest.raises(DepthError):
            build_sigma(SlowField.constant(grid, -0.6), flat_bottom(), 0.01)

    def test_invalid_arguments(self, grid):
        zeta = SlowField.constant(grid, 0.0)
        with pytest.raises(ValueError, match="mu must be positive"):
            build_sigma(zeta, flat_bottom(), 0.0)
        with pytest.raises(ValueError, match="unknown solver"):
            build_sigma(zeta, flat_bottom(), 0.01, solver="gmres")
        with pytest.raises(ValueError, match="d = 1"):
            build_sigma(SlowField.constant(SlowGrid(2, 1.0, 8), 0.0), flat_bottom(2), 0.01)
