"""
Tests for the fast-time corrector.

Validates:
- the exact mode propagator against an independent RK4 integration
- unitarity of the homogeneous flow
- the stationary corrector as a fixed point of the evolution
- linear secular growth at exact resonance
- the Duhamel energy bound
"""

import numpy as np
import pytest

from shom.bathymetry import cosine_bottom, from_modes, random_phase_bottom
from shom.corrector import (
    CorrectorState,
    ModeState,
    energy_bound,
    energy_norm,
    evolve,
    forcing,
    mode_history,
    propagate_mode,
    stationary,
    stationary_field,
    system_residual,
)
from shom.errors import ResonanceError
from shom.resonance import NonresonanceGuard
from shom.shallow_water import stream_state
from shom.spectral import SlowGrid, TorusSpectrum


def _rk4(zeta, psi, omega2, kv, f, tau, dt):
    """Classical RK4 on the (zeta_k, psi_k) system, vectorized over modes."""

    def rhs(z, p):
        return -1j * kv * z + omega2 * p + f, -1j * kv * p - z

    for _ in range(int(round(tau / dt))):
        a1, b1 = rhs(zeta, psi)
        a2, b2 = rhs(zeta + 0.5 * dt * a1, psi + 0.5 * dt * b1)
        a3, b3 = rhs(zeta + 0.5 * dt * a2, psi + 0.5 * dt * b2)
        a4, b4 = rhs(zeta + dt * a3, psi + dt * b3)
        zeta = zeta + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        psi = psi + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    return zeta, psi


def _random_spectrum(rng, cutoff: int) -> TorusSpectrum:
    spec = TorusSpectrum.from_samples(rng.standard_normal(4 * cutoff), cutoff)
    coeffs = spec.coeffs.copy()
    coeffs[cutoff] = 0.0
    return spec.with_coeffs(coeffs)


@pytest.fixture
def guard() -> NonresonanceGuard:
    return NonresonanceGuard.for_depth(0.5)


class TestModePropagator:
    def test_matches_rk4(self, rng):
        modes = []
        while len(modes) < 100:
            k = int(rng.integers(1, 3))
            h0 = rng.uniform(0.8, 1.2)
            V0 = rng.uniform(-0.5, 0.5)
            zeta = complex(*rng.standard_normal(2))
            psi = complex(*rng.standard_normal(2))
            fhat = complex(*rng.standard_normal(2))
            m = ModeState.from_amplitudes(k, zeta, psi, h0, V0)
            if min(abs(m.omega + m.advection), abs(m.omega - m.advection)) >= 0.2:
                modes.append((m, zeta, psi, fhat))

        zeta0 = np.array([z for _, z, _, _ in modes])
        psi0 = np.array([p for _, _, p, _ in modes])
        fhat = np.array([f for _, _, _, f in modes])
        omega2 = np.array([m.omega ** 2 for m, _, _, _ in modes])
        kv = np.array([m.advection for m, _, _, _ in modes])

        zeta_rk, psi_rk = _rk4(zeta0, psi0, omega2, kv, fhat, 50.0, 2e-3)
        exact = [propagate_mode(m, 50.0, f).amplitudes() for m, _, _, f in modes]
        assert np.max(np.abs(zeta_rk - np.array([z for z, _ in exact]))) <= 1e-8
        assert np.max(np.abs(psi_rk - np.array([p for _, p in exact]))) <= 1e-8

    def test_amplitudes_round_trip(self):
        m = ModeState.from_amplitudes(2, 0.3 - 0.1j, 0.2j, 0.9, 0.4)
        zeta, psi = m.amplitudes()
        assert zeta == pytest.approx(0.3 - 0.1j, abs=1e-15)
        assert psi == pytest.approx(0.2j, abs=1e-15)

    def test_homogeneous_flow_is_unitary(self):
        m = ModeState.from_amplitudes(1, 0.7 + 0.2j, -0.4j, 1.0, 0.3)
        later = propagate_mode(m, 1000.0)
        assert abs(abs(later.Z) - abs(m.Z)) <= 1e-13
        assert abs(abs(later.W) - abs(m.W)) <= 1e-13

    def test_zero_mode_rejected(self):
        with pytest.raises(ValueError, match="omega"):
            ModeState.from_amplitudes(0, 1.0, 0.0, 1.0, 0.0)


class TestStationary:
    def test_solves_the_system(self, guard):
        b = cosine_bottom()
        zeta1, psi1 = stationary(1.0, [0.4], b, guard)
        assert system_residual(zeta1, psi1, 1.0, [0.4], b) < 1e-13
        assert zeta1.has_zero_mean and psi1.has_zero_mean

    def test_fixed_point_of_mode_evolution(self, guard):
        b = cosine_bottom()
        h0, V0 = 1.0, 0.4
        zeta1, psi1 = stationary(h0, [V0], b, guard)
        f = forcing(h0, [V0], b)
        m = ModeState.from_amplitudes(1, zeta1.coeff(1), psi1.coeff(1), h0, V0)
        zeta, psi = propagate_mode(m, 100.0, f.coeff(1)).amplitudes()
        assert abs(zeta - zeta1.coeff(1)) < 1e-10
        assert abs(psi - psi1.coeff(1)) < 1e-10

    def test_fixed_point_of_field_evolution(self, guard):
        grid = SlowGrid(1, 8.0, 8)
        surface = stream_state(grid, 0.5)
        b = random_phase_bottom(n_modes=3)
        c0 = stationary_field(surface, b, guard)
        later = evolve(c0, surface, b, 100.0)
        for index in [(0,), (5,)]:
            z0, p0 = c0.at(index)
            z1, p1 = later.at(index)
            assert energy_norm(z1 - z0, p1 - p0, 0.0, 1.0) < 1e-10

    def test_resonance_raises(self, guard):
        b = cosine_bottom()
        V0 = np.sqrt(np.tanh(1.0))
        with pytest.raises(ResonanceError) as info:
            stationary(1.0, [V0], b, guard)
        assert {flag.k for flag in info.value.flags} == {(1,), (-1,)}

    def test_negligible_bottom_modes_stay_inactive(self, guard):
        # |b_2| is below the mode tolerance; k = 2 sits exactly on resonance
        b = from_modes({1: 0.5, -1: 0.5, 2: 1e-16, -2: 1e-16})
        assert b.modes == [(-1,), (1,)]
        V0 = np.sqrt(2.0 * np.tanh(2.0)) / 2.0
        zeta1, psi1 = stationary(1.0, [V0], b, guard)
        assert zeta1.coeff(2) == 0.0 and psi1.coeff(2) == 0.0
        assert abs(zeta1.coeff(1)) > 0.0
        assert np.all(np.isfinite(zeta1.coeffs)) and np.all(np.isfinite(psi1.coeffs))

        surface = stream_state(SlowGrid(1, 8.0, 8), V0)
        field = stationary_field(surface, b, guard)
        z, p = field.at((3,))
        assert z.coeff(2) == 0.0 and p.coeff(-2) == 0.0


class TestEvolution:
    def test_secular_growth_at_resonance(self):
        b = cosine_bottom()
        h0 = 1.0
        omega = np.sqrt(np.tanh(h0))
        V0 = -omega
        fhat = forcing(h0, [V0], b).coeff(1)
        m = ModeState.from_amplitudes(1, 0.0, 0.0, h0, V0)
        taus = np.linspace(0.0, 100.0, 201)
        z_abs = [abs(propagate_mode(m, t, fhat).Z) for t in taus]
        slope = np.polyfit(taus, z_abs, 1)[0]
        assert slope == pytest.approx(abs(fhat) / np.sqrt(omega), rel=1e-2)

    def test_split_span_is_exact(self, guard):
        grid = SlowGrid(1, 8.0, 8)
        surface = stream_state(grid, 0.3)
        b = cosine_bottom()
        c0 = CorrectorState.zeros(grid, b.cutoff)
        once = evolve(c0, surface, b, 10.0)
        split = evolve(c0, surface, b, 10.0, n_steps=5)
        assert np.allclose(once.zeta1.coeffs, split.zeta1.coeffs, atol=1e-12)
        assert np.allclose(once.psi1.coeffs, split.psi1.coeffs, atol=1e-12)

    def test_zero_mode_stays_zero(self):
        grid = SlowGrid(1, 8.0, 8)
        surface = stream_state(grid, 0.3)
        b = cosine_bottom()
        later = evolve(CorrectorState.zeros(grid, b.cutoff), surface, b, 3.0)
        assert np.all(later.zeta1.coeffs[..., b.cutoff] == 0.0)

    def test_energy_bound_holds(self, rng):
        b = random_phase_bottom(n_modes=4, seed=3)
        cutoff = b.cutoff
        zeta1 = _random_spectrum(rng, cutoff)
        psi1 = _random_spectrum(rng, cutoff)
        h0, V0, r = 0.9, [0.35], 1.0
        f = forcing(h0, V0, b)
        taus = np.linspace(0.0, 50.0, 100)
        history = mode_history(zeta1, psi1, h0, V0, b, taus, r)
        for tau, e in zip(taus, history.energy):
            assert e ** 2 <= energy_bound(zeta1, psi1, f, tau, r, h0) * (1.0 + 1e-12)

    def test_history_starts_at_initial_energy(self, rng):
        b = cosine_bottom()
        zeta1 = _random_spectrum(rng, b.cutoff)
        psi1 = _random_spectrum(rng, b.cutoff)
        history = mode_history(zeta1, psi1, 1.0, [0.2], b, np.array([0.0, 1.0]))
        assert history.energy[0] == pytest.approx(energy_norm(zeta1, psi1, 0.0, 1.0), rel=1e-12)
        assert len(history.to_rows()) == 2 * len(history.modes)


class TestForcing:
    def test_cosine_forcing_coefficient(self):
        f = forcing(0.8, [0.5], cosine_bottom())
        assert f.coeff(1) == pytest.approx(1j * 0.5 * 0.5 / np.cosh(0.8))
        assert f.has_zero_mean

    def test_depth_must_be_positive(self):
        with pytest.raises(ValueError, match="positive"):
            forcing(0.0, [0.5], cosine_bottom())
