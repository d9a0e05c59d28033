"""Tests for bottom profiles and the profile library."""

import math

import numpy as np
import pytest

from shom.bathymetry import (
    BOTTOM_PRESETS,
    bottom_preset,
    cosine_bottom,
    default_cutoff,
    flat_bottom,
    from_modes,
    random_phase_bottom,
    realize_bottom,
    two_mode_bottom,
)
from shom.spectral import SlowGrid


class TestBottomProfile:
    def test_cosine_norm(self):
        b = cosine_bottom()
        # int_0^{2 pi} cos^2 = pi
        assert b.amplitude_norm ** 2 == pytest.approx(math.pi, rel=1e-14)
        assert b.modes == [(-1,), (1,)]

    def test_default_cutoff_adds_buffer(self):
        assert cosine_bottom().cutoff == 10
        assert default_cutoff({}) == 8

    def test_nonzero_mean_rejected(self):
        with pytest.raises(ValueError, match="zero mean"):
            from_modes({0: 0.1, 1: 0.5, -1: 0.5})

    def test_missing_conjugate_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            from_modes({1: 0.5})

    def test_flat_bottom(self):
        b = flat_bottom(2)
        assert b.is_flat
        assert b.dim == 2
        assert b.amplitude_norm == 0.0

    def test_scaled_and_cutoff(self):
        b = cosine_bottom().scaled(0.5).with_cutoff(3)
        assert b.cutoff == 3
        assert b.spectrum.coeff(1) == pytest.approx(0.25)

    def test_evaluate(self):
        b = two_mode_bottom()
        y = np.linspace(0.0, 2.0 * np.pi, 7)
        expected = np.cos(y) + 0.5 * np.cos(2 * y)
        assert np.allclose(b.evaluate(y), expected, atol=1e-14)


class TestPresets:
    def test_library_names(self):
        assert set(BOTTOM_PRESETS) == {"flat", "cos", "two_mode", "random_phase"}

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown bottom preset"):
            bottom_preset("ridge")

    def test_two_dimensional_cosine(self):
        b = cosine_bottom(wavenumber=(1, 1), dim=2)
        assert b.modes == [(-1, -1), (1, 1)]

    def test_random_phase_is_seeded(self):
        a = random_phase_bottom(seed=7)
        b = random_phase_bottom(seed=7)
        c = random_phase_bottom(seed=8)
        assert np.array_equal(a.spectrum.coeffs, b.spectrum.coeffs)
        assert not np.array_equal(a.spectrum.coeffs, c.spectrum.coeffs)

    def test_random_phase_moduli_decay(self):
        b = random_phase_bottom(n_modes=4, decay=0.5, amplitude=2.0)
        for k in range(1, 5):
            assert abs(b.spectrum.coeff(k)) == pytest.approx(2.0 * math.exp(-0.5 * k))


class TestRealization:
    def test_commensurate_realization_has_zero_mean(self):
        grid = SlowGrid(1, 8.0 * math.pi, 512)
        bg = realize_bottom(cosine_bottom(), 0.1, grid)
        assert abs(np.mean(bg.values)) < 1e-12
        assert np.allclose(bg.values, np.cos(grid.axis / 0.1), atol=1e-12)

    def test_flat_realizes_to_zero(self, unit_grid):
        assert realize_bottom(flat_bottom(), 0.5, unit_grid).max_abs() == 0.0

    def test_dimension_mismatch(self, unit_grid):
        with pytest.raises(ValueError, match="dim"):
            realize_bottom(flat_bottom(2), 0.5, unit_grid)
