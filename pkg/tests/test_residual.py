"""
Tests for the consistency residuals and the mu-sweep.

Validates:
- residuals ignore constant shifts of the potential
- fine-grid sizing and the combined H* norm
- acceptance rules applied to fitted slopes
- remainders shrink monotonically along the sweep
- end-to-end rate studies, including the default sweep and its flat control
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest
import scipy.fft as sp_fft

from shom import residual
from shom.bathymetry import flat_bottom
from shom.config import (
    E1_SLOPE_MIN,
    E2_SLOPE_MIN,
    FLAT_SLOPE_TARGET,
    FLAT_SLOPE_TOL,
    MU_SWEEP,
    REMAINDER_SLOPE_MIN,
)
from shom.effective_dn import ansatz_time_derivative, build_ansatz
from shom.elliptic_oracle import build_sigma
from shom.residual import (
    ConsistencyRecord,
    RateStudyResult,
    fine_points,
    rate_study,
    resample_state,
    residual_e1,
    residual_e2,
)
from shom.run_config import RunConfig, get_default_config
from shom.shallow_water import SurfaceState, gaussian_bump_state, step
from shom.spectral import SlowField, SlowGrid

MU = 0.04


def _shifted(state: SurfaceState, c: float) -> SurfaceState:
    return replace(state, psi0=state.psi0 + SlowField.constant(state.grid, c))


def _residuals(states: list[SurfaceState], dt: float):
    ansatz = [build_ansatz(s, None, MU) for s in states]
    dzeta, dpsi = ansatz_time_derivative(ansatz[0], ansatz[2], dt)
    current = ansatz[1]
    sp = build_sigma(current.zeta_a, flat_bottom(), MU, nz=16)
    return residual_e1(current, sp, dzeta), residual_e2(current, sp, dpsi)


class TestResiduals:
    def test_constant_potential_shift_is_invisible(self):
        grid = SlowGrid(1, 2.0 * math.pi, 64)
        dt = 1e-3
        s0 = gaussian_bump_state(grid, amplitude=0.05, width=1.0)
        s1 = step(s0, dt)
        s2 = step(s1, dt)
        e1, e2 = _residuals([s0, s1, s2], dt)
        f1, f2 = _residuals([_shifted(s, 3.0) for s in (s0, s1, s2)], dt)
        assert np.allclose(e1.values, f1.values, atol=1e-8)
        assert np.allclose(e2.values, f2.values, atol=1e-8)

    def test_resample_keeps_all_fields(self):
        grid = SlowGrid(1, 2.0 * math.pi, 64)
        state = gaussian_bump_state(grid)
        fine = resample_state(state, 128)
        assert fine.grid.n_points == 128
        assert fine.psi0.grid == fine.zeta0.grid
        assert np.max(np.abs(fine.zeta0.values)) == pytest.approx(np.max(np.abs(state.zeta0.values)), rel=1e-3)


class TestRateBookkeeping:
    def test_fine_points(self):
        assert fine_points(8.0 * math.pi, 0.1, 32, 256) == 1280
        assert fine_points(8.0 * math.pi, 0.1, 4, 256) == 256
        assert fine_points(2.0 * math.pi, 1.0 / 3.0, 5, 8) == 16

    def test_hstar(self):
        record = ConsistencyRecord(0.01, 0.2, 0.1, None, 256, 32, 40)
        assert record.hstar == pytest.approx(0.2 + 0.1 ** (-0.375) * 0.1)
        assert record.to_row()["remainder_l2"] == ""

    def test_rough_bottom_rules(self):
        result = RateStudyResult([], {"e1": E1_SLOPE_MIN - 0.1, "e2": 1.0, "remainder": 0.4})
        failures = result.failures()
        assert len(failures) == 1 and failures[0].startswith("e1 slope")
        assert not result.passed

    def test_flat_control_rules(self):
        ok = RateStudyResult([], {"e1": 1.0, "e2": 1.0 + 0.5 * FLAT_SLOPE_TOL}, flat_control=True)
        assert ok.passed
        bad = RateStudyResult([], {"e1": 0.5, "e2": 1.0}, flat_control=True)
        assert bad.failures() == [f"e1 slope 0.500 not within 1.0 +/- {FLAT_SLOPE_TOL}"]

    def test_remainder_must_decrease_with_mu(self):
        records = [
            ConsistencyRecord(0.01, 0.1, 0.1, 0.30, 256, 32, 40),
            ConsistencyRecord(0.04, 0.2, 0.2, 0.50, 256, 32, 20),
            ConsistencyRecord(0.005, 0.05, 0.05, 0.35, 256, 32, 57),
        ]
        slopes = {"e1": 1.0, "e2": 1.0, "remainder": 0.5}
        result = RateStudyResult(records, slopes)
        assert result.remainder_increases() == [0.005]
        assert result.failures() == ["remainder not decreasing at mu = 0.005"]

        records[2] = ConsistencyRecord(0.005, 0.05, 0.05, 0.20, 256, 32, 57)
        assert RateStudyResult(records, slopes).passed

    def test_flat_control_has_no_remainder_rule(self):
        records = [ConsistencyRecord(mu, 0.1, 0.1, None, 256, 32, 20) for mu in (0.04, 0.02)]
        assert RateStudyResult(records, {"e1": 1.0, "e2": 1.0}, flat_control=True).passed

    def test_sweep_threads_get_fft_workers(self, monkeypatch):
        monkeypatch.setattr(residual, "consistency_point", lambda *args: sp_fft.get_workers())
        with ThreadPoolExecutor(max_workers=1) as pool:
            assert pool.submit(residual._point_with_workers, 3, None).result() == 3
            assert pool.submit(residual._point_with_workers, 0, None).result() == 1

    def test_needs_two_mu_values(self):
        with pytest.raises(ValueError, match="at least two"):
            rate_study(RunConfig(), mu_list=[0.01])


@pytest.mark.slow
class TestRateStudy:
    def test_two_point_sweep(self):
        config = RunConfig(
            mu_list=[0.04, 0.02],
            nx=128,
            oracle_nz=16,
            oracle_cells_per_wavelength=16,
            threads=2,
        )
        result = rate_study(config)
        assert [r.fast_periods for r in result.records] == [20, 28]
        assert result.records[1].mu == pytest.approx((1.0 / 7.0) ** 2)
        assert result.records[0].nx == 320
        assert set(result.slopes) == {"e1", "e2", "hstar", "remainder"}
        for record in result.records:
            assert 0.0 < record.e1_l2 < math.inf
            assert 0.0 < record.e2_h12 < math.inf
            assert record.remainder_l2 > 0.0
        assert result.requested_mu == [0.04, 0.02]

    def test_default_sweep_rough_bottom(self):
        result = rate_study(get_default_config())
        assert [r.mu for r in result.records] == pytest.approx(MU_SWEEP, rel=0.05)
        assert result.slopes["e1"] >= E1_SLOPE_MIN
        assert result.slopes["e2"] >= E2_SLOPE_MIN
        assert result.slopes["remainder"] >= REMAINDER_SLOPE_MIN
        assert result.remainder_increases() == []
        assert result.passed, result.failures()

    def test_default_sweep_flat_control(self):
        result = rate_study(get_default_config(), flat_control=True)
        for name in ("e1", "e2"):
            assert abs(result.slopes[name] - FLAT_SLOPE_TARGET) <= FLAT_SLOPE_TOL
        assert "remainder" not in result.slopes
        assert result.passed, result.failures()
