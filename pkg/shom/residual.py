"""
shom - Residual

Consistency of the two-scale Ansatz with the full water-wave system:

    E1 = d_t zeta_a - (1/mu) G psi_a
    E2 = d_t psi_a + zeta_a + |grad psi_a|^2 / 2
         - mu ((1/mu) G psi_a + grad zeta_a . grad psi_a)^2 / (2 (1 + mu |grad zeta_a|^2))

with G from the strip oracle, and mu-sweeps fitting log-log rates.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sp_fft

from shom.bathymetry import BottomProfile, flat_bottom
from shom.config import (
    E1_SLOPE_MIN,
    E2_SLOPE_MIN,
    FLAT_SLOPE_TARGET,
    FLAT_SLOPE_TOL,
    REMAINDER_SLOPE_MIN,
)
from shom.corrector import stationary_field
from shom.effective_dn import (
    AnsatzRealization,
    ansatz_time_derivative,
    build_ansatz,
    dn_remainder,
    g_eff,
)
from shom.elliptic_oracle import StripProblem, build_sigma, dn_apply
from shom.resonance import NonresonanceGuard
from shom.run_config import RunConfig
from shom.shallow_water import SurfaceState, simulate, step
from shom.spectral import (
    SlowField,
    dealiased_product,
    fast_periods,
    gradient,
    resample,
    snap_gamma,
    sobolev_norm,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConsistencyRecord:
    """Residual norms at one mu."""

    mu: float
    e1_l2: float
    e2_h12: float
    remainder_l2: float | None
    nx: int
    nz: int
    fast_periods: int

    @property
    def gamma(self) -> float:
        return math.sqrt(self.mu)

    @property
    def hstar(self) -> float:
        """|E1|_{L^2} + gamma^{-3/8} |E2|_{H^{1/2}}."""
        return self.e1_l2 + self.gamma ** (-0.375) * self.e2_h12

    def to_row(self) -> dict:
        return {
            "mu": self.mu,
            "e1_l2": self.e1_l2,
            "e2_h12": self.e2_h12,
            "hstar": self.hstar,
            "remainder_l2": "" if self.remainder_l2 is None else self.remainder_l2,
            "nx": self.nx,
            "nz": self.nz,
            "fast_periods": self.fast_periods,
        }


@dataclass
class RateStudyResult:
    records: list[ConsistencyRecord]
    slopes: dict[str, float]
    flat_control: bool = False
    requested_mu: list[float] = field(default_factory=list)

    def failures(self) -> list[str]:
        """Acceptance rules missed by the fitted slopes."""
        failed = []
        if self.flat_control:
            for name in ("e1", "e2"):
                if abs(self.slopes[name] - FLAT_SLOPE_TARGET) > FLAT_SLOPE_TOL:
                    failed.append(
                        f"{name} slope {self.slopes[name]:.3f} not within {FLAT_SLOPE_TARGET} +/- {FLAT_SLOPE_TOL}"
                    )
            return failed
        if self.slopes["e1"] < E1_SLOPE_MIN:
            failed.append(f"e1 slope {self.slopes['e1']:.3f} < {E1_SLOPE_MIN}")
        if self.slopes["e2"] < E2_SLOPE_MIN:
            failed.append(f"e2 slope {self.slopes['e2']:.3f} < {E2_SLOPE_MIN}")
        if "remainder" in self.slopes and self.slopes["remainder"] < REMAINDER_SLOPE_MIN:
            failed.append(f"remainder slope {self.slopes['remainder']:.3f} < {REMAINDER_SLOPE_MIN}")
        rising = self.remainder_increases()
        if rising:
            failed.append("remainder not decreasing at mu = " + ", ".join(f"{mu:.6g}" for mu in rising))
        return failed

    def remainder_increases(self) -> list[float]:
        """Values of mu where the remainder fails to drop below its value at the next larger mu."""
        ordered = sorted(
            (r for r in self.records if r.remainder_l2 is not None), key=lambda r: r.mu, reverse=True
        )
        return [b.mu for a, b in zip(ordered, ordered[1:]) if not b.remainder_l2 < a.remainder_l2]

    @property
    def passed(self) -> bool:
        return not self.failures()


# =============================================================================
# Residuals
# =============================================================================

def residual_e1(
    ans: AnsatzRealization,
    sp: StripProblem,
    dzeta_dt: SlowField,
    dn: SlowField | None = None,
) -> SlowField:
    """d_t zeta_a - (1/mu) G[zeta_a, gamma b_gamma] psi_a."""
    if dn is None:
        dn = dn_apply(sp, ans.psi_a)
    return dzeta_dt - dn * (1.0 / ans.mu)


def residual_e2(
    ans: AnsatzRealization,
    sp: StripProblem,
    dpsi_dt: SlowField,
    dn: SlowField | None = None,
) -> SlowField:
    """Defect of the Bernoulli equation evaluated on the Ansatz."""
    if dn is None:
        dn = dn_apply(sp, ans.psi_a)
    mu = ans.mu
    grad_zeta = gradient(ans.zeta_a)
    grad_psi = gradient(ans.psi_a)

    kinetic = sum(dealiased_product(g, g).values for g in grad_psi)
    slope2 = sum(dealiased_product(g, g).values for g in grad_zeta)
    cross = sum(dealiased_product(gz, gp).values for gz, gp in zip(grad_zeta, grad_psi))
    w = dn.values / mu + cross
    vertical = mu * w ** 2 / (2.0 * (1.0 + mu * slope2))
    values = dpsi_dt.values + ans.zeta_a.values + 0.5 * kinetic - vertical
    return SlowField(ans.grid, values)


# =============================================================================
# Rate study
# =============================================================================

def _fit_slope(mus: list[float], values: list[float]) -> float:
    x = np.log(np.asarray(mus))
    y = np.log(np.maximum(np.asarray(values), 1e-300))
    return float(np.polyfit(x, y, 1)[0])


def resample_state(state: SurfaceState, n_points: int) -> SurfaceState:
    psi = None if state.psi0 is None else resample(state.psi0, n_points)
    return SurfaceState(
        resample(state.zeta0, n_points),
        tuple(resample(v, n_points) for v in state.velocity),
        psi,
        state.time,
    )


def fine_points(box_length: float, gamma: float, cells_per_wavelength: int, base_points: int) -> int:
    """Even slow-grid size with at least cells_per_wavelength points per fast period."""
    n = round(fast_periods(box_length, gamma))
    points = max(base_points, cells_per_wavelength * n)
    return points + points % 2


def surface_snapshots(config: RunConfig) -> tuple[SurfaceState, SurfaceState, SurfaceState]:
    """Shallow-water states at t_eval - dt_fd, t_eval and t_eval + dt_fd on the base grid."""
    state0 = config.initial_state()
    t_start = config.t_eval - config.fd_dt
    before = simulate(state0, t_start, min(config.dt, t_start), config.alpha0, config.cfl, config.viscosity,
                      snapshot_every=10 ** 9).final
    middle = step(before, config.fd_dt, config.alpha0, config.cfl, config.viscosity)
    after = step(middle, config.fd_dt, config.alpha0, config.cfl, config.viscosity)
    return before, middle, after


def consistency_point(
    config: RunConfig,
    snapshots: tuple[SurfaceState, SurfaceState, SurfaceState],
    bottom: BottomProfile,
    guard: NonresonanceGuard,
    mu: float,
    flat_control: bool = False,
) -> ConsistencyRecord:
    """Residual norms at one (already commensurate) mu."""
    gamma = math.sqrt(mu)
    L = config.box_length
    nx = fine_points(L, gamma, config.oracle_cells_per_wavelength, config.nx)
    states = [resample_state(s, nx) for s in snapshots]

    ansatz = []
    for s in states:
        corrector = None if flat_control else stationary_field(s, bottom, guard)
        ansatz.append(build_ansatz(s, corrector, mu))
    dzeta_dt, dpsi_dt = ansatz_time_derivative(ansatz[0], ansatz[2], config.fd_dt)
    current = ansatz[1]

    sp = build_sigma(current.zeta_a, bottom, mu, config.oracle_nz, config.alpha0, config.oracle_solver)
    dn = dn_apply(sp, current.psi_a)
    e1 = residual_e1(current, sp, dzeta_dt, dn)
    e2 = residual_e2(current, sp, dpsi_dt, dn)

    remainder = None
    if not flat_control:
        remainder = dn_remainder(sp, current, g_eff(states[1], current.corrector, bottom, mu))

    record = ConsistencyRecord(
        mu=mu,
        e1_l2=sobolev_norm(e1, 0.0),
        e2_h12=sobolev_norm(e2, 0.5),
        remainder_l2=remainder,
        nx=nx,
        nz=config.oracle_nz,
        fast_periods=round(fast_periods(L, gamma)),
    )
    logger.info(
        f"[RESIDUAL] mu={mu:.6g} nx={nx}: |E1|={record.e1_l2:.4e} |E2|_H1/2={record.e2_h12:.4e}"
        + ("" if remainder is None else f" remainder={remainder:.4e}")
    )
    return record


def _point_with_workers(fft_workers: int, *args) -> ConsistencyRecord:
    # set_workers is thread-local; pool threads start from the scipy default
    with sp_fft.set_workers(max(1, fft_workers)):
        return consistency_point(*args)


def rate_study(
    config: RunConfig,
    mu_list: list[float] | None = None,
    flat_control: bool = False,
    threads: int | None = None,
) -> RateStudyResult:
    """
    Residual norms over a mu-sweep and their fitted log-log slopes.

    Each requested mu is snapped to the nearest mu' = gamma'^2 with an integer
    number of fast periods in the box; the snapped values are the ones recorded.

    Raises:
        ResonanceError: the stationary corrector is undefined somewhere.
    """
    requested = list(config.mu_list if mu_list is None else mu_list)
    if len(requested) < 2:
        raise ValueError("a rate study needs at least two mu values")
    L = config.box_length
    snapped = []
    for mu in requested:
        gamma = snap_gamma(L, math.sqrt(mu))
        if not math.isclose(gamma ** 2, mu, rel_tol=1e-9):
            logger.warning(f"[RESIDUAL] mu={mu:.6g} snapped to {gamma ** 2:.6g} ({round(fast_periods(L, gamma))} fast periods)")
        snapped.append(gamma ** 2)

    bottom = flat_bottom(config.dim) if flat_control else config.bottom_profile()
    guard = config.guard()
    snapshots = surface_snapshots(config)
    workers = threads or config.threads

    logger.info(f"[RESIDUAL] rate study over {len(snapped)} mu values ({'flat control' if flat_control else 'rough bottom'})")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [
            pool.submit(_point_with_workers, workers, config, snapshots, bottom, guard, mu, flat_control)
            for mu in snapped
        ]
        records = [f.result() for f in futures]

    mus = [r.mu for r in records]
    slopes = {
        "e1": _fit_slope(mus, [r.e1_l2 for r in records]),
        "e2": _fit_slope(mus, [r.e2_h12 for r in records]),
        "hstar": _fit_slope(mus, [r.hstar for r in records]),
    }
    if not flat_control:
        slopes["remainder"] = _fit_slope(mus, [r.remainder_l2 for r in records])
    logger.info(f"[RESIDUAL] slopes: " + ", ".join(f"{k}={v:.3f}" for k, v in slopes.items()))
    return RateStudyResult(records, slopes, flat_control, requested)
