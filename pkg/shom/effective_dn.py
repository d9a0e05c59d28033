"""
shom - Effective DN

The two-scale Ansatz (zeta_a, psi_a) realized at a given mu, and the
effective Dirichlet-Neumann action

    (1/mu) G_eff psi = -div(h0 grad psi0) - grad_Y zeta1 . grad psi0
                       + |D_Y| tanh(h0|D_Y|) psi1 + grad psi0 . grad_Y sech(h0|D_Y|) b

with every fast part realized at Y = X/gamma before slow x fast products.
"""

import logging
from dataclasses import dataclass

import numpy as np

from shom.bathymetry import BottomProfile
from shom.corrector import CorrectorState
from shom.elliptic_oracle import StripProblem, dn_apply
from shom.errors import CommensurabilityError
from shom.shallow_water import SurfaceState
from shom.spectral import (
    MultiscaleField,
    SlowField,
    dealiased_product,
    divergence,
    dn_symbol,
    gradient,
    is_commensurate,
    realize,
    sech,
    snap_gamma,
    sobolev_norm,
    wavenumber_norm,
)

logger = logging.getLogger(__name__)

# Realized fast oscillations need this many slow grid points per period 2*pi*gamma
MIN_POINTS_PER_FAST_PERIOD = 8


@dataclass(frozen=True, eq=False)
class AnsatzRealization:
    """zeta_a = zeta0 + gamma zeta1(X, X/gamma), psi_a = psi0 + gamma^2 psi1(X, X/gamma)."""

    mu: float
    zeta_a: SlowField
    psi_a: SlowField
    surface: SurfaceState
    corrector: CorrectorState | None

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.mu))

    @property
    def grid(self):
        return self.zeta_a.grid


def check_realization_grid(grid, mu: float) -> None:
    """
    Raises:
        CommensurabilityError: 2*pi*gamma does not divide the box length.
        ValueError: fewer than MIN_POINTS_PER_FAST_PERIOD points per fast period.
    """
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    gamma = float(np.sqrt(mu))
    if not is_commensurate(grid.box_length, gamma):
        raise CommensurabilityError(grid.box_length, gamma, snap_gamma(grid.box_length, gamma))
    per_period = 2.0 * np.pi * gamma / grid.spacing
    if per_period < MIN_POINTS_PER_FAST_PERIOD - 1e-9:
        raise ValueError(
            f"slow grid has {per_period:.2f} points per fast period, need >= {MIN_POINTS_PER_FAST_PERIOD}"
        )


def _require_potential(surface: SurfaceState) -> SlowField:
    if surface.psi0 is None:
        raise ValueError("surface state carries no potential psi0")
    return surface.psi0


def build_ansatz(surface: SurfaceState, corrector: CorrectorState | None, mu: float) -> AnsatzRealization:
    """Realize the Ansatz on the surface grid (a zero corrector may be passed as None)."""
    check_realization_grid(surface.grid, mu)
    psi0 = _require_potential(surface)
    gamma = float(np.sqrt(mu))
    if corrector is None:
        return AnsatzRealization(mu, surface.zeta0, psi0, surface, None)
    if corrector.grid != surface.grid:
        raise ValueError("corrector and surface live on different grids")
    zeta_a = surface.zeta0 + realize(corrector.zeta1, gamma) * gamma
    psi_a = psi0 + realize(corrector.psi1, gamma) * gamma ** 2
    return AnsatzRealization(mu, zeta_a, psi_a, surface, corrector)


def centered_time_derivative(before: SlowField, after: SlowField, dt: float) -> SlowField:
    """(after - before) / (2 dt)."""
    if not dt > 0:
        raise ValueError(f"finite-difference step must be positive, got {dt}")
    return (after - before) * (0.5 / dt)


def ansatz_time_derivative(
    before: AnsatzRealization,
    after: AnsatzRealization,
    dt: float,
) -> tuple[SlowField, SlowField]:
    """Centered differences of (zeta_a, psi_a) between snapshots at t - dt and t + dt."""
    if before.mu != after.mu:
        raise ValueError("snapshots were realized at different mu")
    return (
        centered_time_derivative(before.zeta_a, after.zeta_a, dt),
        centered_time_derivative(before.psi_a, after.psi_a, dt),
    )


def _fast_field(corrector: CorrectorState, coeffs: np.ndarray) -> MultiscaleField:
    return MultiscaleField(corrector.grid, corrector.cutoff, coeffs, True, True)


def g_eff(
    surface: SurfaceState,
    corrector: CorrectorState | None,
    b: BottomProfile,
    mu: float,
) -> SlowField:
    """
    Realized (1/mu) G_eff psi on the slow grid.

    Raises:
        ValueError: missing potential, incompatible grids or cutoffs.
        CommensurabilityError: gamma incompatible with the box.
    """
    grid = surface.grid
    check_realization_grid(grid, mu)
    psi0 = _require_potential(surface)
    gamma = float(np.sqrt(mu))
    dim = grid.dim
    grad_psi0 = gradient(psi0)

    result = -divergence([dealiased_product(surface.depth, g) for g in grad_psi0])
    if corrector is None:
        corrector = CorrectorState.zeros(grid, b.cutoff)
    if corrector.grid != grid:
        raise ValueError("corrector and surface live on different grids")
    cutoff = corrector.cutoff
    if any(max(abs(kj) for kj in k) > cutoff for k in b.modes):
        raise ValueError(f"bottom modes exceed the corrector cutoff {cutoff}")

    pad = (1,) * dim
    k = corrector.zeta1.wavevectors
    knorm = wavenumber_norm(k)
    h0 = surface.depth.values.reshape(grid.shape + pad)
    gpsi = np.stack([g.values.reshape(grid.shape + pad) for g in grad_psi0])
    b_coeffs = b.spectrum.resized(cutoff).coeffs

    # -grad_Y zeta1 . grad psi0
    for j in range(dim):
        dzeta = realize(_fast_field(corrector, 1j * k[j] * corrector.zeta1.coeffs), gamma)
        result = result - dealiased_product(dzeta, grad_psi0[j])

    # |D_Y| tanh(h0|D_Y|) psi1 + grad psi0 . grad_Y sech(h0|D_Y|) b
    fast = dn_symbol(h0, knorm) * corrector.psi1.coeffs
    fast = fast + 1j * np.sum(k * gpsi, axis=0) * sech(h0 * knorm) * b_coeffs
    result = result + realize(_fast_field(corrector, fast), gamma)

    logger.debug(f"[EFFECTIVE] g_eff at mu={mu:.6g}: max|g|={result.max_abs():.3e}")
    return result


def dn_remainder(sp: StripProblem, ansatz: AnsatzRealization, geff: SlowField) -> float:
    """|(1/mu) G_oracle psi_a - g_eff|_{L^2}."""
    oracle = dn_apply(sp, ansatz.psi_a) * (1.0 / ansatz.mu)
    return sobolev_norm(oracle - geff, 0.0)
