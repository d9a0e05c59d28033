"""
shom - Corrector

The fast-time corrector system at frozen slow coefficients (h0, V0),

    d_tau zeta1 + V0 . grad_Y zeta1 - |D_Y| tanh(h0|D_Y|) psi1 = f
    d_tau psi1  + V0 . grad_Y psi1  + zeta1                    = 0
    f = V0 . grad_Y sech(h0|D_Y|) b,

solved exactly mode by mode in the characteristic variables
Z = u + iv, W = u - iv with u = omega^{-1/2} zeta_k, v = omega^{1/2} psi_k.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from shom.bathymetry import BottomProfile
from shom.config import BOTTOM_MODE_TOL, NEAR_RESONANCE_SERIES
from shom.errors import ResonanceError, ResonanceFlag
from shom.resonance import NonresonanceGuard, certify, margin
from shom.shallow_water import SurfaceState
from shom.spectral import (
    MultiscaleField,
    TorusSpectrum,
    dn_symbol,
    sech,
    wavenumber_norm,
)

logger = logging.getLogger(__name__)


# =============================================================================
# Single mode
# =============================================================================

def _phase_integral(rate: np.ndarray | complex, tau: float) -> np.ndarray:
    """int_0^tau exp(rate (tau - s)) ds, with a series branch for |rate tau| small."""
    rate = np.asarray(rate, dtype=complex)
    x = rate * tau
    small = np.abs(x) < NEAR_RESONANCE_SERIES
    safe = np.where(small, 1.0, rate)
    closed = (np.exp(x) - 1.0) / safe
    series = tau * (1.0 + x / 2.0 + x ** 2 / 6.0)
    return np.where(small, series, closed)


def _to_characteristic(zeta, psi, omega):
    u = zeta / np.sqrt(omega)
    v = psi * np.sqrt(omega)
    return u + 1j * v, u - 1j * v


def _from_characteristic(Z, W, omega):
    zeta = np.sqrt(omega) * (Z + W) / 2.0
    psi = (Z - W) / (2.0j * np.sqrt(omega))
    return zeta, psi


def _propagate_characteristic(Z, W, omega, kv, fhat, tau):
    theta = omega + kv
    phi = omega - kv
    F = fhat / np.sqrt(omega)
    Z_tau = np.exp(-1j * theta * tau) * Z + _phase_integral(-1j * theta, tau) * F
    W_tau = np.exp(1j * phi * tau) * W + _phase_integral(1j * phi, tau) * F
    return Z_tau, W_tau


@dataclass(frozen=True)
class ModeState:
    """Characteristic variables of one fast mode k at frozen (h0, V0)."""

    k: tuple[int, ...]
    Z: complex
    W: complex
    omega: float
    advection: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"mode frequency must be positive, got omega={self.omega} for k={self.k}")

    @classmethod
    def from_amplitudes(
        cls,
        k: int | Sequence[int],
        zeta: complex,
        psi: complex,
        h0: float,
        V0: Sequence[float] | float,
    ) -> "ModeState":
        k = tuple(int(kj) for kj in np.atleast_1d(k))
        kvec = np.asarray(k, dtype=float)
        omega = float(np.sqrt(dn_symbol(h0, np.linalg.norm(kvec))))
        advection = float(kvec @ np.atleast_1d(np.asarray(V0, dtype=float)))
        Z, W = _to_characteristic(complex(zeta), complex(psi), omega)
        return cls(k, complex(Z), complex(W), omega, advection)

    def amplitudes(self) -> tuple[complex, complex]:
        """(zeta_k, psi_k)."""
        zeta, psi = _from_characteristic(self.Z, self.W, self.omega)
        return complex(zeta), complex(psi)


def propagate_mode(m: ModeState, tau: float, fhat: complex = 0.0) -> ModeState:
    """
    Exact propagator for a constant-in-tau forcing:

        Z(tau) = exp(-i tau theta) Z(0) + (exp(-i tau theta) - 1)/(-i theta) omega^{-1/2} f
        W(tau) = exp(+i tau phi) W(0)   + (exp(+i tau phi) - 1)/(+i phi)    omega^{-1/2} f

    with theta = omega + k.V0 and phi = omega - k.V0.
    """
    Z, W = _propagate_characteristic(m.Z, m.W, m.omega, m.advection, complex(fhat), tau)
    return ModeState(m.k, complex(Z), complex(W), m.omega, m.advection)


# =============================================================================
# Forcing and energy
# =============================================================================

def _point_velocity(V0, dim: int) -> np.ndarray:
    """A single d-vector shaped (dim, 1, ..., 1) to broadcast against torus wavevectors."""
    velocity = np.atleast_1d(np.asarray(V0, dtype=float))
    if velocity.size != dim:
        raise ValueError(f"velocity needs {dim} components, got {velocity.size}")
    return velocity.reshape((dim,) + (1,) * dim)


def _forcing_coeffs(h0, velocity, k, b_coeffs):
    """i (k.V0) sech(h0|k|) b_k; h0 and velocity broadcast against the mode axes."""
    kv = np.sum(k * velocity, axis=0)
    return 1j * kv * sech(h0 * wavenumber_norm(k)) * b_coeffs


def forcing(h0: float, V0: Sequence[float], b: BottomProfile) -> TorusSpectrum:
    """f = V0 . grad_Y sech(h0|D_Y|) b, i.e. f_k = i (k.V0) sech(h0|k|) b_k."""
    if not h0 > 0:
        raise ValueError(f"depth h0 must be positive, got {h0}")
    spec = b.spectrum
    velocity = _point_velocity(V0, spec.dim)
    return spec.with_coeffs(_forcing_coeffs(h0, velocity, spec.wavevectors, spec.coeffs))


def _energy_density(zeta, psi, k, h0, r):
    knorm = wavenumber_norm(k)
    weight = (1.0 + knorm ** 2) ** r
    return weight * (np.abs(zeta) ** 2 + dn_symbol(h0, knorm) * np.abs(psi) ** 2)


def energy_norm(zeta1: TorusSpectrum, psi1: TorusSpectrum, r: float, h0: float) -> float:
    """
    E^r norm: ( sum_{k != 0} (1+|k|^2)^r (|zeta_k|^2 + |k| tanh(h0|k|) |psi_k|^2) )^{1/2}.

    Raises:
        ValueError: nonzero-mean inputs or mismatched cutoffs.
    """
    if not (zeta1.has_zero_mean and psi1.has_zero_mean):
        raise ValueError("energy norm requires zero-mean corrector fields")
    zeta1._check(psi1)
    density = _energy_density(zeta1.coeffs, psi1.coeffs, zeta1.wavevectors, h0, r)
    return float(np.sqrt(np.sum(density)))


def energy_bound(
    zeta1: TorusSpectrum,
    psi1: TorusSpectrum,
    f: TorusSpectrum,
    tau: float,
    r: float,
    h0: float,
) -> float:
    """
    Upper bound on the squared E^r norm after time tau under constant forcing f:
    ( |(zeta1, psi1)(0)|_{E^r} + |tau| |(f, 0)|_{E^r} )^2.
    """
    initial = energy_norm(zeta1, psi1, r, h0)
    drive = energy_norm(f, TorusSpectrum.zeros(f.dim, f.cutoff), r, h0)
    return (initial + abs(tau) * drive) ** 2


def system_residual(
    zeta1: TorusSpectrum,
    psi1: TorusSpectrum,
    h0: float,
    V0: Sequence[float],
    b: BottomProfile,
    r: float = 0.0,
) -> float:
    """E^r norm of the tau-independent part of the corrector system applied to (zeta1, psi1)."""
    velocity = _point_velocity(V0, zeta1.dim)
    k = zeta1.wavevectors
    kv = np.sum(k * velocity, axis=0)
    omega2 = dn_symbol(h0, wavenumber_norm(k))
    f = forcing(h0, velocity, b.with_cutoff(zeta1.cutoff))
    r1 = 1j * kv * zeta1.coeffs - omega2 * psi1.coeffs - f.coeffs
    r2 = 1j * kv * psi1.coeffs + zeta1.coeffs
    density = _energy_density(r1, r2, k, h0, r)
    return float(np.sqrt(np.sum(density)))


# =============================================================================
# Corrector fields
# =============================================================================

@dataclass(frozen=True, eq=False)
class CorrectorState:
    """The corrector pair (zeta1, psi1), both with zero fast mean."""

    zeta1: MultiscaleField
    psi1: MultiscaleField

    def __post_init__(self):
        for name, f in (("zeta1", self.zeta1), ("psi1", self.psi1)):
            if not f.zero_mean:
                raise ValueError(f"{name} must be flagged zero-fast-mean")
        if self.zeta1.grid != self.psi1.grid or self.zeta1.cutoff != self.psi1.cutoff:
            raise ValueError("zeta1 and psi1 must share grid and cutoff")

    @property
    def grid(self):
        return self.zeta1.grid

    @property
    def cutoff(self) -> int:
        return self.zeta1.cutoff

    @classmethod
    def zeros(cls, grid, cutoff: int) -> "CorrectorState":
        return cls(MultiscaleField.zeros(grid, cutoff), MultiscaleField.zeros(grid, cutoff))

    def at(self, index) -> tuple[TorusSpectrum, TorusSpectrum]:
        return self.zeta1.at(index), self.psi1.at(index)


def _surface_arrays(surface: SurfaceState, dim: int):
    """h0 and V0 reshaped to broadcast against (*slow, *fast) coefficient arrays."""
    pad = (1,) * dim
    h0 = surface.depth.values.reshape(surface.grid.shape + pad)
    velocity = np.stack([v.values.reshape(surface.grid.shape + pad) for v in surface.velocity])
    return h0, velocity


def evolve(
    c0: CorrectorState,
    surface: SurfaceState,
    b: BottomProfile,
    tau_span: float | tuple[float, float],
    n_steps: int = 1,
) -> CorrectorState:
    """
    Propagate every (X, k) over the fast span with (h0, V0) frozen at `surface`.

    The propagator is exact, so n_steps only splits the span into equal
    sub-intervals.
    """
    if np.ndim(tau_span) == 0:
        tau_span = (0.0, float(tau_span))
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    dim = c0.grid.dim
    cutoff = c0.cutoff
    k = c0.zeta1.wavevectors
    h0, velocity = _surface_arrays(surface, dim)
    b_coeffs = b.spectrum.resized(cutoff).coeffs

    knorm = wavenumber_norm(k)
    active = np.broadcast_to(knorm > 0, c0.zeta1.coeffs.shape)
    omega = np.sqrt(dn_symbol(h0, knorm))
    omega_safe = np.where(active, omega, 1.0)
    kv = np.sum(k * velocity, axis=0)
    fhat = _forcing_coeffs(h0, velocity, k, b_coeffs)

    Z, W = _to_characteristic(c0.zeta1.coeffs, c0.psi1.coeffs, omega_safe)
    dtau = (tau_span[1] - tau_span[0]) / n_steps
    for _ in range(n_steps):
        Z, W = _propagate_characteristic(Z, W, omega_safe, kv, fhat, dtau)
    zeta, psi = _from_characteristic(Z, W, omega_safe)
    zeta = np.where(active, zeta, 0.0)
    psi = np.where(active, psi, 0.0)

    logger.debug(f"[CORRECTOR] evolved {zeta.size} modes over tau span {tau_span}")
    return CorrectorState(c0.zeta1.with_coeffs(zeta), c0.psi1.with_coeffs(psi))


def _stationary_coeffs(h0, velocity, k, b_coeffs):
    knorm = wavenumber_norm(k)
    kv = np.sum(k * velocity, axis=0)
    denom = dn_symbol(h0, knorm) - kv ** 2
    present = (knorm > 0) & (np.abs(b_coeffs) > BOTTOM_MODE_TOL)
    safe = np.where(present, denom, 1.0)
    s = sech(h0 * knorm) * b_coeffs
    zeta = np.where(present, -(kv ** 2) * s / safe, 0.0)
    psi = np.where(present, -1j * kv * s / safe, 0.0)
    return zeta, psi


def stationary(
    h0: float,
    V0: Sequence[float],
    b: BottomProfile,
    guard: NonresonanceGuard,
) -> tuple[TorusSpectrum, TorusSpectrum]:
    """
    Locally stationary corrector at one slow point:

        zeta1_k = -(k.V0)^2 sech(h0|k|) b_k / (omega_k^2 - (k.V0)^2)
        psi1_k  = -i (k.V0) sech(h0|k|) b_k / (omega_k^2 - (k.V0)^2)

    Raises:
        ResonanceError: some bottom mode has |omega_k^2 - (k.V0)^2| <= 1/B_k.
    """
    velocity = _point_velocity(V0, b.dim)
    flags = []
    for k in b.modes:
        m = margin(h0, velocity.reshape(-1), k)
        threshold = float(guard.threshold(np.linalg.norm(k)))
        if abs(m) <= threshold:
            flags.append(ResonanceFlag((), (), k, float(m), threshold))
    if flags:
        raise ResonanceError(flags)

    spec = b.spectrum
    zeta, psi = _stationary_coeffs(h0, velocity, spec.wavevectors, spec.coeffs)
    return spec.with_coeffs(zeta), spec.with_coeffs(psi)


def stationary_field(
    surface: SurfaceState,
    b: BottomProfile,
    guard: NonresonanceGuard,
    cutoff: int | None = None,
) -> CorrectorState:
    """
    Stationary corrector at every slow grid point.

    Raises:
        ResonanceError: carrying all flags, ordered from the first offending slow point.
    """
    report = certify(surface, b, guard)
    if not report.certified:
        first = report.flags[0]
        logger.error(f"[CORRECTOR] guard fails first at X={first.x}, k={first.k}")
        raise ResonanceError(report.flags)

    cutoff = b.cutoff if cutoff is None else cutoff
    spec = b.spectrum.resized(cutoff)
    dim = surface.dim
    h0, velocity = _surface_arrays(surface, dim)
    k = spec.wavevectors.reshape((dim,) + (1,) * dim + spec.wavevectors.shape[1:])
    zeta, psi = _stationary_coeffs(h0, velocity, k, spec.coeffs)
    grid = surface.grid
    zeta_field = MultiscaleField(grid, cutoff, zeta, True, True)
    psi_field = MultiscaleField(grid, cutoff, psi, True, True)
    logger.info(
        f"[CORRECTOR] stationary field on {grid.size} point(s), max|zeta1_k|={zeta_field.max_abs_coeff():.3e}"
    )
    return CorrectorState(zeta_field, psi_field)


# =============================================================================
# Modal history
# =============================================================================

@dataclass
class ModeHistory:
    """Per-mode amplitudes and the E^r energy sampled along tau at one slow point."""

    taus: np.ndarray
    modes: list[tuple[int, ...]]
    zeta_abs: np.ndarray
    psi_abs: np.ndarray
    z_abs: np.ndarray
    w_abs: np.ndarray
    energy: np.ndarray
    r: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_rows(self) -> list[dict]:
        rows = []
        for i, tau in enumerate(self.taus):
            for j, k in enumerate(self.modes):
                rows.append({
                    "tau": float(tau),
                    "k": " ".join(str(kj) for kj in k),
                    "abs_zeta": float(self.zeta_abs[i, j]),
                    "abs_psi": float(self.psi_abs[i, j]),
                    "abs_Z": float(self.z_abs[i, j]),
                    "abs_W": float(self.w_abs[i, j]),
                    "energy": float(self.energy[i]),
                })
        return rows


def mode_history(
    zeta1: TorusSpectrum,
    psi1: TorusSpectrum,
    h0: float,
    V0: Sequence[float],
    b: BottomProfile,
    taus: np.ndarray,
    r: float = 0.0,
) -> ModeHistory:
    """Sample the exact evolution of the forced modes (those of b and of the initial data)."""
    zeta1._check(psi1)
    velocity = np.atleast_1d(np.asarray(V0, dtype=float)).reshape(-1)
    bspec = b.spectrum.resized(zeta1.cutoff)
    f = forcing(h0, velocity, b.with_cutoff(zeta1.cutoff))
    modes = sorted(
        {k for k in bspec.active_modes() + zeta1.active_modes() + psi1.active_modes() if any(k)}
    )
    states = [
        ModeState.from_amplitudes(k, zeta1.coeff(k), psi1.coeff(k), h0, velocity) for k in modes
    ]
    fhat = [f.coeff(k) for k in modes]

    taus = np.asarray(taus, dtype=float)
    shape = (taus.size, len(modes))
    zeta_abs, psi_abs = np.zeros(shape), np.zeros(shape)
    z_abs, w_abs = np.zeros(shape), np.zeros(shape)
    energy = np.zeros(taus.size)
    for i, tau in enumerate(taus):
        for j, (m, fk) in enumerate(zip(states, fhat)):
            mt = propagate_mode(m, tau, fk)
            zk, pk = mt.amplitudes()
            zeta_abs[i, j], psi_abs[i, j] = abs(zk), abs(pk)
            z_abs[i, j], w_abs[i, j] = abs(mt.Z), abs(mt.W)
            knorm = np.linalg.norm(m.k)
            energy[i] += (1.0 + knorm ** 2) ** r * (abs(zk) ** 2 + m.omega ** 2 * abs(pk) ** 2)
    return ModeHistory(taus, modes, zeta_abs, psi_abs, z_abs, w_abs, np.sqrt(energy), r)
