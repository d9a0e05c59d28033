"""
shom - Bathymetry

Periodic bottom profiles b(Y) on the fast torus, their validation, the
built-in profile library, and realization b(X/gamma) on a slow grid.
"""

import logging
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from shom.config import BOTTOM_MODE_TOL, CUTOFF_BUFFER
from shom.spectral import SlowField, SlowGrid, TorusSpectrum

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BottomProfile:
    """Zero-mean, real, 2*pi-periodic bottom variation b(Y)."""

    spectrum: TorusSpectrum

    def __post_init__(self):
        if not self.spectrum.real:
            raise ValueError("bottom profile must be real (Hermitian spectrum)")
        if not self.spectrum.has_zero_mean:
            raise ValueError(
                f"bottom profile must have zero mean, got coefficient {self.spectrum.zero_mode:.3e} at k=0"
            )

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    @property
    def cutoff(self) -> int:
        return self.spectrum.cutoff

    @property
    def amplitude_norm(self) -> float:
        """|b|_{L^2(T^d)}."""
        return self.spectrum.l2_norm()

    @property
    def modes(self) -> list[tuple[int, ...]]:
        """Wavevectors with |b_k| > BOTTOM_MODE_TOL."""
        return self.spectrum.active_modes(BOTTOM_MODE_TOL)

    @property
    def is_flat(self) -> bool:
        return not self.modes

    def scaled(self, factor: float) -> "BottomProfile":
        return BottomProfile(self.spectrum * float(factor))

    def with_cutoff(self, cutoff: int) -> "BottomProfile":
        return BottomProfile(self.spectrum.resized(cutoff))

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.spectrum.evaluate(y)


def default_cutoff(modes: Mapping) -> int:
    """Highest retained mode (or number of nonzero modes, if larger) plus a buffer."""
    nonzero = [k for k, c in modes.items() if abs(c) > BOTTOM_MODE_TOL]
    if not nonzero:
        return CUTOFF_BUFFER
    highest = max(max(abs(int(kj)) for kj in np.atleast_1d(k)) for k in nonzero)
    return max(highest, len(nonzero)) + CUTOFF_BUFFER


def from_modes(
    coeffs: Mapping[int | tuple[int, ...], complex],
    dim: int = 1,
    cutoff: int | None = None,
) -> BottomProfile:
    """
    Build a bottom profile from explicit Fourier coefficients {k: b_k}.

    Both k and -k must be given (b_{-k} = conj(b_k)); a k=0 entry must vanish.

    Raises:
        ValueError: nonzero mean, or non-Hermitian coefficients.
    """
    for k, value in coeffs.items():
        if not any(np.atleast_1d(k)) and abs(value) > BOTTOM_MODE_TOL:
            raise ValueError(f"bottom profile must have zero mean, got b_0 = {value}")
    if cutoff is None:
        cutoff = default_cutoff(coeffs)
    spectrum = TorusSpectrum.from_modes(dim, cutoff, coeffs, real=True)
    return BottomProfile(spectrum)


def flat_bottom(dim: int = 1, cutoff: int = CUTOFF_BUFFER) -> BottomProfile:
    return BottomProfile(TorusSpectrum.zeros(dim, cutoff))


def realize_bottom(b: BottomProfile, gamma: float, grid: SlowGrid) -> SlowField:
    """b(X/gamma) sampled on the slow grid."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if b.dim != grid.dim:
        raise ValueError(f"bottom dim {b.dim} does not match grid dim {grid.dim}")
    if b.is_flat:
        return SlowField.constant(grid, 0.0)
    y = np.stack(grid.coordinates) / gamma
    return SlowField(grid, b.evaluate(y))


# =============================================================================
# Profile library
# =============================================================================

def _as_wavevector(k: int | tuple[int, ...], dim: int) -> tuple[int, ...]:
    k = (int(k),) if np.isscalar(k) else tuple(int(kj) for kj in k)
    if dim == 2 and len(k) == 1:
        k = (k[0], 0)
    return k


def cosine_bottom(amplitude: float = 1.0, wavenumber: int | tuple[int, ...] = 1, dim: int = 1) -> BottomProfile:
    """b(Y) = amplitude * cos(k.Y)."""
    k = _as_wavevector(wavenumber, dim)
    minus = tuple(-kj for kj in k)
    return from_modes({k: amplitude / 2, minus: amplitude / 2}, dim)


def two_mode_bottom(
    amplitudes: tuple[float, float] = (1.0, 0.5),
    wavenumbers: tuple[int, int] = (1, 2),
    dim: int = 1,
) -> BottomProfile:
    """Superposition of two cosines."""
    modes: dict[tuple[int, ...], complex] = {}
    for a, k in zip(amplitudes, wavenumbers):
        kv = _as_wavevector(k, dim)
        for key in (kv, tuple(-kj for kj in kv)):
            modes[key] = modes.get(key, 0.0) + a / 2
    return from_modes(modes, dim)


def random_phase_bottom(
    n_modes: int = 6,
    decay: float = 0.5,
    amplitude: float = 1.0,
    seed: int = 0,
    dim: int = 1,
) -> BottomProfile:
    """
    Truncated random-phase spectrum with |b_k| = amplitude * exp(-decay |k|).

    The phases are drawn from a seeded generator, so the profile is reproducible.
    """
    rng = np.random.default_rng(seed)
    modes: dict[tuple[int, ...], complex] = {}
    if dim == 1:
        half = [(k,) for k in range(1, n_modes + 1)]
    else:
        half = [
            (k1, k2)
            for k1 in range(0, n_modes + 1)
            for k2 in range(-n_modes, n_modes + 1)
            if k1 > 0 or k2 > 0
        ]
    for k in half:
        modulus = amplitude * np.exp(-decay * float(np.linalg.norm(k)))
        value = modulus * np.exp(2j * np.pi * rng.random())
        modes[k] = value
        modes[tuple(-kj for kj in k)] = np.conj(value)
    return from_modes(modes, dim)


BOTTOM_PRESETS = {
    "flat": flat_bottom,
    "cos": cosine_bottom,
    "two_mode": two_mode_bottom,
    "random_phase": random_phase_bottom,
}


def bottom_preset(name: str, **params) -> BottomProfile:
    """Look up a named profile from the library."""
    try:
        factory = BOTTOM_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown bottom preset '{name}' (choose from {sorted(BOTTOM_PRESETS)})") from None
    logger.debug(f"[BOTTOM] preset {name} with {params}")
    return factory(**params)
