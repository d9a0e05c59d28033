"""
shom - Resonance

Bragg-resonance detection: the margin omega_k^2 - (k.V0)^2 of every bottom
mode, certification of a surface state against the nonresonance guard, and
Froude-number criticality.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from shom.bathymetry import BottomProfile
from shom.config import GUARD_DELTA, GUARD_HBAR_FRACTION, MIN_DEPTH
from shom.errors import ResonanceFlag
from shom.shallow_water import SurfaceState, check_depth
from shom.spectral import SlowField, dn_symbol

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NonresonanceGuard:
    """
    Thresholds 1/B_k = delta * exp(-hbar |k|).

    A mode k is nonresonant at a slow point when |omega_k^2 - (k.V0)^2| > 1/B_k.
    """

    delta: float = GUARD_DELTA
    hbar: float = GUARD_HBAR_FRACTION * MIN_DEPTH

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"guard delta must be positive, got {self.delta}")
        if not self.hbar > 0:
            raise ValueError(f"guard hbar must be positive, got {self.hbar}")

    @classmethod
    def for_depth(cls, alpha0: float, delta: float = GUARD_DELTA, fraction: float = GUARD_HBAR_FRACTION) -> "NonresonanceGuard":
        """Guard with hbar = fraction * alpha0."""
        if not 0 < fraction < 1:
            raise ValueError(f"hbar fraction must lie in (0, 1), got {fraction}")
        return cls(delta, fraction * alpha0)

    def check_depth(self, alpha0: float) -> None:
        if not self.hbar < alpha0:
            raise ValueError(f"guard hbar={self.hbar} must be below alpha0={alpha0}")

    def bound(self, knorm: np.ndarray | float) -> np.ndarray:
        """B_k = exp(hbar |k|) / delta."""
        return np.exp(self.hbar * np.asarray(knorm, dtype=float)) / self.delta

    def threshold(self, knorm: np.ndarray | float) -> np.ndarray:
        """1 / B_k."""
        return self.delta * np.exp(-self.hbar * np.asarray(knorm, dtype=float))


@dataclass
class ResonanceReport:
    """Flags of a certification pass; an empty flag list certifies nonresonance."""

    flags: list[ResonanceFlag] = field(default_factory=list)
    froude: SlowField | None = None
    window: tuple[float, float] | None = None
    modes_checked: int = 0

    @property
    def certified(self) -> bool:
        return not self.flags

    def flagged_indices(self) -> list[tuple[int, ...]]:
        return sorted({f.index for f in self.flags})

    def to_rows(self) -> list[dict]:
        rows = []
        for f in self.flags:
            row = {f"x{j}": x for j, x in enumerate(f.x)}
            row.update({f"k{j}": k for j, k in enumerate(f.k)})
            row.update({"margin": f.margin, "threshold": f.threshold})
            rows.append(row)
        return rows


def _kdot(k: Sequence[int], velocity: np.ndarray) -> np.ndarray:
    """k . V0 for velocity stacked as (dim, ...)."""
    return np.tensordot(np.asarray(k, dtype=float), velocity, axes=1)


def margin(h0: float | np.ndarray, V0: Sequence[float] | np.ndarray, k: int | Sequence[int]) -> float | np.ndarray:
    """
    omega_k^2 - (k.V0)^2 = |k| tanh(h0 |k|) - (k.V0)^2.

    V0 may be a d-vector or a stacked (dim, ...) array matching h0.

    Raises:
        ValueError: k = 0.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if not np.any(k):
        raise ValueError("resonance margin is undefined at k = 0")
    V0 = np.asarray(V0, dtype=float)
    if V0.ndim == 0:
        V0 = V0.reshape(1)
    if V0.shape[0] != k.size:
        raise ValueError(f"velocity has {V0.shape[0]} components but k has {k.size}")
    result = dn_symbol(h0, np.linalg.norm(k)) - _kdot(k, V0) ** 2
    return float(result) if np.ndim(result) == 0 else result


def certify(surface: SurfaceState, b: BottomProfile, guard: NonresonanceGuard) -> ResonanceReport:
    """Flag every (slow point, bottom mode) with |margin| <= 1/B_k."""
    check_depth(surface, 0.0)
    h0 = surface.depth.values
    velocity = np.stack([v.values for v in surface.velocity])
    coords = surface.grid.coordinates
    modes = b.modes

    candidates = []
    for k in modes:
        knorm = float(np.linalg.norm(k))
        threshold = float(guard.threshold(knorm))
        m = margin(h0, velocity, k)
        for idx in np.argwhere(np.abs(m) <= threshold):
            idx = tuple(int(i) for i in idx)
            candidates.append((np.ravel_multi_index(idx, h0.shape), k, idx, float(m[idx]), threshold))
    candidates.sort(key=lambda c: (c[0], c[1]))
    flags = [
        ResonanceFlag(idx, tuple(float(c[idx]) for c in coords), k, m, thr)
        for _, k, idx, m, thr in candidates
    ]

    report = ResonanceReport(flags=flags, froude=froude(surface), modes_checked=len(modes))
    if modes:
        norms = [float(np.linalg.norm(k)) for k in modes]
        report.window = window(float(np.mean(h0)), min(norms), max(norms))
    logger.info(
        f"[RESONANCE] {len(modes)} mode(s) x {h0.size} point(s): {len(flags)} flag(s)"
    )
    return report


def froude(surface: SurfaceState) -> SlowField:
    """Local Fr^2 = |V0|^2 / h0."""
    check_depth(surface, 0.0)
    return SlowField(surface.grid, surface.speed() ** 2 / surface.depth.values)


def window(h0: float, kmin: float, kmax: float) -> tuple[float, float]:
    """
    Froude window (Fr^2_min, Fr^2_max) inside which some |k| in [kmin, kmax] can resonate.

    tanh(x)/x decreases, so the lower end comes from kmax.
    """
    if not (h0 > 0 and 0 < kmin <= kmax):
        raise ValueError(f"invalid window arguments h0={h0}, kmin={kmin}, kmax={kmax}")
    lo = np.tanh(h0 * kmax) / (h0 * kmax)
    hi = np.tanh(h0 * kmin) / (h0 * kmin)
    return float(lo), float(hi)


def resonant_wavenumber(h0: float, froude2: float, kmax: float = 1e6) -> float | None:
    """
    The unique |k| with tanh(h0|k|)/(h0|k|) = Fr^2, or None when Fr^2 is outside (0, 1)
    or the root lies beyond kmax.
    """
    if not 0 < froude2 < 1:
        return None
    f = lambda x: np.tanh(x) / x - froude2
    x_hi = h0 * kmax
    if f(x_hi) > 0:
        return None
    x = brentq(f, 1e-12, x_hi, xtol=1e-14)
    return x / h0


def resonant_fraction(
    b: BottomProfile,
    guard: NonresonanceGuard,
    n_samples: int = 10000,
    zeta_range: tuple[float, float] = (-0.3, 0.3),
    speed_range: tuple[float, float] = (0.0, 1.5),
    seed: int = 0,
) -> float:
    """
    Monte Carlo estimate of the fraction of constant states (zeta0, V0) flagged
    by the guard for some bottom mode. Directions of V0 are uniform in d = 2.
    """
    rng = np.random.default_rng(seed)
    zeta = rng.uniform(*zeta_range, n_samples)
    speed = rng.uniform(*speed_range, n_samples)
    if b.dim == 1:
        velocity = speed[np.newaxis]
    else:
        angle = rng.uniform(0.0, 2.0 * np.pi, n_samples)
        velocity = np.stack([speed * np.cos(angle), speed * np.sin(angle)])
    h0 = 1.0 + zeta

    flagged = np.zeros(n_samples, dtype=bool)
    for k in b.modes:
        knorm = float(np.linalg.norm(k))
        flagged |= np.abs(margin(h0, velocity, k)) <= guard.threshold(knorm)
    fraction = float(np.mean(flagged))
    logger.info(f"[RESONANCE] sampled {n_samples} constant states: flagged fraction {fraction:.4g}")
    return fraction
