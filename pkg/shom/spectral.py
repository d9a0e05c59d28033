"""
shom - Spectral Fields

Periodic field representations on the slow box and on the fast torus, and
the Fourier-multiplier operators acting on them. Every nonlocal operator of
the toolkit (|D| tanh(h|D|), sech(h|D|), Riesz transforms, Sobolev norms) is
a multiplier built on `apply_multiplier`.

Conventions:
- Slow box: the forward transform carries 1/N (N = total grid points), so
  f(X_j) = sum_m f_m exp(i xi_m (X_j - X_0)) with xi_m = 2 pi m / L, and
  the Plancherel identity reads  int |f|^2 dX = L^d sum_m |f_m|^2.
- Fast torus T^d = R^d / (2 pi Z)^d: coefficients are stored directly,
  f(Y) = sum_k c_k exp(i k.Y) for |k|_inf <= K, and
  int_{T^d} |f|^2 dY = (2 pi)^d sum_k |c_k|^2.
"""

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.fft as sp_fft

from shom.config import MIN_SLOW_POINTS, SYMMETRY_TOL

logger = logging.getLogger(__name__)

# Symbol: maps a stacked wavevector array of shape (dim, ...) to values of shape (...)
Symbol = Callable[[np.ndarray], np.ndarray | complex | float]


# =============================================================================
# Scalar helpers
# =============================================================================

def wavenumber_norm(k: np.ndarray) -> np.ndarray:
    """Euclidean norm |k| of a stacked wavevector array (dim, ...)."""
    return np.sqrt(np.sum(np.asarray(k, dtype=float) ** 2, axis=0))


def sech(x: np.ndarray | float) -> np.ndarray:
    """Overflow-safe sech(x) = 2 e^{-|x|} / (1 + e^{-2|x|})."""
    ax = np.abs(np.asarray(x, dtype=float))
    return 2.0 * np.exp(-ax) / (1.0 + np.exp(-2.0 * ax))


def dn_symbol(h0: np.ndarray | float, knorm: np.ndarray | float) -> np.ndarray:
    """Flat-bottom DN symbol |k| tanh(h0 |k|)."""
    knorm = np.asarray(knorm, dtype=float)
    return knorm * np.tanh(np.asarray(h0, dtype=float) * knorm)


# =============================================================================
# Slow box
# =============================================================================

@dataclass(frozen=True)
class SlowGrid:
    """Uniform periodic grid on the slow box [-L/2, L/2)^d."""

    dim: int
    box_length: float
    n_points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise ValueError(f"box length must be positive, got {self.box_length}")
        if self.n_points < MIN_SLOW_POINTS or self.n_points % 2:
            raise ValueError(
                f"n_points must be even and >= {MIN_SLOW_POINTS}, got {self.n_points}"
            )

    @property
    def spacing(self) -> float:
        return self.box_length / self.n_points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_points,) * self.dim

    @property
    def size(self) -> int:
        return self.n_points ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return self.box_length ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """1-D node coordinates X_j = -L/2 + j dx."""
        return -0.5 * self.box_length + self.spacing * np.arange(self.n_points)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def wavevector(self) -> np.ndarray:
        """Stacked wavenumbers xi of shape (dim, *shape)."""
        xi = 2.0 * np.pi * sp_fft.fftfreq(self.n_points, d=self.spacing)
        return np.stack(np.meshgrid(*([xi] * self.dim), indexing="ij"))

    def refined(self, n_points: int) -> "SlowGrid":
        return SlowGrid(self.dim, self.box_length, n_points)


@dataclass(frozen=True, eq=False)
class SlowField:
    """Real field sampled on a SlowGrid, with its spectrum cached on demand."""

    grid: SlowGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("slow field values must be finite")
        object.__setattr__(self, "values", values)

    @cached_property
    def spectrum(self) -> np.ndarray:
        return sp_fft.fftn(self.values) / self.grid.size

    @classmethod
    def from_spectrum(cls, grid: SlowGrid, spectrum: np.ndarray) -> "SlowField":
        return cls(grid, np.real(sp_fft.ifftn(np.asarray(spectrum) * grid.size)))

    @classmethod
    def from_function(cls, grid: SlowGrid, fn: Callable[..., np.ndarray]) -> "SlowField":
        return cls(grid, np.broadcast_to(fn(*grid.coordinates), grid.shape))

    @classmethod
    def constant(cls, grid: SlowGrid, value: float = 0.0) -> "SlowField":
        return cls(grid, np.full(grid.shape, float(value)))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def with_values(self, values: np.ndarray) -> "SlowField":
        return SlowField(self.grid, values)

    def _check(self, other: "SlowField") -> None:
        if other.grid != self.grid:
            raise ValueError("slow fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SlowField):
            self._check(other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SlowField):
            self._check(other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, scalar: float):
        if isinstance(scalar, SlowField):
            raise TypeError("use dealiased_product for products of slow fields")
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__


# =============================================================================
# Fast torus
# =============================================================================

def _torus_index(k: Sequence[int] | int, cutoff: int, dim: int) -> tuple[int, ...]:
    k = (k,) if np.isscalar(k) else tuple(k)
    if len(k) != dim:
        raise ValueError(f"wavevector {k} does not have dimension {dim}")
    if max(abs(int(kj)) for kj in k) > cutoff:
        raise ValueError(f"wavevector {k} exceeds cutoff {cutoff}")
    return tuple(int(kj) + cutoff for kj in k)


def _is_hermitian(coeffs: np.ndarray, fast_axes: tuple[int, ...]) -> bool:
    mirrored = np.conj(np.flip(coeffs, axis=fast_axes))
    scale = max(1.0, float(np.max(np.abs(coeffs), initial=0.0)))
    return bool(np.max(np.abs(coeffs - mirrored), initial=0.0) <= SYMMETRY_TOL * scale)


def _torus_wavevectors(dim: int, cutoff: int) -> np.ndarray:
    k = np.arange(-cutoff, cutoff + 1)
    return np.stack(np.meshgrid(*([k] * dim), indexing="ij"))


@dataclass(frozen=True, eq=False)
class TorusSpectrum:
    """
    Truncated Fourier coefficients of a field on the fast torus.

    coeffs[k + K] holds the coefficient of exp(i k.Y) for |k|_inf <= K.
    Real-flagged spectra must be Hermitian: c(-k) = conj(c(k)).
    """

    dim: int
    cutoff: int
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        expected = (2 * self.cutoff + 1,) * self.dim
        if self.dim not in (1, 2) or self.cutoff < 0:
            raise ValueError(f"invalid torus spectrum (dim={self.dim}, cutoff={self.cutoff})")
        if coeffs.shape != expected:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match {expected}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("torus coefficients must be finite")
        if self.real and not _is_hermitian(coeffs, tuple(range(self.dim))):
            raise ValueError("real-flagged torus spectrum is not Hermitian-symmetric")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, dim: int, cutoff: int, real: bool = True) -> "TorusSpectrum":
        return cls(dim, cutoff, np.zeros((2 * cutoff + 1,) * dim, dtype=complex), real)

    @classmethod
    def from_modes(
        cls,
        dim: int,
        cutoff: int,
        modes: Mapping[int | tuple[int, ...], complex],
        real: bool = True,
    ) -> "TorusSpectrum":
        """Build from an explicit {k: coefficient} map (conjugates are not filled in)."""
        coeffs = np.zeros((2 * cutoff + 1,) * dim, dtype=complex)
        for k, value in modes.items():
            coeffs[_torus_index(k, cutoff, dim)] = value
        return cls(dim, cutoff, coeffs, real)

    @classmethod
    def from_samples(cls, values: np.ndarray, cutoff: int) -> "TorusSpectrum":
        """Truncated spectrum of real samples on the uniform torus grid Y_j = 2 pi j / n."""
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        if n < 2 * cutoff + 2:
            raise ValueError(f"{n} samples cannot resolve cutoff {cutoff}")
        full = sp_fft.fftn(values) / values.size
        idx = np.arange(-cutoff, cutoff + 1) % n
        coeffs = full[np.ix_(*([idx] * values.ndim))]
        # Restore exact symmetry lost to rounding
        coeffs = 0.5 * (coeffs + np.conj(np.flip(coeffs)))
        return cls(values.ndim, cutoff, coeffs, True)

    @cached_property
    def wavevectors(self) -> np.ndarray:
        return _torus_wavevectors(self.dim, self.cutoff)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape

    def coeff(self, k: int | Sequence[int]) -> complex:
        return complex(self.coeffs[_torus_index(k, self.cutoff, self.dim)])

    @property
    def zero_mode(self) -> complex:
        return complex(self.coeffs[(self.cutoff,) * self.dim])

    @property
    def has_zero_mean(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        return abs(self.zero_mode) <= SYMMETRY_TOL * scale

    def active_modes(self, tol: float = 0.0) -> list[tuple[int, ...]]:
        """Wavevectors whose coefficient magnitude exceeds tol."""
        idx = np.argwhere(np.abs(self.coeffs) > tol)
        return [tuple(int(i) - self.cutoff for i in row) for row in idx]

    def with_coeffs(self, coeffs: np.ndarray, real: bool | None = None) -> "TorusSpectrum":
        return TorusSpectrum(self.dim, self.cutoff, coeffs, self.real if real is None else real)

    def resized(self, cutoff: int) -> "TorusSpectrum":
        """Zero-pad or truncate to a new cutoff."""
        out = np.zeros((2 * cutoff + 1,) * self.dim, dtype=complex)
        m = min(cutoff, self.cutoff)
        src = tuple(slice(self.cutoff - m, self.cutoff + m + 1) for _ in range(self.dim))
        dst = tuple(slice(cutoff - m, cutoff + m + 1) for _ in range(self.dim))
        out[dst] = self.coeffs[src]
        return TorusSpectrum(self.dim, cutoff, out, self.real)

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """Pointwise values sum_k c_k exp(i k.y); y has shape (dim, ...) or (...) when dim == 1."""
        y = np.asarray(y, dtype=float)
        if self.dim == 1 and (y.ndim == 0 or y.shape[0] != 1):
            y = y[np.newaxis]
        kflat = self.wavevectors.reshape(self.dim, -1)
        phase = np.exp(1j * np.tensordot(np.moveaxis(y, 0, -1), kflat, axes=([-1], [0])))
        values = phase @ self.coeffs.reshape(-1)
        return np.real(values) if self.real else values

    def sample(self, n: int) -> np.ndarray:
        """Values on the uniform torus grid Y_j = 2 pi j / n (n > 2K)."""
        if n <= 2 * self.cutoff:
            raise ValueError(f"{n} samples alias cutoff {self.cutoff}")
        full = np.zeros((n,) * self.dim, dtype=complex)
        idx = np.arange(-self.cutoff, self.cutoff + 1) % n
        full[np.ix_(*([idx] * self.dim))] = self.coeffs
        values = sp_fft.ifftn(full) * full.size
        return np.real(values) if self.real else values

    def l2_norm(self) -> float:
        """L^2(T^d) norm, (2 pi)^d sum |c_k|^2 under the torus Plancherel convention."""
        return float(np.sqrt((2.0 * np.pi) ** self.dim * np.sum(np.abs(self.coeffs) ** 2)))

    def _check(self, other: "TorusSpectrum") -> None:
        if (other.dim, other.cutoff) != (self.dim, self.cutoff):
            raise ValueError("torus spectra have different (dim, cutoff)")

    def __add__(self, other: "TorusSpectrum") -> "TorusSpectrum":
        self._check(other)
        return self.with_coeffs(self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other: "TorusSpectrum") -> "TorusSpectrum":
        self._check(other)
        return self.with_coeffs(self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self) -> "TorusSpectrum":
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar: complex) -> "TorusSpectrum":
        real = self.real and np.isreal(scalar)
        return self.with_coeffs(self.coeffs * scalar, bool(real))

    __rmul__ = __mul__


# =============================================================================
# Multiscale fields
# =============================================================================

@dataclass(frozen=True, eq=False)
class MultiscaleField:
    """
    A torus spectrum attached to every slow grid point: f(X, Y), realized as f(X, X/gamma).

    coeffs has shape grid.shape + (2K+1,)*dim (slow axes first).
    """

    grid: SlowGrid
    cutoff: int
    coeffs: np.ndarray
    real: bool = True
    zero_mean: bool = False

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        expected = self.grid.shape + (2 * self.cutoff + 1,) * self.grid.dim
        if coeffs.shape != expected:
            raise ValueError(f"coefficient shape {coeffs.shape} does not match {expected}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("multiscale coefficients must be finite")
        if self.real and not _is_hermitian(coeffs, self.fast_axes):
            raise ValueError("real-flagged multiscale field is not Hermitian in Y")
        if self.zero_mean:
            scale = max(1.0, float(np.max(np.abs(coeffs), initial=0.0)))
            if np.max(np.abs(coeffs[self._zero_index])) > SYMMETRY_TOL * scale:
                raise ValueError("zero-fast-mean multiscale field has a nonzero k=0 coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def fast_axes(self) -> tuple[int, ...]:
        return tuple(range(self.grid.dim, 2 * self.grid.dim))

    @property
    def _zero_index(self) -> tuple:
        return (Ellipsis,) + (self.cutoff,) * self.grid.dim

    @cached_property
    def wavevectors(self) -> np.ndarray:
        """Fast wavevectors shaped (dim, 1, ..., 1, 2K+1, ...) to broadcast against coeffs."""
        k = _torus_wavevectors(self.dim, self.cutoff)
        return k.reshape((self.dim,) + (1,) * self.dim + k.shape[1:])

    @classmethod
    def zeros(cls, grid: SlowGrid, cutoff: int, zero_mean: bool = True) -> "MultiscaleField":
        shape = grid.shape + (2 * cutoff + 1,) * grid.dim
        return cls(grid, cutoff, np.zeros(shape, dtype=complex), True, zero_mean)

    @classmethod
    def from_spectrum(
        cls,
        grid: SlowGrid,
        spectrum: TorusSpectrum,
        weight: SlowField | None = None,
    ) -> "MultiscaleField":
        """f(X, Y) = weight(X) * g(Y) (weight defaults to 1)."""
        if spectrum.dim != grid.dim:
            raise ValueError("spectrum and grid dimensions differ")
        w = np.ones(grid.shape) if weight is None else weight.values
        coeffs = w.reshape(grid.shape + (1,) * grid.dim) * spectrum.coeffs
        return cls(grid, spectrum.cutoff, coeffs, spectrum.real, spectrum.has_zero_mean)

    def at(self, index: int | tuple[int, ...]) -> TorusSpectrum:
        index = (index,) if np.isscalar(index) else tuple(index)
        return TorusSpectrum(self.dim, self.cutoff, self.coeffs[index], self.real)

    def with_coeffs(self, coeffs: np.ndarray, **changes) -> "MultiscaleField":
        return replace(self, coeffs=coeffs, **changes)

    def max_abs_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs), initial=0.0))


# =============================================================================
# Multiplier engine
# =============================================================================

def _evaluate_symbol(symbol: Symbol, k: np.ndarray) -> np.ndarray:
    values = np.asarray(symbol(k))
    values = np.broadcast_to(values, k.shape[1:])
    bad = ~np.isfinite(values)
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        offending = tuple(float(k[(j,) + where]) for j in range(k.shape[0]))
        raise ValueError(f"multiplier symbol is not finite at k={offending}")
    return values


def apply_multiplier(field, symbol: Symbol):
    """
    Apply a Fourier multiplier: out_k = symbol(k) * in_k.

    Works on SlowField (symbol receives xi = 2 pi m / L), TorusSpectrum and
    MultiscaleField (symbol receives integer fast wavevectors). The output
    keeps the real flag only if the result is still Hermitian.
    """
    if isinstance(field, SlowField):
        values = _evaluate_symbol(symbol, field.grid.wavevector)
        return SlowField.from_spectrum(field.grid, values * field.spectrum)
    if isinstance(field, TorusSpectrum):
        values = _evaluate_symbol(symbol, field.wavevectors)
        coeffs = values * field.coeffs
        real = field.real and _is_hermitian(coeffs, tuple(range(field.dim)))
        return field.with_coeffs(coeffs, real)
    if isinstance(field, MultiscaleField):
        k = field.wavevectors
        full_k = np.broadcast_to(k, (field.dim,) + field.coeffs.shape)
        values = _evaluate_symbol(symbol, full_k)
        coeffs = values * field.coeffs
        real = field.real and _is_hermitian(coeffs, field.fast_axes)
        return field.with_coeffs(coeffs, real=real)
    raise TypeError(f"cannot apply a multiplier to {type(field).__name__}")


# =============================================================================
# Slow-box operators
# =============================================================================

def gradient(f: SlowField) -> tuple[SlowField, ...]:
    return tuple(apply_multiplier(f, lambda xi, j=j: 1j * xi[j]) for j in range(f.grid.dim))


def divergence(components: Sequence[SlowField]) -> SlowField:
    grid = components[0].grid
    spectrum = sum(1j * grid.wavevector[j] * c.spectrum for j, c in enumerate(components))
    return SlowField.from_spectrum(grid, spectrum)


def laplacian(f: SlowField) -> SlowField:
    return apply_multiplier(f, lambda xi: -np.sum(xi ** 2, axis=0))


def sobolev_norm(f: SlowField, s: float) -> float:
    """
    H^s norm ( sum_xi (1+|xi|^2)^s |f_xi|^2 )^{1/2} with the box Plancherel factor L^d.

    For s = 0 this equals the discrete L^2 norm (sum f_j^2 dx^d)^{1/2}.
    """
    if s < -1:
        raise ValueError(f"Sobolev index must be >= -1, got {s}")
    weight = (1.0 + np.sum(f.grid.wavevector ** 2, axis=0)) ** s
    return float(np.sqrt(f.grid.volume * np.sum(weight * np.abs(f.spectrum) ** 2)))


def _resize_axis(spectrum: np.ndarray, axis: int, m: int) -> np.ndarray:
    """Move a 1/N-normalized spectrum to m points along one axis; the Nyquist mode is dropped."""
    n = spectrum.shape[axis]
    half = min(n, m) // 2
    shape = list(spectrum.shape)
    shape[axis] = m
    out = np.zeros(shape, dtype=complex)

    def sl(start, stop):
        index = [slice(None)] * spectrum.ndim
        index[axis] = slice(start, stop)
        return tuple(index)

    out[sl(0, half)] = spectrum[sl(0, half)]
    if half > 1:
        out[sl(m - half + 1, m)] = spectrum[sl(n - half + 1, n)]
    return out


def resize_spectrum(spectrum: np.ndarray, n_points: int) -> np.ndarray:
    out = spectrum
    for axis in range(spectrum.ndim):
        out = _resize_axis(out, axis, n_points)
    return out


def resample(f: SlowField, n_points: int) -> SlowField:
    """Trigonometric interpolation of f onto a grid with n_points per axis (same box)."""
    grid = f.grid.refined(n_points)
    return SlowField.from_spectrum(grid, resize_spectrum(f.spectrum, n_points))


def dealiased_product(a: SlowField, b: SlowField) -> SlowField:
    """Pointwise product with 2/3-rule dealiasing (3/2 zero padding)."""
    a._check(b)
    grid = a.grid
    m = 3 * grid.n_points // 2
    ua = np.real(sp_fft.ifftn(resize_spectrum(a.spectrum, m))) * m ** grid.dim
    ub = np.real(sp_fft.ifftn(resize_spectrum(b.spectrum, m))) * m ** grid.dim
    product = sp_fft.fftn(ua * ub) / m ** grid.dim
    return SlowField.from_spectrum(grid, resize_spectrum(product, grid.n_points))


def spectral_shift(f: SlowField, shift: Sequence[float]) -> SlowField:
    """Values of the trigonometric interpolant at X_j + shift."""
    shift = np.asarray(shift, dtype=float).reshape((-1,) + (1,) * f.grid.dim)
    return apply_multiplier(f, lambda xi: np.exp(1j * np.sum(xi * shift, axis=0)))


# =============================================================================
# Fast-torus operators
# =============================================================================

def op_dn_tanh(h0: float, psi: TorusSpectrum) -> TorusSpectrum:
    """|D_Y| tanh(h0 |D_Y|) psi."""
    if not h0 > 0:
        raise ValueError(f"depth h0 must be positive, got {h0}")
    return apply_multiplier(psi, lambda k: dn_symbol(h0, wavenumber_norm(k)))


def op_sech(h0: float, b: TorusSpectrum) -> TorusSpectrum:
    """sech(h0 |D_Y|) b."""
    if not h0 > 0:
        raise ValueError(f"depth h0 must be positive, got {h0}")
    return apply_multiplier(b, lambda k: sech(h0 * wavenumber_norm(k)))


def torus_gradient(f: TorusSpectrum) -> tuple[TorusSpectrum, ...]:
    return tuple(apply_multiplier(f, lambda k, j=j: 1j * k[j]) for j in range(f.dim))


def torus_divergence(components: Sequence[TorusSpectrum]) -> TorusSpectrum:
    first = components[0]
    coeffs = sum(1j * first.wavevectors[j] * c.coeffs for j, c in enumerate(components))
    return first.with_coeffs(coeffs, all(c.real for c in components))


def riesz_gradient(f: TorusSpectrum) -> tuple[TorusSpectrum, ...]:
    """nabla_Y / |D_Y| applied to a zero-mean spectrum."""
    if not f.has_zero_mean:
        raise ValueError("riesz_gradient requires a zero-mean input (undefined at k=0)")
    knorm = wavenumber_norm(f.wavevectors)
    safe = np.where(knorm > 0, knorm, 1.0)

    def component(j):
        return lambda k: np.where(knorm > 0, 1j * k[j] / safe, 0.0)

    return tuple(apply_multiplier(f, component(j)) for j in range(f.dim))


# =============================================================================
# Two-scale operations
# =============================================================================

def realize(f: MultiscaleField, gamma: float) -> SlowField:
    """Trace f(X, X/gamma) on the slow grid."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    grid = f.grid
    k = np.arange(-f.cutoff, f.cutoff + 1)
    phases = [np.exp(1j * np.multiply.outer(grid.axis, k) / gamma)]
    if grid.dim == 1:
        values = np.einsum("ak,ak->a", f.coeffs, phases[0])
    else:
        values = np.einsum("abkl,ak,bl->ab", f.coeffs, phases[0], phases[0])
    if not f.real:
        logger.debug("[SPECTRAL] realizing a complex multiscale field; keeping the real part")
    return SlowField(grid, np.real(values))


def oscillatory_average_gap(g: TorusSpectrum, f: SlowField, gamma: float, refine: int = 4) -> float:
    """
    | int g(X/gamma) f(X) dX - mean(g) int f dX |, by quadrature on a refined grid.

    f is interpolated spectrally onto refine * n points, so it should be
    effectively supported inside the box.
    """
    if g.dim != f.grid.dim:
        raise ValueError("g and f dimensions differ")
    fine = resample(f, refine * f.grid.n_points)
    y = np.stack(fine.grid.coordinates) / gamma
    g_values = g.evaluate(y)
    weighted = np.sum(np.real(g_values) * fine.values) * fine.grid.cell_volume
    mean_part = np.real(g.zero_mode) * fine.integral()
    return float(abs(weighted - mean_part))


# =============================================================================
# Fast-period commensurability
# =============================================================================

def fast_periods(box_length: float, gamma: float) -> float:
    """Number of fast periods 2 pi gamma fitting in the box."""
    return box_length / (2.0 * np.pi * gamma)


def is_commensurate(box_length: float, gamma: float, rtol: float = 1e-9) -> bool:
    n = fast_periods(box_length, gamma)
    return round(n) >= 1 and abs(n - round(n)) <= rtol * n


def snap_gamma(box_length: float, gamma: float) -> float:
    """Nearest gamma' with box_length / (2 pi gamma') a positive integer."""
    n = max(1, round(fast_periods(box_length, gamma)))
    return box_length / (2.0 * np.pi * n)
