"""
shom - Cell Problem

Closed-form solution of the fast-variable cell problem

    (h0^2 Delta_Y + d_z^2) phi = 0          on T^d x [-1, 0]
    phi = psi1                              at z = 0
    (1/h0) d_z phi = grad_Y b . grad psi0   at z = -1

mode by mode, the slow first-order interior corrector, and a brute-force
finite-difference solver used as an oracle for both.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sp_fft
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from shom.bathymetry import BottomProfile
from shom.config import VERTICAL_POINTS
from shom.errors import OracleSolverError
from shom.spectral import (
    SlowField,
    TorusSpectrum,
    _torus_wavevectors,
    laplacian,
    op_dn_tanh,
    op_sech,
    torus_gradient,
    wavenumber_norm,
)

logger = logging.getLogger(__name__)

ZRule = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class VerticalProfileField:
    """
    A family of functions of z in [-1, 0], one per leading index.

    Leading indices are fast modes k (cell profiles, wavevectors given) or
    slow grid points (interior corrector). `rule` and `dz_rule` evaluate the
    closed form and its z-derivative; profiles produced by a discrete solver
    carry samples only.
    """

    z: np.ndarray
    samples: np.ndarray
    rule: ZRule | None = None
    dz_rule: ZRule | None = None
    wavevectors: np.ndarray | None = None

    def __post_init__(self):
        if self.samples.shape[-1] != self.z.size:
            raise ValueError("sample count does not match the vertical grid")

    @property
    def lead_shape(self) -> tuple[int, ...]:
        return self.samples.shape[:-1]

    @property
    def nz(self) -> int:
        """Number of vertical intervals."""
        return self.z.size - 1

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    @property
    def cutoff(self) -> int | None:
        if self.wavevectors is None:
            return None
        return (self.lead_shape[0] - 1) // 2

    def evaluate(self, z: np.ndarray | float) -> np.ndarray:
        if self.rule is None:
            raise ValueError("profile has no closed form; use its samples")
        return self.rule(np.atleast_1d(np.asarray(z, dtype=float)))

    def derivative(self, z: np.ndarray | float) -> np.ndarray:
        """d_z at the given heights: exact if a closed form exists, else second-order differences."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.dz_rule is not None:
            return self.dz_rule(z)
        gradient = np.gradient(self.samples, self.dz, axis=-1, edge_order=2)
        idx = np.rint((z - self.z[0]) / self.dz).astype(int)
        return gradient[..., idx]

    def top_trace(self) -> np.ndarray:
        return self.samples[..., -1]

    def bottom_trace(self) -> np.ndarray:
        return self.samples[..., 0]

    def trace_spectrum(self, level: int = -1) -> TorusSpectrum:
        """Fast spectrum of phi(., z_level) (cell profiles only)."""
        if self.wavevectors is None:
            raise ValueError("not a cell profile")
        dim = self.wavevectors.shape[0]
        return TorusSpectrum(dim, self.cutoff, self.samples[..., level], real=False)

    def with_samples(self, samples: np.ndarray) -> "VerticalProfileField":
        """Same grid and modes, new samples (the closed form is dropped)."""
        return replace(self, samples=np.asarray(samples), rule=None, dz_rule=None)


def vertical_grid(nz: int) -> np.ndarray:
    """Uniform heights z_j = -1 + j/nz, j = 0..nz."""
    return np.linspace(-1.0, 0.0, nz + 1)


def relative_l2_error(approx: VerticalProfileField, exact: VerticalProfileField) -> float:
    """Discrete relative L^2 distance over all modes and heights."""
    if approx.samples.shape != exact.samples.shape:
        raise ValueError(f"profile shapes differ: {approx.samples.shape} vs {exact.samples.shape}")
    norm = np.linalg.norm(exact.samples)
    if norm == 0:
        return float(np.linalg.norm(approx.samples))
    return float(np.linalg.norm(approx.samples - exact.samples) / norm)


# =============================================================================
# Closed form
# =============================================================================

def _common_inputs(psi1: TorusSpectrum, b: BottomProfile, gradpsi0: Sequence[float]):
    if psi1.dim != b.dim:
        raise ValueError(f"psi1 dim {psi1.dim} does not match bottom dim {b.dim}")
    if not psi1.has_zero_mean:
        raise ValueError("psi1 must have zero fast mean")
    gradpsi0 = np.asarray(gradpsi0, dtype=float).reshape(-1)
    if gradpsi0.size != b.dim:
        raise ValueError(f"grad psi0 needs {b.dim} components, got {gradpsi0.size}")
    cutoff = max(psi1.cutoff, b.cutoff)
    return psi1.resized(cutoff), b.spectrum.resized(cutoff), gradpsi0, cutoff


def bottom_flux_coefficients(b: TorusSpectrum, gradpsi0: np.ndarray) -> np.ndarray:
    """Fourier coefficients of grad_Y b . grad psi0, i.e. i (k . grad psi0) b_k."""
    kdotg = np.tensordot(gradpsi0, b.wavevectors, axes=1)
    return 1j * kdotg * b.coeffs


def solve_cell(
    h0: float,
    psi1: TorusSpectrum,
    b: BottomProfile,
    gradpsi0: Sequence[float],
    nz: int = VERTICAL_POINTS,
) -> VerticalProfileField:
    """
    Closed-form cell solution, per mode k != 0:

        phi_k(z) = C(z) psi1_k + S(z) (i k . grad psi0 / |k|) b_k,
        C = cosh(a(z+1))/cosh(a),  S = sinh(a z)/cosh(a),  a = h0 |k|,

    with the hyperbolic quotients written in exponentially decaying form.

    Raises:
        ValueError: h0 <= 0, nonzero-mean psi1, mismatched dimensions.
    """
    if not h0 > 0:
        raise ValueError(f"depth h0 must be positive, got {h0}")
    psi1, bspec, gradpsi0, cutoff = _common_inputs(psi1, b, gradpsi0)
    k = psi1.wavevectors
    knorm = wavenumber_norm(k)
    safe = np.where(knorm > 0, knorm, 1.0)
    kdotg = np.tensordot(gradpsi0, k, axes=1)
    bottom = np.where(knorm > 0, 1j * kdotg / safe, 0.0) * bspec.coeffs
    top = psi1.coeffs
    a = (h0 * knorm)[..., np.newaxis]
    denom = 1.0 + np.exp(-2.0 * a)

    def rule(z: np.ndarray) -> np.ndarray:
        c = np.exp(a * z) * (1.0 + np.exp(-2.0 * a * (z + 1.0))) / denom
        s = (np.exp(a * (z - 1.0)) - np.exp(-a * (z + 1.0))) / denom
        return c * top[..., np.newaxis] + s * bottom[..., np.newaxis]

    def dz_rule(z: np.ndarray) -> np.ndarray:
        dc = a * (np.exp(a * z) - np.exp(-a * (z + 2.0))) / denom
        ds = a * (np.exp(a * (z - 1.0)) + np.exp(-a * (z + 1.0))) / denom
        return dc * top[..., np.newaxis] + ds * bottom[..., np.newaxis]

    z = vertical_grid(nz)
    return VerticalProfileField(z, rule(z), rule, dz_rule, k)


def cell_residual(
    phi: VerticalProfileField,
    h0: float,
    b: BottomProfile,
    gradpsi0: Sequence[float],
    psi1: TorusSpectrum | None = None,
) -> float:
    """
    Max defect of a sampled cell profile: the operator -h0^2|k|^2 + d_z^2 with
    d_z^2 by centered second differences, the bottom condition by one-sided
    second-order differences, and (when psi1 is given) the top trace.
    """
    if phi.wavevectors is None:
        raise ValueError("cell_residual needs a cell profile")
    dim = phi.wavevectors.shape[0]
    cutoff = phi.cutoff
    samples = phi.samples
    dz = phi.dz
    knorm2 = np.sum(phi.wavevectors.astype(float) ** 2, axis=0)[..., np.newaxis]

    second = (samples[..., 2:] - 2.0 * samples[..., 1:-1] + samples[..., :-2]) / dz ** 2
    interior = np.abs(second - h0 ** 2 * knorm2 * samples[..., 1:-1])
    defect = float(np.max(interior, initial=0.0))

    bspec = b.spectrum.resized(cutoff)
    gradpsi0 = np.asarray(gradpsi0, dtype=float).reshape(-1)
    flux = bottom_flux_coefficients(bspec, gradpsi0)
    slope = (-3.0 * samples[..., 0] + 4.0 * samples[..., 1] - samples[..., 2]) / (2.0 * dz)
    defect = max(defect, float(np.max(np.abs(slope / h0 - flux), initial=0.0)))

    if psi1 is not None:
        if psi1.dim != dim:
            raise ValueError("psi1 dimension does not match the profile")
        top = psi1.resized(cutoff).coeffs
        defect = max(defect, float(np.max(np.abs(phi.top_trace() - top), initial=0.0)))
    return defect


def dn_trace_fast(
    h0: float,
    psi1: TorusSpectrum,
    b: BottomProfile,
    gradpsi0: Sequence[float],
) -> TorusSpectrum:
    """(1/h0) d_z phi at z = 0: |D_Y| tanh(h0|D_Y|) psi1 + grad psi0 . grad_Y sech(h0|D_Y|) b."""
    psi1, bspec, gradpsi0, _ = _common_inputs(psi1, b, gradpsi0)
    out = op_dn_tanh(h0, psi1)
    for g, component in zip(gradpsi0, torus_gradient(op_sech(h0, bspec))):
        out = out + component * float(g)
    return out


def phi0_first_corrector(h0: SlowField, psi0: SlowField, nz: int = VERTICAL_POINTS) -> VerticalProfileField:
    """-h0^2 (z^2/2 + z) Delta psi0 at every slow grid point."""
    h0._check(psi0)
    weight = (-(h0.values ** 2) * laplacian(psi0).values)[..., np.newaxis]

    def rule(z: np.ndarray) -> np.ndarray:
        return weight * (0.5 * z ** 2 + z)

    def dz_rule(z: np.ndarray) -> np.ndarray:
        return weight * (z + 1.0)

    z = vertical_grid(nz)
    return VerticalProfileField(z, rule(z), rule, dz_rule)


# =============================================================================
# Finite-difference oracle
# =============================================================================

def _periodic_second_difference(n: int, spacing: float) -> sparse.csr_matrix:
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    mat = sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    mat[0, n - 1] = 1.0
    mat[n - 1, 0] = 1.0
    return mat.tocsr() / spacing ** 2


def _vertical_operator(nz: int, dz: float) -> sparse.csr_matrix:
    """Second difference on z_0..z_{nz-1}: ghost-point Neumann at the bottom, Dirichlet above."""
    main = -2.0 * np.ones(nz)
    lower = np.ones(nz - 1)
    upper = np.ones(nz - 1)
    upper[0] = 2.0
    return sparse.diags([lower, main, upper], [-1, 0, 1], format="csr") / dz ** 2


def oracle_cell_solve(
    h0: float,
    psi1: TorusSpectrum,
    b: BottomProfile,
    gradpsi0: Sequence[float],
    ny: int = VERTICAL_POINTS,
    nz: int = VERTICAL_POINTS,
) -> VerticalProfileField:
    """
    Second-order finite-difference solution of the cell problem on a uniform
    (ny^d x nz) grid, returned as Fourier profiles on the closed-form vertical grid.

    Raises:
        ValueError: grids below 16 points or too coarse for the cutoff.
        OracleSolverError: the sparse solve produced non-finite values.
    """
    if ny < 16 or nz < 16:
        raise ValueError(f"oracle grids need at least 16 points, got ny={ny}, nz={nz}")
    if not h0 > 0:
        raise ValueError(f"depth h0 must be positive, got {h0}")
    psi1, bspec, gradpsi0, cutoff = _common_inputs(psi1, b, gradpsi0)
    if ny < 2 * cutoff + 2:
        raise ValueError(f"ny={ny} cannot resolve cutoff {cutoff}")
    dim = psi1.dim
    dy = 2.0 * np.pi / ny
    dz = 1.0 / nz

    lap_y = _periodic_second_difference(ny, dy)
    if dim == 2:
        eye = sparse.identity(ny, format="csr")
        lap_y = sparse.kron(lap_y, eye) + sparse.kron(eye, lap_y)
    n_y = ny ** dim
    eye_y = sparse.identity(n_y, format="csr")
    eye_z = sparse.identity(nz, format="csr")
    matrix = (h0 ** 2 * sparse.kron(eye_z, lap_y) + sparse.kron(_vertical_operator(nz, dz), eye_y)).tocsc()

    flux = TorusSpectrum(dim, cutoff, bottom_flux_coefficients(bspec, gradpsi0), real=False)
    g = np.real(flux.sample(ny)).reshape(-1)
    top = psi1.sample(ny).reshape(-1)
    rhs = np.zeros((nz, n_y))
    rhs[0] = 2.0 * h0 * g / dz
    rhs[-1] -= top / dz ** 2

    logger.debug(f"[CELL] oracle solve: {matrix.shape[0]} unknowns (ny={ny}, nz={nz})")
    solution = spla.spsolve(matrix, rhs.reshape(-1))
    if not np.all(np.isfinite(solution)):
        raise OracleSolverError(1, float("nan"), "singular cell system")

    phi = np.vstack([solution.reshape(nz, n_y), top[np.newaxis]])
    phi = phi.reshape((nz + 1,) + (ny,) * dim)
    spectra = sp_fft.fftn(phi, axes=tuple(range(1, dim + 1))) / n_y
    idx = np.arange(-cutoff, cutoff + 1) % ny
    modes = spectra[np.ix_(np.arange(nz + 1), *([idx] * dim))]
    samples = np.moveaxis(modes, 0, -1)
    return VerticalProfileField(vertical_grid(nz), samples, wavevectors=_torus_wavevectors(dim, cutoff))
