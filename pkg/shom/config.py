"""
shom - Configuration

Centralized numerical defaults for the toolkit. Run configurations
(`shom.run_config.RunConfig`) fall back to these values.
"""

import os
from pathlib import Path

# =============================================================================
# Spectral Representation
# =============================================================================

# Minimum number of slow grid points per axis (must also be even)
MIN_SLOW_POINTS = 8

# Extra fast modes kept on top of the bottom's own modes
CUTOFF_BUFFER = 8

# Relative tolerance used for Hermitian-symmetry and zero-mean checks
SYMMETRY_TOL = 1e-12

# Data must decay below this at the edge of the slow box
EDGE_DECAY_TOL = 1e-10

# FFT worker threads. SHOM_THREADS overrides, --threads overrides both.
FFT_WORKERS = int(os.getenv("SHOM_THREADS", "1"))

# =============================================================================
# Bathymetry
# =============================================================================

# Fourier coefficients below this magnitude are treated as absent
BOTTOM_MODE_TOL = 1e-14

# =============================================================================
# Shallow Water Integrator
# =============================================================================

# Courant number for the SSP-RK3 step
CFL_NUMBER = 0.5

# Minimum admissible depth 1 + zeta0
MIN_DEPTH = 0.5

# Blow-up when max|grad V0| exceeds BLOWUP_FACTOR / L
BLOWUP_FACTOR = 1e3

# Spectral hyperviscosity nu (-Delta)^2; zero keeps the scheme inviscid
SPECTRAL_VISCOSITY = 0.0

# =============================================================================
# Corrector & Resonance
# =============================================================================

# Switch to the series form of (exp(-i tau theta) - 1)/(-i theta) below this |tau theta|
NEAR_RESONANCE_SERIES = 1e-6

# Nonresonance guard: delta and hbar = alpha0 * GUARD_HBAR_FRACTION
GUARD_DELTA = 1e-3
GUARD_HBAR_FRACTION = 0.5

# =============================================================================
# Vertical Problems
# =============================================================================

# Vertical samples for closed-form cell profiles
VERTICAL_POINTS = 64

# Strip oracle: vertical cells and horizontal cells per fast wavelength 2*pi*gamma
ORACLE_NZ = 32
ORACLE_CELLS_PER_WAVELENGTH = 32

# Iterative oracle solver (used when solver="cg")
ORACLE_CG_TOL = 1e-10
ORACLE_CG_MAXITER = 20000

# =============================================================================
# Consistency Study
# =============================================================================

# Centered finite-difference step for time derivatives of the Ansatz
FD_TIME_STEP = 1e-3

# Time at which residuals are measured
EVALUATION_TIME = 0.1

# Default mu sweep
MU_SWEEP = [0.04, 0.02, 0.01, 0.005]

# Acceptance thresholds for fitted log-log slopes
E1_SLOPE_MIN = 0.30
E2_SLOPE_MIN = 0.60
REMAINDER_SLOPE_MIN = 0.30
FLAT_SLOPE_TARGET = 1.0
FLAT_SLOPE_TOL = 0.15

# =============================================================================
# Output
# =============================================================================

# Project root for reference (one level up from shom/)
PROJECT_ROOT = Path(__file__).parent.parent

# Default directory for run outputs
RUNS_DIR = PROJECT_ROOT / "runs"
