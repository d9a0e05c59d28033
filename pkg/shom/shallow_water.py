"""
shom - Shallow Water

Pseudospectral integration of the effective (flat-bottom) shallow-water
system for the surface elevation zeta0 and velocity V0:

    d_t zeta0 + div(h0 V0) = 0,    h0 = 1 + zeta0
    d_t V0 + grad zeta0 + (V0 . grad) V0 = 0

with the surface potential optionally evolved alongside by
d_t psi0 = -zeta0 - |V0|^2 / 2. Time stepping is SSP-RK3 (Shu-Osher form).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from shom.config import BLOWUP_FACTOR, CFL_NUMBER, MIN_DEPTH, SPECTRAL_VISCOSITY
from shom.errors import CFLError, DepthError
from shom.spectral import (
    SlowField,
    SlowGrid,
    apply_multiplier,
    dealiased_product,
    divergence,
    gradient,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SurfaceState:
    """Effective surface elevation, velocity and (optionally) potential at one time."""

    zeta0: SlowField
    velocity: tuple[SlowField, ...]
    psi0: SlowField | None = None
    time: float = 0.0

    def __post_init__(self):
        velocity = tuple(self.velocity)
        if len(velocity) != self.zeta0.grid.dim:
            raise ValueError(f"velocity needs {self.zeta0.grid.dim} components, got {len(velocity)}")
        for v in velocity:
            self.zeta0._check(v)
        if self.psi0 is not None:
            self.zeta0._check(self.psi0)
        object.__setattr__(self, "velocity", velocity)

    @property
    def grid(self) -> SlowGrid:
        return self.zeta0.grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def depth(self) -> SlowField:
        return self.zeta0 + 1.0

    def speed(self) -> np.ndarray:
        return np.sqrt(sum(v.values ** 2 for v in self.velocity))

    def velocity_at(self, index: tuple[int, ...]) -> np.ndarray:
        return np.array([v.values[index] for v in self.velocity])

    def _combine(self, other: "SurfaceState", a: float, b: float, time: float) -> "SurfaceState":
        """a * self + b * other, componentwise."""
        psi = None
        if self.psi0 is not None and other.psi0 is not None:
            psi = self.psi0 * a + other.psi0 * b
        return SurfaceState(
            self.zeta0 * a + other.zeta0 * b,
            tuple(u * a + v * b for u, v in zip(self.velocity, other.velocity)),
            psi,
            time,
        )


class Tendency(NamedTuple):
    zeta: SlowField
    velocity: tuple[SlowField, ...]
    psi: SlowField | None


@dataclass(frozen=True)
class Diagnostics:
    time: float
    mass: float
    energy: float
    min_depth: float
    max_grad_v: float

    def as_row(self) -> dict:
        return {
            "t": self.time,
            "mass": self.mass,
            "energy": self.energy,
            "min_depth": self.min_depth,
            "max_gradV": self.max_grad_v,
        }


@dataclass
class Trajectory:
    """Append-only record of snapshots with their diagnostics."""

    times: list[float] = field(default_factory=list)
    states: list[SurfaceState] = field(default_factory=list)
    diagnostics: list[Diagnostics] = field(default_factory=list)
    truncated: bool = False
    reason: str | None = None

    def append(self, state: SurfaceState, diag: Diagnostics) -> None:
        if self.times and state.time <= self.times[-1]:
            raise ValueError(f"snapshot time {state.time} is not after {self.times[-1]}")
        self.times.append(state.time)
        self.states.append(state)
        self.diagnostics.append(diag)

    @property
    def final(self) -> SurfaceState:
        return self.states[-1]

    @property
    def last_valid_time(self) -> float:
        return self.times[-1]

    def __len__(self) -> int:
        return len(self.times)


# =============================================================================
# Diagnostics
# =============================================================================

def mass(state: SurfaceState) -> float:
    return state.zeta0.integral()


def energy(state: SurfaceState) -> float:
    """int (h0 |V0|^2 + zeta0^2) / 2 dX."""
    h = state.depth.values
    density = 0.5 * (h * state.speed() ** 2 + state.zeta0.values ** 2)
    return float(np.sum(density) * state.grid.cell_volume)


def max_velocity_gradient(state: SurfaceState) -> float:
    return max(float(np.max(np.abs(g.values))) for v in state.velocity for g in gradient(v))


def diagnose(state: SurfaceState) -> Diagnostics:
    return Diagnostics(
        time=state.time,
        mass=mass(state),
        energy=energy(state),
        min_depth=float(np.min(state.depth.values)),
        max_grad_v=max_velocity_gradient(state),
    )


def riemann_invariants(state: SurfaceState) -> tuple[np.ndarray, np.ndarray]:
    """V0 + 2 sqrt(h0) and V0 - 2 sqrt(h0) (d = 1)."""
    if state.dim != 1:
        raise ValueError("Riemann invariants are defined for d = 1")
    c = 2.0 * np.sqrt(state.depth.values)
    v = state.velocity[0].values
    return v + c, v - c


def check_depth(state: SurfaceState, alpha0: float = MIN_DEPTH) -> None:
    """Raise DepthError if 1 + zeta0 < alpha0 anywhere."""
    h = state.depth.values
    idx = np.unravel_index(int(np.argmin(h)), h.shape)
    if h[idx] < alpha0:
        location = tuple(float(c[idx]) for c in state.grid.coordinates)
        raise DepthError(float(h[idx]), alpha0, location, state.time)


def max_time_step(state: SurfaceState, cfl: float = CFL_NUMBER) -> float:
    """cfl * dx / max(|V0| + sqrt(h0))."""
    h = np.clip(state.depth.values, 0.0, None)
    signal = float(np.max(state.speed() + np.sqrt(h)))
    return cfl * state.grid.spacing / signal


# =============================================================================
# Right-hand side and time stepping
# =============================================================================

def _hyperviscosity(f: SlowField, viscosity: float) -> SlowField:
    return apply_multiplier(f, lambda xi: -viscosity * np.sum(xi ** 2, axis=0) ** 2)


def sw_rhs(
    state: SurfaceState,
    alpha0: float = MIN_DEPTH,
    viscosity: float = SPECTRAL_VISCOSITY,
) -> Tendency:
    """
    Tendency (-div(h0 V0), -grad zeta0 - (V0 . grad) V0) with dealiased products.

    Raises:
        DepthError: if the depth invariant fails.
    """
    check_depth(state, alpha0)
    h = state.depth
    zeta_t = -divergence([dealiased_product(h, v) for v in state.velocity])
    grad_zeta = gradient(state.zeta0)
    grads = [gradient(v) for v in state.velocity]

    velocity_t = []
    for j in range(state.dim):
        advection = dealiased_product(state.velocity[0], grads[j][0])
        for i in range(1, state.dim):
            advection = advection + dealiased_product(state.velocity[i], grads[j][i])
        velocity_t.append(-grad_zeta[j] - advection)

    psi_t = None
    if state.psi0 is not None:
        kinetic = dealiased_product(state.velocity[0], state.velocity[0])
        for v in state.velocity[1:]:
            kinetic = kinetic + dealiased_product(v, v)
        psi_t = -state.zeta0 - kinetic * 0.5

    if viscosity > 0:
        zeta_t = zeta_t + _hyperviscosity(state.zeta0, viscosity)
        velocity_t = [vt + _hyperviscosity(v, viscosity) for vt, v in zip(velocity_t, state.velocity)]

    return Tendency(zeta_t, tuple(velocity_t), psi_t)


def _euler(state: SurfaceState, dt: float, alpha0: float, viscosity: float) -> SurfaceState:
    """state + dt * L(state)."""
    tend = sw_rhs(state, alpha0, viscosity)
    psi = None
    if state.psi0 is not None:
        psi = state.psi0 + tend.psi * dt
    return SurfaceState(
        state.zeta0 + tend.zeta * dt,
        tuple(v + vt * dt for v, vt in zip(state.velocity, tend.velocity)),
        psi,
        state.time + dt,
    )


def step(
    state: SurfaceState,
    dt: float,
    alpha0: float = MIN_DEPTH,
    cfl: float = CFL_NUMBER,
    viscosity: float = SPECTRAL_VISCOSITY,
) -> SurfaceState:
    """
    One SSP-RK3 step. Negative dt integrates backward in time.

    Raises:
        CFLError: if |dt| exceeds the CFL limit.
        DepthError: if the depth invariant fails at any stage.
    """
    dt_max = max_time_step(state, cfl)
    if abs(dt) > dt_max * (1.0 + 1e-12):
        raise CFLError(dt, dt_max)

    t0 = state.time
    u1 = _euler(state, dt, alpha0, viscosity)
    u2 = state._combine(_euler(u1, dt, alpha0, viscosity), 0.75, 0.25, t0 + 0.5 * dt)
    u3 = state._combine(_euler(u2, dt, alpha0, viscosity), 1.0 / 3.0, 2.0 / 3.0, t0 + dt)
    check_depth(u3, alpha0)
    return u3


def simulate(
    state0: SurfaceState,
    T: float,
    dt: float,
    alpha0: float = MIN_DEPTH,
    cfl: float = CFL_NUMBER,
    viscosity: float = SPECTRAL_VISCOSITY,
    snapshot_every: int = 1,
    blowup_factor: float = BLOWUP_FACTOR,
) -> Trajectory:
    """
    Integrate from state0.time to state0.time + T.

    The step is shortened uniformly so that T is hit exactly. The run is
    truncated (not failed) once max|grad V0| exceeds blowup_factor / L.

    Raises:
        CFLError: if the requested step violates the CFL limit.
        DepthError: on depth loss; the partial trajectory is attached as `.trajectory`.
    """
    if T <= 0 or dt <= 0:
        raise ValueError(f"T and dt must be positive, got T={T}, dt={dt}")
    n_steps = max(1, math.ceil(T / dt - 1e-9))
    h = T / n_steps
    threshold = blowup_factor / state0.grid.box_length
    t_start = state0.time

    traj = Trajectory()
    traj.append(state0, diagnose(state0))
    logger.info(f"[SW] simulate: {n_steps} steps of {h:.4g} to t={t_start + T:.4g}")

    state = state0
    for n in range(1, n_steps + 1):
        try:
            state = step(state, h, alpha0, cfl, viscosity)
        except DepthError as e:
            e.trajectory = traj
            logger.error(f"[SW] depth loss at step {n}: {e}")
            raise
        state = SurfaceState(state.zeta0, state.velocity, state.psi0, t_start + n * h)

        if n % snapshot_every == 0 or n == n_steps:
            diag = diagnose(state)
            if diag.max_grad_v > threshold:
                traj.truncated = True
                traj.reason = f"gradient blow-up: max|grad V0|={diag.max_grad_v:.3e} at t={state.time:.6g}"
                logger.warning(f"[SW] {traj.reason}; last valid time {traj.last_valid_time:.6g}")
                break
            traj.append(state, diag)
            logger.debug(f"[SW] t={state.time:.5f} mass={diag.mass:.12e} energy={diag.energy:.12e}")

    return traj


# =============================================================================
# Initial states
# =============================================================================

def _zero(grid: SlowGrid) -> SlowField:
    return SlowField.constant(grid, 0.0)


def rest_state(grid: SlowGrid, level: float = 0.0) -> SurfaceState:
    return SurfaceState(SlowField.constant(grid, level), (_zero(grid),) * grid.dim, _zero(grid))


def stream_state(grid: SlowGrid, speed: float = 0.5) -> SurfaceState:
    """Uniform stream along the first axis (no periodic potential exists)."""
    velocity = (SlowField.constant(grid, speed),) + (_zero(grid),) * (grid.dim - 1)
    return SurfaceState(_zero(grid), velocity, None)


def supercritical_stream_state(grid: SlowGrid, speed: float = 1.2) -> SurfaceState:
    if speed ** 2 < 1.0:
        raise ValueError(f"speed {speed} is not supercritical at unit depth")
    return stream_state(grid, speed)


def gaussian_bump_state(
    grid: SlowGrid,
    amplitude: float = 0.1,
    width: float = 1.0,
    potential: float = 0.3,
) -> SurfaceState:
    """zeta0 = a exp(-|X|^2/w^2), psi0 = c exp(-|X|^2/w^2), V0 = grad psi0."""
    coords = grid.coordinates
    envelope = np.exp(-sum(x ** 2 for x in coords) / width ** 2)
    zeta = SlowField(grid, amplitude * envelope)
    psi = SlowField(grid, potential * envelope)
    velocity = tuple(SlowField(grid, -2.0 * potential * x / width ** 2 * envelope) for x in coords)
    return SurfaceState(zeta, velocity, psi)


def sine_flow_state(grid: SlowGrid, amplitude: float = 0.5) -> SurfaceState:
    """Periodic potential flow V0 = a sin(2 pi X1 / L) over a flat surface."""
    q = 2.0 * np.pi / grid.box_length
    x = grid.coordinates[0]
    psi = SlowField(grid, -amplitude / q * np.cos(q * x))
    velocity = (SlowField(grid, amplitude * np.sin(q * x)),) + (_zero(grid),) * (grid.dim - 1)
    return SurfaceState(_zero(grid), velocity, psi)


INITIAL_PRESETS = {
    "rest": rest_state,
    "stream": stream_state,
    "supercritical_stream": supercritical_stream_state,
    "gaussian_bump": gaussian_bump_state,
    "sine_flow": sine_flow_state,
}


def initial_preset(name: str, grid: SlowGrid, **params) -> SurfaceState:
    try:
        factory = INITIAL_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown initial preset '{name}' (choose from {sorted(INITIAL_PRESETS)})") from None
    return factory(grid, **params)
