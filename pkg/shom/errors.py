"""
shom - Errors

Exception hierarchy. Each class carries the process exit code the CLI
uses when the error ends a run.
"""

import math
from dataclasses import dataclass


class ShomError(Exception):
    """Base class for failures that end a run."""

    exit_code = 1


class ConfigError(ShomError):
    """Invalid configuration or parameter combination."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CommensurabilityError(ConfigError):
    """The fast period 2*pi*gamma does not divide the slow box length."""

    def __init__(self, box_length: float, gamma: float, suggested_gamma: float, line: int | None = None):
        self.box_length = box_length
        self.gamma = gamma
        self.suggested_gamma = suggested_gamma
        super().__init__(
            f"commensurability: box length {box_length:.12g} is not a multiple of the fast period "
            f"2*pi*gamma = {2 * math.pi * gamma:.12g} (gamma={gamma:.12g}); "
            f"nearest admissible gamma is {suggested_gamma:.12g} (mu={suggested_gamma ** 2:.12g})",
            line,
        )


class CFLError(ConfigError):
    """Time step violates the CFL restriction."""

    def __init__(self, dt: float, dt_max: float):
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(f"CFL violation: |dt|={abs(dt):.6g} exceeds the admissible {dt_max:.6g}")


@dataclass(frozen=True)
class ResonanceFlag:
    """One (slow point, mode) pair failing the nonresonance test."""

    index: tuple[int, ...]
    x: tuple[float, ...]
    k: tuple[int, ...]
    margin: float
    threshold: float


class ResonanceError(ShomError):
    """Bragg resonance (or near-resonance) violates the guard."""

    exit_code = 3

    def __init__(self, flags: list[ResonanceFlag]):
        self.flags = flags
        first = flags[0] if flags else None
        detail = (
            f" first at X={first.x}, k={first.k}, margin={first.margin:.3e} <= {first.threshold:.3e}"
            if first
            else ""
        )
        super().__init__(f"nonresonance guard failed for {len(flags)} mode(s);{detail}")


class DepthError(ShomError):
    """Water depth dropped below the admissible minimum."""

    exit_code = 4

    def __init__(self, min_depth: float, alpha0: float, location: tuple[float, ...], time: float | None = None):
        self.min_depth = min_depth
        self.alpha0 = alpha0
        self.location = location
        self.time = time
        when = f" at t={time:.6g}" if time is not None else ""
        super().__init__(
            f"depth {min_depth:.6g} below alpha0={alpha0:.6g} at X={location}{when}"
        )


class OracleSolverError(ShomError):
    """The strip linear solve did not converge."""

    exit_code = 5

    def __init__(self, iterations: int, residual: float, message: str = "linear solver did not converge"):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
