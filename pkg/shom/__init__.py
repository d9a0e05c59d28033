"""
shom - shallow-water homogenization over rough periodic bottoms.

Leading-order shallow-water flow, the fast-scale corrector driven by the
bottom, its Bragg-resonance guard, and numerical checks of the two-scale
Ansatz against a brute-force Dirichlet-Neumann solver.
"""

from shom.errors import (
    CFLError,
    CommensurabilityError,
    ConfigError,
    DepthError,
    OracleSolverError,
    ResonanceError,
    ShomError,
)
from shom.run_config import RunConfig, get_default_config, parse_config, validate_run_config

__version__ = "0.1.0"

__all__ = [
    "CFLError",
    "CommensurabilityError",
    "ConfigError",
    "DepthError",
    "OracleSolverError",
    "ResonanceError",
    "RunConfig",
    "ShomError",
    "get_default_config",
    "parse_config",
    "validate_run_config",
]
