"""
shom - Run Configuration

YAML run configuration: schema, defaults, validation with line numbers,
and the effective-config echo written into every run directory.

Example:

    mu: 0.01
    bottom: cos
    initial: gaussian_bump
    initial_params: {amplitude: 0.1, width: 1.0, potential: 0.3}
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any

import yaml

from shom.bathymetry import BOTTOM_PRESETS, BottomProfile, bottom_preset, from_modes
from shom.config import (
    CFL_NUMBER,
    EDGE_DECAY_TOL,
    EVALUATION_TIME,
    FD_TIME_STEP,
    FFT_WORKERS,
    GUARD_DELTA,
    GUARD_HBAR_FRACTION,
    MIN_DEPTH,
    MIN_SLOW_POINTS,
    MU_SWEEP,
    ORACLE_CELLS_PER_WAVELENGTH,
    ORACLE_NZ,
    RUNS_DIR,
    SPECTRAL_VISCOSITY,
)
from shom.errors import CommensurabilityError, ConfigError
from shom.resonance import NonresonanceGuard
from shom.shallow_water import INITIAL_PRESETS, SurfaceState, initial_preset
from shom.spectral import SlowGrid, is_commensurate, snap_gamma

logger = logging.getLogger(__name__)

CORRECTOR_INITS = ("stationary", "zero")
ORACLE_SOLVERS = ("direct", "cg")


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    # Regime and slow box
    dim: int = 1
    mu: float = 0.01
    mu_list: list[float] = field(default_factory=lambda: list(MU_SWEEP))
    box_length: float = 8.0 * math.pi
    nx: int = 256
    cutoff: int | None = None

    # Bottom: a preset name, or a list of [k..., re, im] rows
    bottom: str | list = "cos"
    bottom_params: dict = field(default_factory=dict)

    # Initial surface state
    initial: str = "gaussian_bump"
    initial_params: dict = field(default_factory=dict)

    # Depth and nonresonance guard
    alpha0: float = MIN_DEPTH
    guard_delta: float = GUARD_DELTA
    guard_hbar: float | None = None

    # Shallow-water integrator
    dt: float = 1e-3
    T: float = 1.0
    cfl: float = CFL_NUMBER
    viscosity: float = SPECTRAL_VISCOSITY
    snapshot_every: int = 10

    # Corrector
    tau: float = 100.0
    tau_samples: int = 101
    energy_r: float = 0.0
    corrector_init: str = "stationary"
    sample_index: int | None = None

    # Cell verification
    cell_h0: float = 1.0
    cell_gradpsi0: list[float] = field(default_factory=lambda: [1.0])
    cell_ny: list[int] = field(default_factory=lambda: [32, 64, 128])

    # Oracle and consistency study
    oracle_nz: int = ORACLE_NZ
    oracle_cells_per_wavelength: int = ORACLE_CELLS_PER_WAVELENGTH
    oracle_solver: str = "direct"
    fd_dt: float = FD_TIME_STEP
    t_eval: float = EVALUATION_TIME

    # Resonance sampler
    resonance_samples: int = 10000

    # Output and reproducibility
    out_dir: str = str(RUNS_DIR / "latest")
    seed: int = 0
    threads: int = FFT_WORKERS

    @property
    def gamma(self) -> float:
        return math.sqrt(self.mu)

    def slow_grid(self) -> SlowGrid:
        return SlowGrid(self.dim, self.box_length, self.nx)

    def bottom_profile(self) -> BottomProfile:
        if isinstance(self.bottom, str):
            params = dict(self.bottom_params)
            if self.bottom == "random_phase":
                params.setdefault("seed", self.seed)
            params.setdefault("dim", self.dim)
            profile = bottom_preset(self.bottom, **params)
        else:
            modes = {}
            for row in self.bottom:
                k = tuple(int(v) for v in row[: self.dim])
                modes[k] = complex(row[self.dim], row[self.dim + 1])
            profile = from_modes(modes, self.dim)
        if self.cutoff is not None:
            profile = profile.with_cutoff(self.cutoff)
        return profile

    def initial_state(self) -> SurfaceState:
        return initial_preset(self.initial, self.slow_grid(), **self.initial_params)

    def guard(self) -> NonresonanceGuard:
        if self.guard_hbar is None:
            return NonresonanceGuard.for_depth(self.alpha0, self.guard_delta, GUARD_HBAR_FRACTION)
        return NonresonanceGuard(self.guard_delta, self.guard_hbar)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@lru_cache()
def get_default_config() -> RunConfig:
    """Default configuration (shared; copy with dataclasses.replace before changing)."""
    return RunConfig()


# =============================================================================
# Validation
# =============================================================================

def _type_text(t: Any) -> str:
    """'float' for plain classes, 'int | None' / 'list[float]' for annotations."""
    return t.__name__ if type(t) is type else str(t)


_FIELD_TYPES = {f.name: _type_text(f.type) for f in dataclasses.fields(RunConfig)}


def _violations(config: RunConfig) -> list[tuple[str, str]]:
    """(key, message) for every violated rule."""
    out: list[tuple[str, str]] = []

    def rule(ok: bool, key: str, message: str) -> None:
        if not ok:
            out.append((key, message))

    rule(config.dim in (1, 2), "dim", f"dim must be 1 or 2, got {config.dim}")
    rule(config.mu > 0, "mu", f"mu must be positive, got {config.mu}")
    rule(all(m > 0 for m in config.mu_list), "mu_list", "every mu in mu_list must be positive")
    rule(config.box_length > 0, "box_length", f"box_length must be positive, got {config.box_length}")
    rule(
        config.nx >= MIN_SLOW_POINTS and config.nx % 2 == 0,
        "nx",
        f"nx must be even and >= {MIN_SLOW_POINTS}, got {config.nx}",
    )
    rule(config.cutoff is None or config.cutoff >= 1, "cutoff", f"cutoff must be >= 1, got {config.cutoff}")
    rule(0 < config.alpha0 <= 1, "alpha0", f"alpha0 must lie in (0, 1], got {config.alpha0}")
    rule(config.guard_delta > 0, "guard_delta", f"guard_delta must be positive, got {config.guard_delta}")
    rule(
        config.guard_hbar is None or 0 < config.guard_hbar < config.alpha0,
        "guard_hbar",
        f"guard_hbar must lie in (0, alpha0={config.alpha0}), got {config.guard_hbar}",
    )
    rule(config.dt > 0, "dt", f"dt must be positive, got {config.dt}")
    rule(config.T > 0, "T", f"T must be positive, got {config.T}")
    rule(0 < config.cfl <= 1, "cfl", f"cfl must lie in (0, 1], got {config.cfl}")
    rule(config.viscosity >= 0, "viscosity", f"viscosity must be >= 0, got {config.viscosity}")
    rule(config.snapshot_every >= 1, "snapshot_every", "snapshot_every must be >= 1")
    rule(config.tau >= 0, "tau", f"tau must be >= 0, got {config.tau}")
    rule(config.tau_samples >= 2, "tau_samples", "tau_samples must be >= 2")
    rule(config.energy_r >= 0, "energy_r", f"energy_r must be >= 0, got {config.energy_r}")
    rule(
        config.corrector_init in CORRECTOR_INITS,
        "corrector_init",
        f"corrector_init must be one of {CORRECTOR_INITS}, got '{config.corrector_init}'",
    )
    rule(config.cell_h0 > 0, "cell_h0", f"cell_h0 must be positive, got {config.cell_h0}")
    rule(len(config.cell_gradpsi0) == config.dim, "cell_gradpsi0", f"cell_gradpsi0 needs {config.dim} components")
    rule(
        all(n >= 16 and n % 2 == 0 for n in config.cell_ny),
        "cell_ny",
        "cell_ny entries must be even and >= 16",
    )
    rule(config.oracle_nz >= 2, "oracle_nz", f"oracle_nz must be >= 2, got {config.oracle_nz}")
    rule(
        config.oracle_cells_per_wavelength >= 8,
        "oracle_cells_per_wavelength",
        "oracle_cells_per_wavelength must be >= 8",
    )
    rule(
        config.oracle_solver in ORACLE_SOLVERS,
        "oracle_solver",
        f"oracle_solver must be one of {ORACLE_SOLVERS}, got '{config.oracle_solver}'",
    )
    rule(config.fd_dt > 0, "fd_dt", f"fd_dt must be positive, got {config.fd_dt}")
    rule(config.t_eval > config.fd_dt, "t_eval", f"t_eval must exceed fd_dt, got {config.t_eval}")
    rule(config.resonance_samples >= 1, "resonance_samples", "resonance_samples must be >= 1")
    rule(config.threads >= 1, "threads", f"threads must be >= 1, got {config.threads}")

    if isinstance(config.bottom, str):
        rule(
            config.bottom in BOTTOM_PRESETS,
            "bottom",
            f"unknown bottom preset '{config.bottom}' (choose from {sorted(BOTTOM_PRESETS)})",
        )
    else:
        width = config.dim + 2
        rule(
            all(isinstance(row, (list, tuple)) and len(row) == width for row in config.bottom),
            "bottom",
            f"bottom mode rows must be [k..., re, im] with {width} entries",
        )
    rule(
        config.initial in INITIAL_PRESETS,
        "initial",
        f"unknown initial preset '{config.initial}' (choose from {sorted(INITIAL_PRESETS)})",
    )

    if config.initial == "gaussian_bump" and config.box_length > 0:
        amplitude = max(abs(config.initial_params.get("amplitude", 0.1)), abs(config.initial_params.get("potential", 0.3)))
        width = config.initial_params.get("width", 1.0)
        edge = amplitude * math.exp(-((config.box_length / 2) / width) ** 2)
        rule(
            edge <= EDGE_DECAY_TOL,
            "initial_params",
            f"initial data does not decay below {EDGE_DECAY_TOL:g} at the box edge ({edge:.3e})",
        )
    return out


def validate_run_config(config: RunConfig) -> list[str]:
    """
    Validate a run configuration and return the list of violated rules.

    Returns an empty list if the config is valid. Commensurability of mu
    is checked separately (see check_commensurability).
    """
    return [message for _, message in _violations(config)]


def check_commensurability(config: RunConfig, line: int | None = None) -> None:
    """
    Raises:
        CommensurabilityError: 2*pi*sqrt(mu) does not divide box_length.
    """
    if config.mu > 0 and config.box_length > 0 and not is_commensurate(config.box_length, config.gamma):
        raise CommensurabilityError(
            config.box_length, config.gamma, snap_gamma(config.box_length, config.gamma), line
        )


# =============================================================================
# Parsing
# =============================================================================

def _key_lines(text: str) -> dict[str, int]:
    """1-based line of every top-level key."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {e}", mark.line + 1 if mark else None) from e
    if node is None:
        return {}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError("configuration must be a key-value mapping", node.start_mark.line + 1)
    return {key.value: key.start_mark.line + 1 for key, _ in node.value}


def _coerce(key: str, value: Any, line: int | None) -> Any:
    """Check a parsed value against the field type; ints are accepted where floats are expected."""
    text = _FIELD_TYPES[key]
    if value is None:
        if "None" in text:
            return None
        raise ConfigError(f"'{key}' must not be empty", line)
    if text.startswith("float") and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if text.startswith("int") and isinstance(value, int) and not isinstance(value, bool):
        return value
    if text.startswith("str |") and isinstance(value, (str, list)):
        return value
    if text == "str" and isinstance(value, str):
        return value
    if text.startswith("list[float]") and isinstance(value, list) and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return [float(v) for v in value]
    if text.startswith("list[int]") and isinstance(value, list) and all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        return list(value)
    if text == "dict" and isinstance(value, dict):
        return dict(value)
    raise ConfigError(f"'{key}' has invalid value {value!r} (expected {text})", line)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """
    Parse a YAML run configuration, filling unspecified keys from `base` (or defaults).

    Raises:
        ConfigError: unknown key, wrong type, or violated rule, with the line number.
        CommensurabilityError: box length not a multiple of 2*pi*gamma.
    """
    lines = _key_lines(text)
    data = yaml.safe_load(text) or {}
    values = {}
    for key, value in data.items():
        line = lines.get(str(key))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key '{key}'", line)
        values[key] = _coerce(key, value, line)

    config = dataclasses.replace(base or get_default_config(), **values)
    problems = _violations(config)
    if problems:
        key, message = problems[0]
        raise ConfigError(message, lines.get(key))
    check_commensurability(config, lines.get("mu", lines.get("box_length")))
    logger.debug(f"[CONFIG] parsed {len(values)} key(s), gamma={config.gamma:.6g}")
    return config


def load_config(path: Path | str | None) -> RunConfig:
    """Parse a config file (UTF-8), or return a copy of the defaults when path is None."""
    if path is None:
        config = dataclasses.replace(get_default_config())
        check_commensurability(config)
        return config
    return parse_config(Path(path).read_text(encoding="utf-8"))


def echo_config(config: RunConfig, out_dir: Path) -> Path:
    """Write the effective configuration as sorted YAML."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "effective_config.yaml"
    path.write_text(yaml.safe_dump(config.to_dict(), sort_keys=True), encoding="utf-8")
    return path
