"""
shom - Core Runners

Interface-agnostic experiment runners, one per CLI subcommand. Each runner
takes a validated RunConfig and an output directory, writes its artifacts
(CSV tables, binary field dumps, summary.txt, effective_config.yaml and the
run.jsonl event stream) and returns a RunResult.
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from shom.bathymetry import BottomProfile
from shom.cell_problem import oracle_cell_solve, relative_l2_error, solve_cell
from shom.corrector import (
    CorrectorState,
    energy_bound,
    energy_norm,
    evolve,
    forcing,
    mode_history,
    stationary,
    stationary_field,
)
from shom.effective_dn import build_ansatz
from shom.errors import DepthError, ShomError
from shom.residual import fine_points, rate_study, resample_state
from shom.resonance import certify, resonant_fraction
from shom.run_config import RunConfig, echo_config
from shom.shallow_water import SurfaceState, simulate
from shom.spectral import TorusSpectrum
from shom.utils.field_io import field_rows, write_csv, write_fields, write_summary

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "corrector", "stationary", "resonance-scan", "cell-verify", "consistency")


class RunLogger:
    """Streams run events to <out>/run.jsonl as they happen."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = out_dir / "run.jsonl"

    def log(self, entry_type: str, data: dict):
        entry = {
            "timestamp": datetime.now().isoformat(),
            "type": entry_type,
            **data,
        }
        with open(self.log_file, "a") as f:
            f.write(json.dumps(entry, default=str) + "\n")

    def log_error(self, error: Exception):
        self.log("error", {
            "error": type(error).__name__,
            "message": str(error),
            "exit_code": getattr(error, "exit_code", 1),
        })


@dataclass
class RunResult:
    """What a runner produced; `summary` mirrors summary.txt."""

    command: str
    out_dir: Path
    summary: dict
    files: list[Path] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _start(command: str, config: RunConfig, out_dir: Path | None) -> tuple[Path, RunLogger]:
    out = Path(out_dir or config.out_dir)
    run_log = RunLogger(out)
    echo_config(config, out)
    run_log.log("start", {"command": command, "mu": config.mu, "seed": config.seed})
    logger.info(f"[RUN] {command} -> {out}")
    return out, run_log


def _finish(command: str, out: Path, run_log: RunLogger, summary: dict, files: list[Path],
            failures: list[str] | None = None) -> RunResult:
    summary = {"command": command, **summary}
    files = files + [write_summary(out / "summary.txt", summary), out / "effective_config.yaml"]
    run_log.log("result", {"summary": summary, "files": [p.name for p in files]})
    return RunResult(command, out, summary, files, failures or [])


def _surface_fields(state: SurfaceState) -> dict:
    fields = {"zeta0": state.zeta0}
    for j, v in enumerate(state.velocity):
        fields[f"V{j}"] = v
    if state.psi0 is not None:
        fields["psi0"] = state.psi0
    return fields


def _default_index(config: RunConfig) -> tuple[int, ...]:
    """Slow grid index used by single-point commands: sample_index, else the box centre."""
    n = config.nx
    i = n // 2 if config.sample_index is None else config.sample_index % n
    return (i,) * config.dim


# =============================================================================
# simulate
# =============================================================================

def run_simulate(config: RunConfig, out_dir: Path | None = None) -> RunResult:
    """Shallow-water run: diagnostics.csv, snapshot dumps and a drift summary."""
    out, run_log = _start("simulate", config, out_dir)
    state0 = config.initial_state()
    try:
        traj = simulate(state0, config.T, config.dt, config.alpha0, config.cfl, config.viscosity,
                        config.snapshot_every)
    except DepthError as e:
        partial = getattr(e, "trajectory", None)
        if partial is not None:
            write_csv(out / "diagnostics.csv", [d.as_row() for d in partial.diagnostics])
        raise

    files = [write_csv(out / "diagnostics.csv", [d.as_row() for d in traj.diagnostics])]
    for i, state in enumerate(traj.states):
        files.append(write_fields(out / "snapshots" / f"state_{i:04d}.shom", list(_surface_fields(state).values())))
    first, last = traj.diagnostics[0], traj.diagnostics[-1]
    summary = {
        "snapshots": len(traj.states),
        "final_time": traj.last_valid_time,
        "truncated": traj.truncated,
        "mass_drift": abs(last.mass - first.mass),
        "energy_drift": abs(last.energy - first.energy) / max(abs(first.energy), 1e-300),
        "min_depth": min(d.min_depth for d in traj.diagnostics),
    }
    if traj.truncated:
        summary["reason"] = traj.reason
    return _finish("simulate", out, run_log, summary, files)


# =============================================================================
# corrector / stationary
# =============================================================================

def _point_data(surface: SurfaceState, index: tuple[int, ...]) -> tuple[float, np.ndarray]:
    h0 = float(surface.depth.values[index])
    return h0, surface.velocity_at(index)


def run_corrector(config: RunConfig, out_dir: Path | None = None) -> RunResult:
    """
    Fast-time corrector evolution over [0, tau] with the surface frozen at t = 0.

    Writes the per-mode history at one slow point (mode_history.csv) and the
    energy against its Duhamel bound.
    """
    out, run_log = _start("corrector", config, out_dir)
    surface = config.initial_state()
    b = config.bottom_profile()
    guard = config.guard()
    index = _default_index(config)
    h0, V0 = _point_data(surface, index)

    if config.corrector_init == "stationary":
        zeta1, psi1 = stationary(h0, V0, b, guard)
        field0 = stationary_field(surface, b, guard)
    else:
        zeta1 = psi1 = TorusSpectrum.zeros(b.dim, b.cutoff)
        field0 = CorrectorState.zeros(surface.grid, b.cutoff)

    taus = np.linspace(0.0, config.tau, config.tau_samples)
    history = mode_history(zeta1, psi1, h0, V0, b, taus, config.energy_r)
    files = [write_csv(out / "mode_history.csv", history.to_rows())]

    f = forcing(h0, V0, b)
    bound = energy_bound(zeta1, psi1, f, config.tau, config.energy_r, h0)
    final = evolve(field0, surface, b, config.tau)
    final_point = final.at(index)
    summary = {
        "index": index,
        "h0": h0,
        "V0": tuple(float(v) for v in V0),
        "init": config.corrector_init,
        "modes": len(history.modes),
        "energy_initial": float(history.energy[0]),
        "energy_final": energy_norm(*final_point, config.energy_r, h0),
        "energy_bound": float(np.sqrt(bound)),
        "max_abs_zeta1": final.zeta1.max_abs_coeff(),
        "max_abs_psi1": final.psi1.max_abs_coeff(),
    }
    run_log.log("corrector", {"energy_final": summary["energy_final"], "energy_bound": summary["energy_bound"]})
    return _finish("corrector", out, run_log, summary, files)


def _stationary_rows(field0: CorrectorState, b: BottomProfile) -> list[dict]:
    grid = field0.grid
    coords = [c.reshape(-1) for c in grid.coordinates]
    half = [k for k in b.modes if k > tuple(-kj for kj in k)]
    rows = []
    for flat in range(grid.size):
        index = np.unravel_index(flat, grid.shape)
        zeta1, psi1 = field0.at(index)
        for k in half:
            z, p = zeta1.coeff(k), psi1.coeff(k)
            row = {f"x{j}": float(c[flat]) for j, c in enumerate(coords)}
            row["k"] = " ".join(str(kj) for kj in k)
            row.update({"zeta1_re": z.real, "zeta1_im": z.imag, "psi1_re": p.real, "psi1_im": p.imag})
            rows.append(row)
    return rows


def run_stationary(config: RunConfig, out_dir: Path | None = None) -> RunResult:
    """
    Locally stationary corrector over the slow grid (stationary.csv), and the
    Ansatz realized at mu on a grid resolving the fast period (ansatz.shom).

    Raises:
        ResonanceError: the guard fails somewhere on the slow grid.
    """
    out, run_log = _start("stationary", config, out_dir)
    surface = config.initial_state()
    b = config.bottom_profile()
    field0 = stationary_field(surface, b, config.guard())
    files = [write_csv(out / "stationary.csv", _stationary_rows(field0, b))]

    summary = {
        "max_abs_zeta1": field0.zeta1.max_abs_coeff(),
        "max_abs_psi1": field0.psi1.max_abs_coeff(),
    }
    if surface.psi0 is not None:
        nx = fine_points(config.box_length, config.gamma, config.oracle_cells_per_wavelength, config.nx)
        fine = resample_state(surface, nx)
        ansatz = build_ansatz(fine, stationary_field(fine, b, config.guard()), config.mu)
        files.append(write_fields(out / "ansatz.shom", [ansatz.zeta_a, ansatz.psi_a]))
        summary.update({"ansatz_nx": nx, "max_abs_zeta_a": ansatz.zeta_a.max_abs()})
    return _finish("stationary", out, run_log, summary, files)


# =============================================================================
# resonance-scan
# =============================================================================

def run_resonance_scan(config: RunConfig, out_dir: Path | None = None) -> RunResult:
    """Flag list (resonance.csv), local Froude number dump and the sampled flagged fraction."""
    out, run_log = _start("resonance-scan", config, out_dir)
    surface = config.initial_state()
    b = config.bottom_profile()
    guard = config.guard()
    report = certify(surface, b, guard)

    columns = [f"x{j}" for j in range(config.dim)] + [f"k{j}" for j in range(config.dim)] + ["margin", "threshold"]
    files = [
        write_csv(out / "resonance.csv", report.to_rows(), columns),
        write_fields(out / "froude.shom", [report.froude]),
        write_csv(out / "froude.csv", field_rows({"froude2": report.froude})),
    ]
    fraction = resonant_fraction(b, guard, config.resonance_samples, seed=config.seed)
    summary = {
        "certified": report.certified,
        "flags": len(report.flags),
        "flagged_points": len(report.flagged_indices()),
        "modes_checked": report.modes_checked,
        "max_froude2": report.froude.max_abs(),
        "sampled_flagged_fraction": fraction,
    }
    if report.window is not None:
        summary["froude2_window"] = report.window
    run_log.log("resonance", {"certified": report.certified, "flags": len(report.flags)})
    return _finish("resonance-scan", out, run_log, summary, files)


# =============================================================================
# cell-verify
# =============================================================================

def run_cell_verify(config: RunConfig, out_dir: Path | None = None) -> RunResult:
    """
    Closed-form cell solution against the finite-difference oracle on Ny = Nz grids.

    The fast trace psi1 is taken equal to the bottom profile.
    """
    out, run_log = _start("cell-verify", config, out_dir)
    b = config.bottom_profile()
    psi1 = b.spectrum
    rows = []
    for n in config.cell_ny:
        exact = solve_cell(config.cell_h0, psi1, b, config.cell_gradpsi0, nz=n)
        oracle = oracle_cell_solve(config.cell_h0, psi1, b, config.cell_gradpsi0, ny=n, nz=n)
        error = relative_l2_error(oracle, exact)
        rows.append({"ny": n, "nz": n, "rel_error": error})
        logger.info(f"[CELL] ny=nz={n}: relative error {error:.3e}")

    files = [write_csv(out / "cell_verify.csv", rows)]
    ratios = [
        coarse["rel_error"] / finer["rel_error"]
        for coarse, finer in zip(rows, rows[1:])
        if finer["rel_error"] > 0
    ]
    summary = {
        "h0": config.cell_h0,
        "errors": [r["rel_error"] for r in rows],
        "ratios": ratios,
    }
    if ratios:
        summary["observed_order"] = float(np.log2(ratios[-1]))
    return _finish("cell-verify", out, run_log, summary, files)


# =============================================================================
# consistency
# =============================================================================

def run_consistency(config: RunConfig, out_dir: Path | None = None, flat_control: bool = False) -> RunResult:
    """
    Residual rate study over config.mu_list (consistency.csv) with fitted slopes.

    The result carries the acceptance failures; the caller decides the exit code.
    """
    out, run_log = _start("consistency", config, out_dir)
    study = rate_study(config, flat_control=flat_control, threads=config.threads)
    files = [write_csv(out / "consistency.csv", [r.to_row() for r in study.records])]
    summary = {
        "flat_control": flat_control,
        "mu": [r.mu for r in study.records],
        **{f"slope_{name}": value for name, value in study.slopes.items()},
        "passed": study.passed,
    }
    failures = study.failures()
    for message in failures:
        logger.warning(f"[RUN] acceptance: {message}")
    return _finish("consistency", out, run_log, summary, files, failures)


RUNNERS = {
    "simulate": run_simulate,
    "corrector": run_corrector,
    "stationary": run_stationary,
    "resonance-scan": run_resonance_scan,
    "cell-verify": run_cell_verify,
    "consistency": run_consistency,
}


def run_command(command: str, config: RunConfig, out_dir: Path | None = None, **options) -> RunResult:
    """
    Dispatch to the runner for `command`; failures are recorded in run.jsonl and re-raised.

    Raises:
        ValueError: unknown command.
        ShomError: whatever the runner raised.
    """
    try:
        runner = RUNNERS[command]
    except KeyError:
        raise ValueError(f"unknown command '{command}' (choose from {COMMANDS})") from None
    out = Path(out_dir or config.out_dir)
    try:
        return runner(config, out, **options)
    except ShomError as e:
        logger.error(f"[RUN] {command} failed: {e}")
        RunLogger(out).log_error(e)
        raise
