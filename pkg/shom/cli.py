"""
shom - CLI Interface

Rich terminal front end for the experiment runners in shom.core.

    shom simulate --config run.yaml --out runs/sw
    shom consistency --mu-override 0.04,0.02,0.01 --threads 4
"""

import argparse
import dataclasses
import logging
import sys

import scipy.fft as sp_fft
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from shom.core import COMMANDS, RunResult, run_command
from shom.errors import ConfigError, ShomError
from shom.run_config import RunConfig, check_commensurability, load_config, validate_run_config

logger = logging.getLogger(__name__)

# Global console for the CLI
console = Console()


# ============================================================================
# Styled Output
# ============================================================================

def print_summary(result: RunResult) -> None:
    """Key=value summary of a finished run in a table."""
    table = Table(show_header=False, box=None, padding=(0, 1))
    table.add_column(style="cyan")
    table.add_column()
    for key, value in result.summary.items():
        table.add_row(key, _format(value))
    style = "green" if result.passed else "red"
    console.print(Panel(table, title=f"[{style}]{result.command}[/{style}]", border_style=style, padding=(0, 1)))
    console.print(f"[dim]─── outputs in {result.out_dir} ───[/dim]")


def print_failures(failures: list[str]) -> None:
    console.print(Panel(
        "\n".join(failures),
        title="[red]Acceptance failed[/red]",
        border_style="red",
        padding=(0, 1),
    ))


def print_error(error: Exception) -> None:
    console.print(Panel(
        str(error),
        title=f"[red]{type(error).__name__}[/red]",
        border_style="red",
        padding=(0, 1),
    ))


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    return str(value)


# ============================================================================
# Arguments
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shom",
        description="Shallow-water homogenization over rough periodic bottoms",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")
    common.add_argument("--threads", type=int, metavar="N", help="FFT and sweep worker threads")
    common.add_argument(
        "--mu-override",
        metavar="MU[,MU...]",
        help="one mu replaces mu; several replace the consistency sweep",
    )
    common.add_argument("--seed", type=int, help="seed for randomized presets")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "consistency":
            p.add_argument("--flat-control", action="store_true", help="sweep with a flat bottom")
    return parser


def _parse_mu(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--mu-override expects comma-separated numbers, got '{text}'") from None
    if not values or any(v <= 0 for v in values):
        raise ConfigError(f"--mu-override values must be positive, got '{text}'")
    return values


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """
    Fold command-line flags into the configuration and re-validate it.

    Raises:
        ConfigError: an override breaks a rule (commensurability included).
    """
    changes = {}
    if args.out:
        changes["out_dir"] = args.out
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mu_override:
        mus = _parse_mu(args.mu_override)
        if len(mus) == 1:
            changes["mu"] = mus[0]
        else:
            changes["mu_list"] = mus
    if not changes:
        return config
    config = dataclasses.replace(config, **changes)
    problems = validate_run_config(config)
    if problems:
        raise ConfigError(problems[0])
    if "mu" in changes:
        check_commensurability(config)
    return config


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=verbose, show_path=verbose)],
        force=True,
    )


# ============================================================================
# Entry Point
# ============================================================================

def run(argv: list[str] | None = None) -> int:
    """Parse arguments, run one command, and return the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = apply_overrides(load_config(args.config), args)
        options = {"flat_control": args.flat_control} if args.command == "consistency" else {}
        with sp_fft.set_workers(config.threads):
            result = run_command(args.command, config, **options)
    except ShomError as e:
        print_error(e)
        return e.exit_code
    except OSError as e:
        logger.error(f"[RUN] {e}")
        print_error(e)
        return 1

    print_summary(result)
    if not result.passed:
        print_failures(result.failures)
        return 1
    return 0


def main():
    """Entry point for the shom console script."""
    sys.exit(run())


if __name__ == "__main__":
    main()
