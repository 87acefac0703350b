import functools
import logging
import platform
import sys
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import click
import numpy as np

from his_isac.em_core import project_noise_samples, truncation_grid
from his_isac.enums import BeampatternNormalization, SweepVariable
from his_isac.errors import HisIsacError
from his_isac.reports import emit_reports, write_cuts
from his_isac.scenario_config import (
    ScenarioConfig,
    dump_scenario,
    load_default_scenario,
    load_scenario,
)
from his_isac.sweep import DEFAULT_PSI_STEP_DEG, PointResult, SweepSpec, run_sweep, solve_scenario
from his_isac.utils import linear_to_db
from his_isac_cli.param_type_angle import POLAR_ANGLE
from his_isac_cli.param_type_grid import GRID

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)
logging.getLogger("his_isac").setLevel(logging.INFO)

NOISE_OFF_DIAGONAL_TOL = 0.05
NOISE_DIAGONAL_TOL = 0.05


@click.group()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Scenario file (the shipped default scenario when omitted)",
)
@click.option(
    "--out",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    default=Path("results"),
    show_default=True,
    help="Directory for report files",
)
@click.option("--seed", type=int, help="Override the scenario seed")
@click.option("--eps1", type=click.FloatRange(min=0, min_open=True), help="Bisection tolerance")
@click.option(
    "--eps2", type=click.FloatRange(min=0, min_open=True), help="Outer-loop tolerance"
)
@click.option(
    "--tol-sdp", type=click.FloatRange(min=0, min_open=True), help="SDP solver tolerance"
)
@click.option("--verbose", "-v", is_flag=True, help="Log every solver probe")
@click.pass_context
def cli(ctx, config_path, out, seed, eps1, eps2, tol_sdp, verbose):
    """Joint transmit/receive beamforming for holographic ISAC surfaces"""
    if verbose:
        logging.getLogger("his_isac").setLevel(logging.DEBUG)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["out"] = out
    ctx.obj["overrides"] = {"seed": seed, "eps1": eps1, "eps2": eps2, "tol": tol_sdp}


def _load_config(config_path: Path | None, overrides: dict) -> ScenarioConfig:
    config = load_scenario(config_path) if config_path else load_default_scenario()
    solver_changes = {
        key: overrides[key] for key in ("eps1", "eps2", "tol") if overrides[key] is not None
    }
    if solver_changes:
        config = replace(config, solver=replace(config.solver, **solver_changes))
    if overrides["seed"] is not None:
        config = replace(config, seed=overrides["seed"])
    return config


def with_scenario(func):
    """Loads the scenario for a command and turns domain errors into exit code 1."""

    @click.pass_context
    @functools.wraps(func)
    def wrapper(ctx, *args, **kwargs):
        try:
            config = _load_config(ctx.obj["config_path"], ctx.obj["overrides"])
            return func(config, ctx.obj["out"], *args, **kwargs)
        except (HisIsacError, ValueError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(1)

    return wrapper


def _echo_point(point: PointResult):
    his = point.his
    click.echo(f"min sensing SINR: {linear_to_db(his.min_sense_sinr):.3f} dB ({his.status.value})")
    for l, sinr in enumerate(his.sense_sinrs):
        click.echo(f"  target {l + 1} sensing SINR: {linear_to_db(sinr):.3f} dB")
    for k, sinr in enumerate(his.comm_sinrs):
        click.echo(f"  user {k + 1} comm SINR: {linear_to_db(sinr):.3f} dB")
    click.echo(f"  outer iterations: {len(his.trace)}, SDP solves: {his.sdp_calls}")
    if point.gains is not None:
        click.echo(f"gain over discrete array: {point.gains.min_sense_sinr_db:.3f} dB sensing")
        click.echo(f"  transmit peak gain: {point.gains.tx_peak_db:.3f} dB")


@cli.command()
def about():
    """Show package versions and high-level system information."""
    packages = ["his-isac", "numpy", "scipy", "cvxopt", "pandas", "PyYAML", "joblib", "click"]

    for package in packages:
        try:
            pkg_version = version(package)
            click.echo(f"{package} version: {pkg_version}")
        except PackageNotFoundError:
            click.echo(f"{package} version: not available")

    click.echo(f"python: {sys.version.split()[0]} ({platform.python_implementation()})")
    click.echo(f"architecture: {platform.machine()}")
    click.echo(f"platform: {platform.platform()}")


@cli.command()
@click.argument("path", type=click.Path(dir_okay=False, path_type=Path))
@with_scenario
def init_scenario(config: ScenarioConfig, out: Path, path: Path):
    """Write the active scenario to PATH with every default spelled out."""
    dump_scenario(config, path)
    click.echo(f"Wrote scenario to {path}", err=True)


@cli.command()
@click.option("--baseline", is_flag=True, help="Also solve the discrete half-wavelength array")
@with_scenario
def solve(config: ScenarioConfig, out: Path, baseline: bool):
    """Optimize the scenario once and write all reports."""
    bundle = solve_scenario(config, include_baseline=baseline)
    _echo_point(bundle.points[0])
    for path in emit_reports(bundle, out):
        click.echo(f"Wrote {path}", err=True)


@cli.command()
@click.option(
    "--var",
    "variable",
    required=True,
    type=click.Choice([v.value for v in SweepVariable]),
    help="Scenario parameter to sweep",
)
@click.option("--grid", required=True, type=GRID, help="Values, e.g. '0,4,8' or '0:24:4'")
@click.option("--baseline", is_flag=True, help="Also solve the discrete half-wavelength array")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@with_scenario
def sweep(
    config: ScenarioConfig,
    out: Path,
    variable: str,
    grid: tuple[float, ...],
    baseline: bool,
    workers: int,
):
    """Solve the scenario over a grid of one parameter."""
    spec = SweepSpec(variable=SweepVariable(variable), grid=grid)
    bundle = run_sweep(config, spec, include_baseline=baseline, workers=workers)
    for point in bundle.points:
        if point.ok:
            line = f"{variable}={point.value:g}: {linear_to_db(point.his.min_sense_sinr):.3f} dB"
            if point.gains is not None:
                line += f" (gain {point.gains.min_sense_sinr_db:.3f} dB)"
        else:
            line = f"{variable}={point.value:g}: failed ({point.error})"
        click.echo(line)
    for path in emit_reports(bundle, out):
        click.echo(f"Wrote {path}", err=True)
    if not bundle.ok:
        click.echo(f"Error: {len(bundle.failed)} sweep point(s) failed", err=True)
        sys.exit(1)


@cli.command()
@click.option("--theta-cut", type=POLAR_ANGLE, help="Polar angle of the cut (first target's)")
@click.option(
    "--psi-step",
    type=click.FloatRange(min=0, max=180, min_open=True),
    default=DEFAULT_PSI_STEP_DEG,
    show_default=True,
    help="Azimuth resolution in degrees",
)
@click.option(
    "--normalization",
    type=click.Choice(
        [BeampatternNormalization.PEAK.value, BeampatternNormalization.NONE.value]
    ),
    default=BeampatternNormalization.PEAK.value,
    show_default=True,
    help="peak: HIS peak at 0 dB (discrete cuts share that scale); none: absolute power",
)
@click.option("--baseline", is_flag=True, help="Add the discrete array's cuts")
@with_scenario
def beampattern(
    config: ScenarioConfig,
    out: Path,
    theta_cut: float | None,
    psi_step: float,
    normalization: str,
    baseline: bool,
):
    """Write transmit and receive beampattern cuts along psi."""
    bundle = solve_scenario(
        config,
        include_baseline=baseline,
        theta_cut_deg=theta_cut,
        psi_step_deg=psi_step,
        normalization=BeampatternNormalization(normalization),
    )
    for name, cut in sorted(bundle.cuts.items()):
        psi, peak = max(cut, key=lambda row: row[1])
        click.echo(f"{name}: peak {peak:.3f} dB at psi={psi:g} deg")
    for path in write_cuts(bundle, out):
        click.echo(f"Wrote {path}", err=True)


@cli.command()
@click.option("--samples", type=click.IntRange(min=1), default=100_000, show_default=True)
@with_scenario
def noise_check(config: ScenarioConfig, out: Path, samples: int):
    """Check that surface noise stays white after projection onto the Fourier basis."""
    aperture = config.aperture_spec()
    sigma_r_sq = config.noise.sigma_r_sq
    grid = truncation_grid(aperture)
    cov = project_noise_samples(grid, sigma_r_sq, samples, config.seed, aperture)

    off_diagonal = cov - np.diag(np.diag(cov))
    max_off = float(np.max(np.abs(off_diagonal))) / sigma_r_sq
    diagonal = np.real(np.diag(cov)) / sigma_r_sq
    click.echo(f"basis size N={grid.N}, samples={samples}, seed={config.seed}")
    click.echo(f"max |off-diagonal| / sigma_r^2: {max_off:.4f}")
    click.echo(f"diagonal / sigma_r^2: [{diagonal.min():.4f}, {diagonal.max():.4f}]")

    if max_off >= NOISE_OFF_DIAGONAL_TOL or np.max(np.abs(diagonal - 1.0)) >= NOISE_DIAGONAL_TOL:
        click.echo("Error: projected noise is not white within tolerance", err=True)
        sys.exit(1)
    click.echo("projected noise is white within tolerance")


def main():
    cli()


if __name__ == "__main__":
    main()
