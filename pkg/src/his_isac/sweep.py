"""Sweep orchestration over one scenario parameter.

Each grid point is solved independently (optionally in worker processes) on the
HIS surface and, when requested, on the discrete baseline array. Results keep
grid order whatever order the workers finish in.
"""

import logging
import math
import time
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from his_isac.ao_driver import optimize
from his_isac.discrete_baseline import DiscreteArray, GainReport, compare_gain
from his_isac.em_core import HisArray, build_channel_set
from his_isac.enums import (
    ArrayKind,
    BeampatternNormalization,
    BeampatternSide,
    OptimizationStatus,
    SweepVariable,
)
from his_isac.errors import HisIsacError
from his_isac.models import ApertureSpec, FarFieldPoint, IterationRecord, SolvedRun
from his_isac.scenario_config import ScenarioConfig
from his_isac.sinr import all_sinrs, beampattern_cut, beampattern_power
from his_isac.utils import linear_to_db

logger = logging.getLogger(__name__)

DEFAULT_PSI_STEP_DEG = 0.5

Cut = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class SweepSpec:
    """
    A parameter and the values it takes.

    overrides is either empty or holds one mapping per grid value; each mapping
    is merged into the scenario document before the swept value is applied.
    """

    variable: SweepVariable
    grid: tuple[float, ...]
    overrides: tuple[Mapping[str, Any], ...] = ()

    def __post_init__(self):
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ValueError("sweep grid must not be empty")
        steps = np.diff(grid)
        if len(grid) > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError(f"sweep grid {list(grid)} is not strictly monotone")
        if self.overrides and len(self.overrides) != len(grid):
            raise ValueError(
                f"{len(self.overrides)} override(s) given for {len(grid)} grid value(s)"
            )
        if self.variable is SweepVariable.MAX_ORDER and any(
            v < 0 or not float(v).is_integer() for v in grid
        ):
            raise ValueError("max_order sweep values must be nonnegative integers")
        if self.variable is SweepVariable.A_T and any(v <= 0 for v in grid):
            raise ValueError("aperture sizes must be positive")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class RunSummary:
    """Metrics of one optimized array, evaluated on the (possibly perturbed) channels."""

    array: ArrayKind
    dimension: int
    status: OptimizationStatus
    gamma_r_star: float
    sense_sinrs: tuple[float, ...]
    comm_sinrs: tuple[float, ...]
    trace: tuple[IterationRecord, ...]

    @property
    def min_sense_sinr(self) -> float:
        return min(self.sense_sinrs)

    @property
    def sdp_calls(self) -> int:
        return sum(record.sdp_calls for record in self.trace)


@dataclass(frozen=True)
class PointResult:
    index: int
    value: float | None
    config: ScenarioConfig
    his: RunSummary | None = None
    discrete: RunSummary | None = None
    gains: GainReport | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ReportBundle:
    config: ScenarioConfig
    points: tuple[PointResult, ...]
    sweep: SweepSpec | None = None
    include_baseline: bool = False
    cuts: Mapping[str, Cut] = field(default_factory=dict)

    @property
    def failed(self) -> list[PointResult]:
        return [p for p in self.points if not p.ok]

    @property
    def ok(self) -> bool:
        return not self.failed


def _merge(base: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _merge(dict(merged[key]), value)
        else:
            merged[key] = value
    return merged


def apply_sweep_value(
    config: ScenarioConfig, variable: SweepVariable, value: float
) -> ScenarioConfig:
    """
    Returns the config with the swept parameter set to value.

    A_T keeps the aperture square and lets the truncation grid follow the new
    size. delta_theta leaves the config unchanged; the perturbation is applied
    when the solution is evaluated.
    """
    match variable:
        case SweepVariable.P_T:
            return replace(config, P_T_mA2=value)
        case SweepVariable.A_T:
            side = math.sqrt(value)
            return replace(config, aperture=replace(config.aperture, Lx=side, Ly=side))
        case SweepVariable.GAMMA_C:
            return replace(config, Gamma_c_dB=value)
        case SweepVariable.DELTA_THETA:
            return config
        case SweepVariable.MAX_ORDER:
            order = int(value)
            return replace(config, aperture=replace(config.aperture, max_order=(order, order)))
        case _:
            raise ValueError(f"Unexpected sweep variable: {variable}")


def point_config(config: ScenarioConfig, sweep: SweepSpec, index: int) -> ScenarioConfig:
    if sweep.overrides:
        config = ScenarioConfig.from_dict(_merge(config.to_dict(), sweep.overrides[index]))
    return apply_sweep_value(config, sweep.variable, sweep.grid[index])


def _array_for(kind: ArrayKind, aperture: ApertureSpec):
    match kind:
        case ArrayKind.HIS:
            return HisArray(aperture)
        case ArrayKind.DISCRETE:
            return DiscreteArray.from_aperture(aperture)
        case _:
            raise ValueError(f"Unexpected array kind: {kind}")


def solve_run(config: ScenarioConfig, kind: ArrayKind = ArrayKind.HIS) -> SolvedRun:
    """Optimizes the scenario on one array model."""
    array = _array_for(kind, config.aperture_spec())
    scenario = config.build_scenario(array)
    solver = config.solver
    result = optimize(
        scenario,
        eps1=solver.eps1,
        eps2=solver.eps2,
        max_iters=solver.max_iters,
        tol=solver.tol,
        max_iter=solver.max_iter,
        gallop_after=solver.gallop_after,
    )
    return SolvedRun(
        array=array,
        users=config.user_points(),
        targets=config.target_points(),
        noise=scenario.noise,
        P_T=scenario.P_T,
        gamma_c=scenario.gamma_c,
        result=result,
    )


def evaluate_with_mismatch(
    run: SolvedRun, delta_theta_deg: float
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """
    SINRs of the optimized beamformers when user 1 actually sits delta_theta
    degrees further from broadside than assumed. Targets keep perfect CSI.

    Returns:
        (per-user comm SINRs, per-target sense SINRs).

    Raises:
        ValueError: If the perturbed angle leaves [0, 90) degrees.
    """
    beamformers = run.result.beamformers
    users = list(run.users)
    if users and delta_theta_deg != 0.0:
        users[0] = users[0].with_theta(users[0].theta + math.radians(delta_theta_deg))
    channel = build_channel_set(run.array, users, run.targets)
    return all_sinrs(beamformers, beamformers.Q, channel, run.noise)


def summarize(run: SolvedRun, kind: ArrayKind, delta_theta_deg: float = 0.0) -> RunSummary:
    result = run.result
    if delta_theta_deg:
        comm, sense = evaluate_with_mismatch(run, delta_theta_deg)
    else:
        comm, sense = result.comm_sinrs, result.sense_sinrs
    return RunSummary(
        array=kind,
        dimension=run.array.dimension,
        status=result.status,
        gamma_r_star=result.gamma_r_star,
        sense_sinrs=tuple(sense),
        comm_sinrs=tuple(comm),
        trace=result.iteration_trace,
    )


def _solve_runs(config: ScenarioConfig, include_baseline: bool) -> dict[ArrayKind, SolvedRun]:
    runs = {ArrayKind.HIS: solve_run(config, ArrayKind.HIS)}
    if include_baseline:
        runs[ArrayKind.DISCRETE] = solve_run(config, ArrayKind.DISCRETE)
    return runs


def _point_from_runs(
    index: int,
    value: float | None,
    config: ScenarioConfig,
    runs: Mapping[ArrayKind, SolvedRun],
    delta_theta_deg: float = 0.0,
) -> PointResult:
    his = runs[ArrayKind.HIS]
    discrete = runs.get(ArrayKind.DISCRETE)
    his_summary = summarize(his, ArrayKind.HIS, delta_theta_deg)
    if discrete is None:
        return PointResult(index=index, value=value, config=config, his=his_summary)

    discrete_summary = summarize(discrete, ArrayKind.DISCRETE, delta_theta_deg)
    gains = compare_gain(his, discrete)
    if delta_theta_deg:
        gains = replace(
            gains,
            min_sense_sinr_db=linear_to_db(his_summary.min_sense_sinr)
            - linear_to_db(discrete_summary.min_sense_sinr),
            comm_sinr_db=tuple(
                linear_to_db(a) - linear_to_db(b)
                for a, b in zip(his_summary.comm_sinrs, discrete_summary.comm_sinrs, strict=True)
            ),
        )
    return PointResult(
        index=index,
        value=value,
        config=config,
        his=his_summary,
        discrete=discrete_summary,
        gains=gains,
    )


def _failed(index: int, value: float | None, config: ScenarioConfig, e: Exception) -> PointResult:
    if isinstance(e, HisIsacError | ValueError):
        logger.warning(f"Sweep point {index} ({value}) failed: {e}")
    else:
        logger.error(f"Sweep point {index} ({value}) aborted: {e!r}")
    return PointResult(index=index, value=value, config=config, error=str(e) or repr(e))


def _solve_point(task: tuple[int, float, ScenarioConfig, bool]) -> PointResult:
    index, value, config, include_baseline = task
    began = time.perf_counter()
    try:
        runs = _solve_runs(config, include_baseline)
        result = _point_from_runs(index, value, config, runs)
    except Exception as e:
        return _failed(index, value, config, e)
    logger.info(
        f"Sweep point {index} ({value}) solved in {time.perf_counter() - began:.2f} s: "
        f"min sensing SINR {linear_to_db(result.his.min_sense_sinr):.3f} dB"
    )
    return result


def _delta_theta_points(
    config: ScenarioConfig, sweep: SweepSpec, include_baseline: bool
) -> list[PointResult]:
    configs = [point_config(config, sweep, i) for i in range(len(sweep.grid))]
    nominal: dict[ScenarioConfig, dict[ArrayKind, SolvedRun] | Exception] = {}
    points = []
    for index, (value, cfg) in enumerate(zip(sweep.grid, configs, strict=True)):
        if cfg not in nominal:
            try:
                nominal[cfg] = _solve_runs(cfg, include_baseline)
            except Exception as e:
                nominal[cfg] = e
        runs = nominal[cfg]
        if isinstance(runs, Exception):
            points.append(_failed(index, value, cfg, runs))
            continue
        try:
            points.append(_point_from_runs(index, value, cfg, runs, delta_theta_deg=value))
        except Exception as e:
            points.append(_failed(index, value, cfg, e))
    return points


def run_sweep(
    config: ScenarioConfig,
    sweep: SweepSpec,
    include_baseline: bool = False,
    workers: int = 1,
) -> ReportBundle:
    """
    Solves every grid point and gathers the results in grid order.

    A failing point is recorded with its error message and the sweep goes on.
    delta_theta sweeps optimize once at the nominal angles and only re-evaluate
    the SINRs at each perturbed angle.

    Args:
        config: Base scenario.
        sweep: Variable, grid and optional per-point overrides.
        include_baseline: Also solve the discrete array and report the gains.
        workers: Process count; 1 runs every point in this process.
    """
    if workers < 1:
        raise ValueError(f"workers {workers} not in range [1, inf)")
    logger.info(
        f"Sweeping {sweep.variable.value} over {len(sweep.grid)} point(s) with {workers} worker(s)"
    )

    if sweep.variable is SweepVariable.DELTA_THETA:
        points = _delta_theta_points(config, sweep, include_baseline)
    else:
        points: list[PointResult | None] = [None] * len(sweep.grid)
        tasks = []
        for index, value in enumerate(sweep.grid):
            try:
                tasks.append((index, value, point_config(config, sweep, index), include_baseline))
            except (HisIsacError, ValueError) as e:
                points[index] = _failed(index, value, config, e)
        if workers > 1 and len(tasks) > 1:
            solved = Parallel(n_jobs=workers)(delayed(_solve_point)(task) for task in tasks)
        else:
            solved = [_solve_point(task) for task in tasks]
        for result in solved:
            points[result.index] = result

    bundle = ReportBundle(
        config=config,
        points=tuple(points),
        sweep=sweep,
        include_baseline=include_baseline,
    )
    if bundle.failed:
        logger.warning(f"{len(bundle.failed)} of {len(points)} sweep point(s) failed")
    return bundle


def psi_grid(step_deg: float = DEFAULT_PSI_STEP_DEG) -> list[float]:
    if not 0 < step_deg <= 180:
        raise ValueError(f"psi step {step_deg} not in range (0, 180]")
    count = int(round(360.0 / step_deg))
    return [i * 360.0 / count for i in range(count)]


def beampattern_cuts(
    his_run: SolvedRun,
    discrete_run: SolvedRun | None = None,
    theta_deg: float | None = None,
    psi_step_deg: float = DEFAULT_PSI_STEP_DEG,
    normalization: BeampatternNormalization = BeampatternNormalization.PEAK,
) -> dict[str, Cut]:
    """
    Transmit cut and one receive cut per target along psi.

    The cut runs at theta_deg (the first target's polar angle by default) and at
    the first target's range. With a discrete run and PEAK normalization, the
    discrete cuts are referenced to the HIS peaks so the two patterns share one
    scale.

    Returns:
        Mapping from report name (beampattern_tx, beampattern_rx_target1, ...)
        to (psi_deg, power_db) rows.
    """
    anchor = his_run.targets[0]
    theta = math.degrees(anchor.theta) if theta_deg is None else theta_deg
    psis = psi_grid(psi_step_deg)

    def weights(run: SolvedRun) -> list[tuple[str, BeampatternSide, Any]]:
        beamformers = run.result.beamformers
        entries = [("beampattern_tx", BeampatternSide.TRANSMIT, beamformers.W)]
        for l in range(beamformers.Q.shape[1]):
            entries.append(
                (f"beampattern_rx_target{l + 1}", BeampatternSide.RECEIVE, beamformers.Q[:, l])
            )
        return entries

    cuts: dict[str, Cut] = {}
    peaks: dict[str, float] = {}
    for name, side, w in weights(his_run):
        cuts[name] = tuple(
            beampattern_cut(w, his_run.array, theta, psis, anchor.r, side, normalization)
        )
        points = [FarFieldPoint.from_degrees(theta, psi, anchor.r) for psi in psis]
        peaks[name] = float(np.max(beampattern_power(w, his_run.array, points, side)))

    if discrete_run is not None:
        for name, side, w in weights(discrete_run):
            match normalization:
                case BeampatternNormalization.PEAK if peaks[name] > 0:
                    mode, reference = BeampatternNormalization.REFERENCE, peaks[name]
                case _:
                    mode, reference = normalization, None
            cuts[f"{name}_discrete"] = tuple(
                beampattern_cut(
                    w, discrete_run.array, theta, psis, anchor.r, side, mode, reference
                )
            )
    return cuts


def solve_scenario(
    config: ScenarioConfig,
    include_baseline: bool = False,
    theta_cut_deg: float | None = None,
    psi_step_deg: float = DEFAULT_PSI_STEP_DEG,
    normalization: BeampatternNormalization = BeampatternNormalization.PEAK,
) -> ReportBundle:
    """
    Solves one scenario and computes its beampattern cuts.

    Raises:
        HisIsacError: If the optimization fails.
    """
    runs = _solve_runs(config, include_baseline)
    point = _point_from_runs(0, None, config, runs)
    cuts = beampattern_cuts(
        runs[ArrayKind.HIS],
        runs.get(ArrayKind.DISCRETE),
        theta_deg=theta_cut_deg,
        psi_step_deg=psi_step_deg,
        normalization=normalization,
    )
    return ReportBundle(
        config=config,
        points=(point,),
        include_baseline=include_baseline,
        cuts=cuts,
    )
