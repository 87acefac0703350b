import logging
import time
from dataclasses import dataclass

import numpy as np

from his_isac.conic import DEFAULT_MAX_ITER, DEFAULT_TOL
from his_isac.enums import OptimizationStatus
from his_isac.models import (
    BeamformerSet,
    ChannelSet,
    CovariancePack,
    IterationRecord,
    NoiseModel,
    OptimizationResult,
)
from his_isac.protos import SdpSolverProtocol
from his_isac.rx_beamform import matched_filters, receive_filters
from his_isac.sinr import comm_sinr
from his_isac.tx_beamform import (
    DEFAULT_EPS1,
    DEFAULT_GALLOP_AFTER,
    CountingSolver,
    TransmitOptimizer,
    extract_rank_one,
    factor_sensing_cov,
)

logger = logging.getLogger(__name__)

DEFAULT_EPS2 = 0.01
DEFAULT_MAX_ITERS = 20

# Relative slack allowed before a drop in Gamma_r* counts as a loss of ascent.
ASCENT_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything the optimizer needs about one system configuration."""

    channel: ChannelSet
    noise: NoiseModel
    P_T: float  # A^2
    gamma_c: float  # linear


@dataclass(frozen=True, eq=False)
class _Round:
    beamformers: BeamformerSet
    covariances: CovariancePack
    gamma_r_star: float
    sense_sinrs: tuple[float, ...]
    comm_sinrs: tuple[float, ...]


def _run_round(
    scenario: Scenario,
    Q: np.ndarray,
    start: float | None,
    known_pack: CovariancePack | None,
    solver: CountingSolver,
    eps1: float,
    tol: float,
    max_iter: int,
    gallop_after: int | None,
) -> tuple[_Round, int, int]:
    optimizer = TransmitOptimizer(
        scenario.channel,
        Q,
        scenario.noise,
        scenario.P_T,
        scenario.gamma_c,
        solver=solver,
        tol=tol,
        max_iter=max_iter,
        gallop_after=gallop_after,
    )
    bracket = optimizer.abs_bracket(start, known_pack)
    outcome = optimizer.bisect(bracket, eps1)

    W_c = extract_rank_one(outcome.pack, scenario.channel)
    W_r = factor_sensing_cov(outcome.pack, W_c)
    W = np.hstack([W_c, W_r])
    Q_next, sinrs = receive_filters(W, scenario.channel, scenario.noise)
    beamformers = BeamformerSet(W=W, Q=Q_next, num_users=scenario.channel.K)
    state = _Round(
        beamformers=beamformers,
        covariances=outcome.pack,
        gamma_r_star=min(sinrs),
        sense_sinrs=sinrs,
        comm_sinrs=tuple(
            comm_sinr(beamformers, scenario.channel, scenario.noise, k)
            for k in range(scenario.channel.K)
        ),
    )
    return state, bracket.solves, outcome.solves


def optimize(
    scenario: Scenario,
    eps1: float = DEFAULT_EPS1,
    eps2: float = DEFAULT_EPS2,
    max_iters: int = DEFAULT_MAX_ITERS,
    solver: SdpSolverProtocol | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    gallop_after: int | None = DEFAULT_GALLOP_AFTER,
) -> OptimizationResult:
    """
    Alternates transmit bisection and receive-filter updates.

    Each round brackets and bisects the transmit subproblem for the current
    filters, rebuilds W = [W_c | W_r] from the covariances, then re-solves every
    receive filter. The first round starts from matched filters and the ABS
    start level; later rounds start the bracket at the previous Gamma_r*. A
    round that lowers Gamma_r* is discarded and the run ends with status
    ASCENT_LOST.

    Args:
        scenario: Channels, noise, power budget and user SINR target.
        eps1: Bisection resolution (linear SINR).
        eps2: Stop once Gamma_r* changes by less than this between rounds.
        max_iters: Cap on outer rounds.
        solver: SDP back end; cvxopt when omitted.
        tol: SDP tolerance.
        max_iter: SDP iteration cap.
        gallop_after: Step-doubling period of the bracket search (None disables).

    Raises:
        InfeasibleScenarioError: If the user constraints cannot be met.
        SolverFailureError: If not even the zero sensing level can be solved.
    """
    if not eps1 > 0:
        raise ValueError(f"eps1 {eps1} not in range (0, inf)")
    if not eps2 > 0:
        raise ValueError(f"eps2 {eps2} not in range (0, inf)")
    if max_iters < 1:
        raise ValueError(f"max_iters {max_iters} not in range [1, inf)")

    counting = solver if isinstance(solver, CountingSolver) else CountingSolver(solver)
    Q = matched_filters(scenario.channel)
    start = None
    known_pack = None
    best: _Round | None = None
    trace: list[IterationRecord] = []
    status = OptimizationStatus.MAX_ITER

    for iteration in range(1, max_iters + 1):
        began = time.perf_counter()
        calls_before = counting.calls
        state, abs_calls, bisection_calls = _run_round(
            scenario, Q, start, known_pack, counting, eps1, tol, max_iter, gallop_after
        )
        elapsed = time.perf_counter() - began

        if best is not None and state.gamma_r_star < best.gamma_r_star * (1 - ASCENT_RTOL):
            logger.warning(
                f"Round {iteration} lowered Gamma_r* from {best.gamma_r_star:.6g} to "
                f"{state.gamma_r_star:.6g}; keeping the previous beamformers"
            )
            status = OptimizationStatus.ASCENT_LOST
            break

        trace.append(
            IterationRecord(
                iteration=iteration,
                gamma_r_star=state.gamma_r_star,
                sdp_calls=counting.calls - calls_before,
                abs_calls=abs_calls,
                bisection_calls=bisection_calls,
                wall_time=elapsed,
                min_comm_sinr=min(state.comm_sinrs) if state.comm_sinrs else None,
            )
        )
        logger.info(
            f"Round {iteration}: Gamma_r*={state.gamma_r_star:.6g} "
            f"({counting.calls - calls_before} SDP solve(s), {elapsed:.2f} s)"
        )

        previous = best
        best = state
        if previous is not None and abs(state.gamma_r_star - previous.gamma_r_star) < eps2:
            status = OptimizationStatus.CONVERGED
            break
        Q = state.beamformers.Q
        start = state.gamma_r_star if state.gamma_r_star > 0 else None
        known_pack = state.covariances if start is not None else None

    return OptimizationResult(
        beamformers=best.beamformers,
        covariances=best.covariances,
        gamma_r_star=best.gamma_r_star,
        iteration_trace=tuple(trace),
        status=status,
        sense_sinrs=best.sense_sinrs,
        comm_sinrs=best.comm_sinrs,
    )
