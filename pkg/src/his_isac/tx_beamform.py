"""Transmit-side optimization by SDR feasibility bisection.

For a fixed sensing level Gamma_r and receive filters Q, the subproblem

    max t  s.t.  tr(U_ll R) / Gamma_r - sum_{m != l} tr(U_lm R) - sigma_R^2 >= t   (targets)
                 (1 + 1/Gamma_c) tr(F_k R_k) - tr(F_k R) >= sigma_c^2 / (kappa Z0)^2 (users)
                 R, R_k >= 0,  R - sum R_k >= 0,  tr(R) <= P_T

certifies Gamma_r as achievable when t >= 0. The sensing row is the usual
(1 + 1/Gamma_r) tr(U_ll R) - sum_m tr(U_lm R) with the l-th term cancelled
analytically.

Every F_k = f_k f_k^H and U_lm = |g_m^H q_l|^2 g_m g_m^H lives in the span of the
channel vectors, so the subproblem is solved on d x d blocks (d <= K + M) in an
orthonormal basis of that span and lifted back. This is exact: projecting any
feasible point onto the span keeps every constraint value and cannot raise tr(R).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from his_isac.conic import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    CvxoptSolver,
    LinearConstraint,
    PsdCoupling,
    SdpProblem,
    SdpSolution,
    TraceBudget,
    TraceTerm,
)
from his_isac.enums import SolverStatus
from his_isac.errors import (
    DegenerateUserError,
    IndefiniteResidualError,
    InfeasibleScenarioError,
    SolverFailureError,
)
from his_isac.models import BisectionBracket, ChannelSet, CovariancePack, NoiseModel
from his_isac.protos import SdpSolverProtocol
from his_isac.utils import hermitian_part

logger = logging.getLogger(__name__)

DEFAULT_EPS1 = 0.01
DEFAULT_GALLOP_AFTER = 4
MAX_BRACKET_STEPS = 1000

# A max_iter iterate is used only if its residuals are this small.
ACCEPTABLE_RESIDUAL = 1e-5
# A failed probe is solved once more with the tolerance loosened by this factor.
RETRY_TOL_FACTOR = 100.0
# Bracket starts stay this fraction below the noise-free inter-target limit.
CAP_MARGIN = 0.999
# Relative tolerance for the cone check on lifted covariances.
PROJECTION_RTOL = 1e-8

RANK_TOL = 1e-9
INDEFINITE_TOL = 1e-8
DEGENERATE_TOL = 1e-10


class CountingSolver:
    """Wraps an SDP solver and counts the solves routed through it."""

    def __init__(self, solver: SdpSolverProtocol | None = None):
        self._solver = solver or CvxoptSolver()
        self.calls = 0

    def solve(self, problem: SdpProblem, tol: float, max_iter: int) -> SdpSolution:
        self.calls += 1
        return self._solver.solve(problem, tol, max_iter)


@dataclass(frozen=True, eq=False)
class TransmitSubproblem:
    """
    The normalized SDP for one sensing level plus what is needed to undo the
    normalization.

    Block 0 is R and blocks 1..K are R_1..R_K, all expressed in `basis`
    coordinates and divided by `power`. The solver's slack is t / t_scale.
    """

    problem: SdpProblem
    basis: np.ndarray  # N x d, orthonormal columns
    power: float
    t_scale: float
    gamma_r: float

    def lift(self, solution: SdpSolution) -> CovariancePack:
        blocks = _project_to_cone(solution.block_values)
        P = self.basis
        full = [self.power * (P @ X @ P.conj().T) for X in blocks]
        pack = CovariancePack(
            R=hermitian_part(full[0]),
            per_user=np.array([hermitian_part(X) for X in full[1:]]).reshape(
                len(full) - 1, P.shape[0], P.shape[0]
            ),
        )
        problems = pack.violations(self.power, rtol=PROJECTION_RTOL)
        if problems:
            logger.warning(
                f"Lifted covariances at Gamma_r={self.gamma_r:.6g} break "
                f"{'; '.join(problems)}"
            )
        return pack


@dataclass(frozen=True, eq=False)
class Probe:
    gamma_r: float
    t: float
    t_normalized: float
    pack: CovariancePack | None
    feasible: bool
    failed: bool = False  # the solver gave no usable answer; counted as infeasible


@dataclass(frozen=True, eq=False)
class BisectionOutcome:
    pack: CovariancePack
    gamma_r_star: float
    history: tuple[tuple[float, float], ...]
    solves: int


def _psd_clip(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(hermitian_part(a))
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T


def _project_to_cone(blocks: tuple[np.ndarray, ...]) -> list[np.ndarray]:
    """
    Restores R_k >= 0, R - sum R_k >= 0 and tr(R) <= 1 exactly.

    Interior-point iterates meet the cone constraints only to within the solver
    tolerance. Any trace overshoot is taken out of the sensing part first:
    shrinking it only lowers the interference each user sees, so no user SINR
    drops. The user covariances are scaled only if that part is too small.
    """
    per_user = [_psd_clip(X) for X in blocks[1:]]
    user_sum = sum(per_user, np.zeros_like(blocks[0]))
    residual = _psd_clip(blocks[0] - user_sum)
    excess = float(np.real(np.trace(residual + user_sum))) - 1.0
    if excess > 0:
        residual_trace = float(np.real(np.trace(residual)))
        if residual_trace >= excess:
            residual = residual * ((residual_trace - excess) / residual_trace)
        else:
            user_trace = float(np.real(np.trace(user_sum)))
            residual = np.zeros_like(residual)
            per_user = [X / user_trace for X in per_user]
            user_sum = user_sum / user_trace
    return [residual + user_sum, *per_user]


def _span_basis(channel: ChannelSet) -> np.ndarray:
    vectors = np.vstack([channel.user_vectors, channel.target_vectors]).T
    U, s, _ = np.linalg.svd(vectors, full_matrices=False)
    keep = s > 1e-12 * s[0]
    return U[:, keep]


def _check_filters(channel: ChannelSet, Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=complex)
    if Q.shape != (channel.N, channel.M):
        raise ValueError(
            f"Q has shape {Q.shape}, expected ({channel.N}, {channel.M}) for this channel set"
        )
    norms = np.linalg.norm(Q, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise ValueError(f"receive filters must have unit norm, got {norms}")
    return Q


class TransmitOptimizer:
    """
    Bisection machinery for one (channel, Q, noise, P_T, Gamma_c) configuration.

    The SDP back end is injected; every solve goes through a CountingSolver so
    callers can report how many SDPs each stage needed.
    """

    def __init__(
        self,
        channel: ChannelSet,
        Q: np.ndarray,
        noise: NoiseModel,
        P_T: float,
        gamma_c: float,
        solver: SdpSolverProtocol | None = None,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        gallop_after: int | None = DEFAULT_GALLOP_AFTER,
        compress: bool = True,
    ):
        if not P_T > 0:
            raise ValueError(f"P_T {P_T} not in range (0, inf)")
        if not gamma_c > 0:
            raise ValueError(f"gamma_c {gamma_c} not in range (0, inf)")
        if gallop_after is not None and gallop_after < 1:
            raise ValueError(f"gallop_after {gallop_after} not in range [1, inf)")
        if not noise.sigma_R_sq > 0:
            raise ValueError(f"sigma_R_sq {noise.sigma_R_sq} not in range (0, inf)")
        self.channel = channel
        self.Q = _check_filters(channel, Q)
        self.noise = noise
        self.P_T = P_T
        self.gamma_c = gamma_c
        self.solver = solver if isinstance(solver, CountingSolver) else CountingSolver(solver)
        self.tol = tol
        self.max_iter = max_iter
        self.gallop_after = gallop_after
        self.basis = _span_basis(channel) if compress else np.eye(channel.N, dtype=complex)
        self._users_feasible = channel.K == 0

    @property
    def sdp_calls(self) -> int:
        return self.solver.calls

    def _user_rows(self, f: np.ndarray) -> list[LinearConstraint]:
        sigma_c_sq = self.noise.sigma_c_eff_sq
        c_scale = sigma_c_sq if sigma_c_sq > 0 else 1.0
        rows = []
        for k in range(self.channel.K):
            F = np.outer(f[k], f[k].conj()) * self.P_T / c_scale
            rows.append(
                LinearConstraint(
                    terms=(
                        TraceTerm(k + 1, (1.0 + 1.0 / self.gamma_c) * F),
                        TraceTerm(0, -F),
                    ),
                    lower=sigma_c_sq / c_scale,
                    label=f"user {k}",
                )
            )
        return rows

    def _couplings(self) -> tuple[PsdCoupling, ...]:
        if not self.channel.K:
            return ()
        return (
            PsdCoupling(
                weights=((0, 1.0),) + tuple((k + 1, -1.0) for k in range(self.channel.K)),
                label="R - sum R_k",
            ),
        )

    def build_subproblem(self, gamma_r: float) -> TransmitSubproblem:
        if not gamma_r > 0:
            raise ValueError(f"gamma_r {gamma_r} not in range (0, inf)")
        channel, P = self.channel, self.basis
        d = P.shape[1]
        f = channel.user_vectors @ P.conj()  # rows are P^H f_k, transposed
        g = channel.target_vectors @ P.conj()
        echo = np.abs(channel.target_vectors.conj() @ self.Q) ** 2  # [m, l] = |g_m^H q_l|^2

        sigma_R_sq = self.noise.sigma_R_sq
        t_scale = sigma_R_sq

        inequalities = []
        for l in range(channel.M):
            coeff = np.zeros((d, d), dtype=complex)
            for m in range(channel.M):
                outer = np.outer(g[m], g[m].conj())
                weight = echo[m, l] / gamma_r if m == l else -echo[m, l]
                coeff += weight * outer
            inequalities.append(
                LinearConstraint(
                    terms=(TraceTerm(0, hermitian_part(coeff) * self.P_T / t_scale),),
                    lower=sigma_R_sq / t_scale,
                    uses_slack=True,
                    label=f"target {l}",
                )
            )
        user_rows = self._user_rows(f)
        problem = SdpProblem(
            blocks=(d,) * (channel.K + 1),
            inequalities=tuple(inequalities + user_rows),
            psd_couplings=self._couplings(),
            trace_budgets=(TraceBudget(blocks=(0,), bound=1.0),),
        )
        return TransmitSubproblem(
            problem=problem, basis=P, power=self.P_T, t_scale=t_scale, gamma_r=gamma_r
        )

    def users_subproblem(self) -> TransmitSubproblem:
        """
        The user constraints alone, solved for the least total power.

        Its feasibility decides whether the scenario can be served at all, since
        the sensing rows of the full subproblem always admit some slack t.
        """
        d = self.basis.shape[1]
        f = self.channel.user_vectors @ self.basis.conj()
        user_rows = self._user_rows(f)
        problem = SdpProblem(
            blocks=(d,) * (self.channel.K + 1),
            objective=(TraceTerm(0, -np.eye(d)),),
            inequalities=tuple(user_rows),
            psd_couplings=self._couplings(),
            trace_budgets=(TraceBudget(blocks=(0,), bound=1.0),),
        )
        return TransmitSubproblem(
            problem=problem, basis=self.basis, power=self.P_T, t_scale=1.0, gamma_r=0.0
        )

    def binding_users(self) -> list[int]:
        """Users that miss Gamma_c even with the whole budget steered at them."""
        sigma_c_sq = self.noise.sigma_c_eff_sq
        gains = np.sum(np.abs(self.channel.user_vectors) ** 2, axis=1)
        if sigma_c_sq == 0:
            return []
        return [
            k
            for k in range(self.channel.K)
            if self.P_T * gains[k] / sigma_c_sq < self.gamma_c
        ]

    def _usable(self, solution: SdpSolution, gamma_r: float) -> bool:
        if solution.status is SolverStatus.OPTIMAL:
            return True
        if solution.status is not SolverStatus.MAX_ITER or not solution.block_values:
            return False
        worst = max(
            solution.residuals.get("primal_infeasibility", math.nan),
            solution.residuals.get("dual_infeasibility", math.nan),
        )
        if worst <= ACCEPTABLE_RESIDUAL:
            logger.warning(
                f"Solver hit max_iter at Gamma_r={gamma_r:.6g}; "
                f"accepting iterate with residual {worst:.2e}"
            )
            return True
        return False

    def _raise_infeasible(self):
        binding = self.binding_users()
        detail = "" if binding else "jointly infeasible"
        raise InfeasibleScenarioError(binding or list(range(self.channel.K)), self.gamma_c, detail)

    def solve_users(self, history=()) -> CovariancePack:
        """
        Least-power covariances that meet every user target, with no sensing part.

        Raises:
            InfeasibleScenarioError: If the user constraints cannot be met.
            SolverFailureError: If the solver gives no usable answer.
        """
        sub = self.users_subproblem()
        if not self.channel.K:
            n = self.channel.N
            return CovariancePack(R=np.zeros((n, n)), per_user=np.zeros((0, n, n)))
        solution = self.solver.solve(sub.problem, self.tol, self.max_iter)
        if not self._usable(solution, 0.0):
            if solution.status is SolverStatus.INFEASIBLE:
                self._raise_infeasible()
            solution = self.solver.solve(
                sub.problem, self.tol * RETRY_TOL_FACTOR, self.max_iter
            )
            if not self._usable(solution, 0.0):
                if solution.status is SolverStatus.INFEASIBLE:
                    self._raise_infeasible()
                raise SolverFailureError(solution.status.value, history)
        self._users_feasible = True
        return sub.lift(solution)

    def _solve(self, problem: SdpProblem, gamma_r: float, history) -> SdpSolution | None:
        """
        Runs one probe solve; None means the solver gave no usable answer.

        A breakdown is retried once with a looser tolerance. A primal
        infeasibility report is only believed after the user constraints alone
        have been checked, because near the largest achievable Gamma_r the
        feasible set thins out and the solver can misreport it.
        """
        solution = self.solver.solve(problem, self.tol, self.max_iter)
        if self._usable(solution, gamma_r):
            return solution
        match solution.status:
            case SolverStatus.UNBOUNDED:
                raise SolverFailureError(solution.status.value, history)
            case SolverStatus.INFEASIBLE:
                if not self._users_feasible:
                    self.solve_users(history)
                return None
        logger.debug(
            f"Probe Gamma_r={gamma_r:.6g} ended with {solution.status.value}; retrying "
            f"at tol={self.tol * RETRY_TOL_FACTOR:.1e}"
        )
        retry = self.solver.solve(problem, self.tol * RETRY_TOL_FACTOR, self.max_iter)
        if self._usable(retry, gamma_r):
            return retry
        return None

    def probe(self, gamma_r: float, history=()) -> Probe:
        """
        Solves the subproblem at gamma_r and reports the indicator t.

        A probe the solver cannot answer comes back with failed=True and
        t=-inf, so bracketing and bisection treat it as the infeasible side.
        """
        sub = self.build_subproblem(gamma_r)
        solution = self._solve(sub.problem, gamma_r, history)
        if solution is None:
            logger.warning(
                f"Probe Gamma_r={gamma_r:.6g}: solver gave no usable answer; "
                f"treating the level as infeasible"
            )
            return Probe(
                gamma_r=gamma_r,
                t=-math.inf,
                t_normalized=-math.inf,
                pack=None,
                feasible=False,
                failed=True,
            )
        t_normalized = solution.t
        t = t_normalized * sub.t_scale
        logger.debug(f"Probe Gamma_r={gamma_r:.6g}: t={t:.6e} (normalized {t_normalized:.3e})")
        return Probe(
            gamma_r=gamma_r,
            t=t,
            t_normalized=t_normalized,
            pack=sub.lift(solution),
            feasible=t_normalized >= -self.tol,
        )

    def interference_free_bound(self) -> float:
        """P_T max_m ||g_m||^4 / sigma_R^2, an upper bound on every sensing SINR."""
        beta = float(np.max(np.sum(np.abs(self.channel.target_vectors) ** 2, axis=1)))
        return self.P_T * beta**2 / self.noise.sigma_R_sq

    def interference_cap(self) -> float:
        """
        Largest common sensing SINR the filters Q allow even without noise.

        With x_m = g_m^H R g_m, every target row needs
        |g_l^H q_l|^2 x_l > Gamma_r sum_{m != l} |g_m^H q_l|^2 x_m, so Gamma_r
        stays below 1 / rho(B) with B[l, m] = |g_m^H q_l|^2 / |g_l^H q_l|^2 off
        the diagonal. Returns inf when no target leaks into another's filter.
        """
        echo = np.abs(self.channel.target_vectors.conj() @ self.Q) ** 2  # [m, l]
        own = np.diag(echo).copy()
        if np.any(own <= DEGENERATE_TOL * np.max(echo)):
            return 0.0
        coupling = echo.T / own[:, None]
        np.fill_diagonal(coupling, 0.0)
        rho = float(np.max(np.abs(np.linalg.eigvals(coupling))))
        return math.inf if rho <= 0 else 1.0 / rho

    def upper_bound(self) -> float:
        return min(self.interference_free_bound(), self.interference_cap())

    def abs_start(self) -> float:
        """
        Interference-free sensing level left after each user gets the power it
        needs on its own.
        """
        gains = np.sum(np.abs(self.channel.user_vectors) ** 2, axis=1)
        user_power = float(np.sum(self.gamma_c * self.noise.sigma_c_eff_sq / gains))
        beta = float(np.max(np.sum(np.abs(self.channel.target_vectors) ** 2, axis=1)))
        return (self.P_T - user_power) * beta**2 / self.noise.sigma_R_sq

    def plain_bracket(self) -> BisectionBracket:
        """[0, upper bound]; neither end is probed."""
        return BisectionBracket(gamma_start=0.0, gamma_end=self.upper_bound())

    def _next_step(self, step: float, run: int) -> float:
        if self.gallop_after is not None and run % self.gallop_after == 0:
            return 2.0 * step
        return step

    def abs_bracket(
        self, start: float | None = None, known_pack: CovariancePack | None = None
    ) -> BisectionBracket:
        """
        Walks from `start` in Gamma_c steps until the indicator changes sign.

        Without galloping the returned width is exactly Gamma_c. With
        gallop_after=n the step doubles after every n consecutive steps in one
        direction, and the width is the last step taken. Starts at or above the
        inter-target limit of the current filters are pulled just below it.

        `known_pack` certifies `start` as achievable (the previous outer round
        reached it). It stands in for the first probe if the solver cannot
        answer there.
        """
        if start is None:
            start = self.abs_start()
            if not start > 0:
                logger.warning(
                    f"ABS start {start:.6g} is not positive; falling back to the plain bracket"
                )
                return self.plain_bracket()
        cap = self.interference_cap()
        if start >= cap:
            logger.debug(f"ABS start {start:.6g} lowered to the inter-target limit {cap:.6g}")
            start, known_pack = CAP_MARGIN * cap, None
            if not start > 0:
                return self.plain_bracket()

        calls_before = self.sdp_calls
        history: list[tuple[float, float]] = []

        def probe(gamma: float) -> Probe:
            result = self.probe(gamma, history)
            history.append((gamma, result.t))
            return result

        first = probe(start)
        if first.failed and known_pack is not None:
            logger.debug(f"Using the previous round's covariances at Gamma_r={start:.6g}")
            first = Probe(start, 0.0, 0.0, known_pack, feasible=True)
        step = self.gamma_c
        if first.feasible:
            low = first
            for run in range(1, MAX_BRACKET_STEPS + 1):
                candidate = probe(low.gamma_r + step)
                if not candidate.feasible:
                    gamma_start, gamma_end, start_pack = (
                        low.gamma_r,
                        candidate.gamma_r,
                        low.pack,
                    )
                    break
                low = candidate
                step = self._next_step(step, run)
            else:
                raise SolverFailureError("bracket not found", history)
        else:
            high = start
            for run in range(1, MAX_BRACKET_STEPS + 1):
                lower = high - step
                if lower <= 0:
                    # Gamma_r = 0 is achievable whenever the users are.
                    gamma_start, gamma_end, start_pack = 0.0, high, None
                    break
                candidate = probe(lower)
                if candidate.feasible:
                    gamma_start, gamma_end, start_pack = lower, high, candidate.pack
                    break
                high = lower
                step = self._next_step(step, run)
            else:
                raise SolverFailureError("bracket not found", history)

        solves = self.sdp_calls - calls_before
        logger.debug(
            f"ABS bracket [{gamma_start:.6g}, {gamma_end:.6g}] after {solves} solve(s)"
        )
        return BisectionBracket(
            gamma_start=gamma_start,
            gamma_end=gamma_end,
            history=tuple(history),
            start_pack=start_pack,
            solves=solves,
        )

    def bisect(self, bracket: BisectionBracket, eps1: float = DEFAULT_EPS1) -> BisectionOutcome:
        """
        Halves the bracket until it is at most eps1 wide.

        Returns the last feasible level and the covariance pack from its solve.
        If no probe was feasible and the bracket starts at 0, the lower end is
        the least-power user solution.

        Raises:
            SolverFailureError: If not even the lower end can be solved.
        """
        if not eps1 > 0:
            raise ValueError(f"eps1 {eps1} not in range (0, inf)")
        low, high, pack = bracket.gamma_start, bracket.gamma_end, bracket.start_pack
        history = list(bracket.history)
        calls_before = self.sdp_calls
        while high - low > eps1:
            mid = 0.5 * (low + high)
            result = self.probe(mid, history)
            history.append((mid, result.t))
            if result.feasible:
                low, pack = mid, result.pack
            else:
                high = mid

        if pack is None:
            if low > 0:
                raise SolverFailureError("no feasible sensing level found", history)
            logger.warning("No positive sensing level was certified; keeping Gamma_r = 0")
            pack = self.solve_users(history)
        solves = self.sdp_calls - calls_before
        logger.debug(f"Bisection settled at Gamma_r={low:.6g} after {solves} solve(s)")
        return BisectionOutcome(
            pack=pack, gamma_r_star=low, history=tuple(history), solves=solves
        )


def build_subproblem(
    gamma_r: float,
    channel: ChannelSet,
    Q: np.ndarray,
    noise: NoiseModel,
    P_T: float,
    gamma_c: float,
    compress: bool = True,
) -> TransmitSubproblem:
    return TransmitOptimizer(
        channel, Q, noise, P_T, gamma_c, compress=compress
    ).build_subproblem(gamma_r)


def indicator_t(
    gamma_r: float,
    channel: ChannelSet,
    Q: np.ndarray,
    noise: NoiseModel,
    P_T: float,
    gamma_c: float,
    solver: SdpSolverProtocol | None = None,
    tol: float = DEFAULT_TOL,
) -> float:
    """
    Optimal slack t of the subproblem at gamma_r; t >= 0 means gamma_r is achievable.

    Raises:
        InfeasibleScenarioError: If the user constraints cannot be met at all.
        SolverFailureError: If the solver fails.
    """
    optimizer = TransmitOptimizer(channel, Q, noise, P_T, gamma_c, solver=solver, tol=tol)
    return optimizer.probe(gamma_r).t


def abs_bracket(
    channel: ChannelSet,
    Q: np.ndarray,
    noise: NoiseModel,
    P_T: float,
    gamma_c: float,
    solver: SdpSolverProtocol | None = None,
    gallop_after: int | None = DEFAULT_GALLOP_AFTER,
) -> BisectionBracket:
    optimizer = TransmitOptimizer(
        channel, Q, noise, P_T, gamma_c, solver=solver, gallop_after=gallop_after
    )
    return optimizer.abs_bracket()


def bisect_transmit(
    bracket: BisectionBracket,
    channel: ChannelSet,
    Q: np.ndarray,
    noise: NoiseModel,
    P_T: float,
    gamma_c: float,
    eps1: float = DEFAULT_EPS1,
    solver: SdpSolverProtocol | None = None,
) -> BisectionOutcome:
    optimizer = TransmitOptimizer(channel, Q, noise, P_T, gamma_c, solver=solver)
    return optimizer.bisect(bracket, eps1)


def extract_rank_one(pack: CovariancePack, channel: ChannelSet) -> np.ndarray:
    """
    Rank-one communication beamformers w_k = R_k f_k / sqrt(f_k^H R_k f_k).

    Each user keeps its SINR: f_k^H w_k w_k^H f_k = f_k^H R_k f_k, and the
    interference it sees can only shrink.

    Raises:
        DegenerateUserError: If some f_k^H R_k f_k is numerically zero.
    """
    if pack.K != channel.K:
        raise ValueError(f"pack has {pack.K} user covariance(s), channel has {channel.K}")
    trace = max(float(np.real(np.trace(pack.R))), 1e-300)
    columns = []
    for k in range(channel.K):
        f = channel.user(k)
        R_k = pack.per_user[k]
        gain = float(np.real(f.conj() @ R_k @ f))
        if gain <= DEGENERATE_TOL * trace * float(np.real(f.conj() @ f)):
            raise DegenerateUserError(k, gain)
        columns.append(R_k @ f / math.sqrt(gain))
    return np.array(columns, dtype=complex).T.reshape(channel.N, channel.K)


def factor_sensing_cov(pack: CovariancePack, W_c: np.ndarray | None = None) -> np.ndarray:
    """
    Factors the sensing covariance R - W_c W_c^H as W_r W_r^H.

    Args:
        pack: Covariances from the transmit solve.
        W_c: Communication beamformers; when omitted the pack's own R_k are
            subtracted.

    Returns:
        W_r with one column per eigenvalue above 1e-9 tr(R), largest first.

    Raises:
        IndefiniteResidualError: If the residual has an eigenvalue below
            -1e-8 tr(R).
    """
    if W_c is None:
        residual = pack.residual
    else:
        residual = pack.R - W_c @ W_c.conj().T
    trace = float(np.real(np.trace(pack.R)))
    n = pack.R.shape[0]
    if trace <= 0:
        return np.zeros((n, 0), dtype=complex)

    vals, vecs = np.linalg.eigh(hermitian_part(residual))
    if vals[0] < -INDEFINITE_TOL * trace:
        raise IndefiniteResidualError(float(vals[0]), trace)
    keep = vals > RANK_TOL * trace
    W_r = vecs[:, keep] * np.sqrt(vals[keep])
    return W_r[:, ::-1]
