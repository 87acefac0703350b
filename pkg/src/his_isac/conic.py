"""Dense SDP solver for problems over Hermitian PSD matrix variables.

Problems are stated over complex Hermitian blocks X_1..X_B and an optional
scalar slack t:

    maximize    sum tr(C X_b) + t
    subject to  sum tr(A X_b) - t >= lower        (linear inequalities)
                sum tr(X_b) <= bound               (trace budgets)
                X_b >= 0, sum w_b X_b >= 0         (PSD blocks and couplings)

Each Hermitian block of size n is parameterized by its n^2 real coordinates in
an orthonormal Hermitian basis (see hvec), so trace functionals become plain
dot products. A PSD constraint on a Hermitian matrix is imposed on its real
symmetric embedding [[Re, -Im], [Im, Re]] of size 2n. Since
tr(C X) = tr(embed(C) embed(X)) / 2, functionals taken on the embedded form
need the factor 1/2; the coordinate route used here applies it implicitly.

The real problem is handed to cvxopt's primal-dual interior-point SDP solver.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from cvxopt import matrix, solvers

from his_isac.enums import SolverStatus
from his_isac.errors import MalformedProblemError
from his_isac.utils import is_hermitian

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200

_SQRT2 = math.sqrt(2.0)

_CVXOPT_STATUS = {
    "optimal": SolverStatus.OPTIMAL,
    "primal infeasible": SolverStatus.INFEASIBLE,
    "dual infeasible": SolverStatus.UNBOUNDED,
    "unknown": SolverStatus.MAX_ITER,
}


@dataclass(frozen=True, eq=False)
class TraceTerm:
    """tr(coeff @ X_block) with a Hermitian coefficient matrix."""

    block: int
    coeff: np.ndarray


@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """sum of trace terms, minus t when uses_slack, must be at least `lower`."""

    terms: tuple[TraceTerm, ...]
    lower: float
    uses_slack: bool = False
    label: str = ""


@dataclass(frozen=True)
class PsdCoupling:
    """sum_b weight_b X_b must be PSD; all referenced blocks share one dimension."""

    weights: tuple[tuple[int, float], ...]
    label: str = ""


@dataclass(frozen=True)
class TraceBudget:
    blocks: tuple[int, ...]
    bound: float


@dataclass(frozen=True, eq=False)
class SdpProblem:
    blocks: tuple[int, ...]  # Hermitian block dimensions
    objective: tuple[TraceTerm, ...] = ()
    inequalities: tuple[LinearConstraint, ...] = ()
    psd_couplings: tuple[PsdCoupling, ...] = ()
    trace_budgets: tuple[TraceBudget, ...] = ()

    @property
    def has_slack(self) -> bool:
        return any(c.uses_slack for c in self.inequalities)

    @property
    def num_variables(self) -> int:
        return sum(n * n for n in self.blocks) + (1 if self.has_slack else 0)

    def validate(self) -> None:
        """
        Checks structural consistency.

        Raises:
            MalformedProblemError: On bad block indices, mismatched or
                non-Hermitian coefficients, or couplings across dimensions.
        """
        if not self.blocks:
            raise MalformedProblemError("problem has no matrix blocks")
        if any(n < 1 for n in self.blocks):
            raise MalformedProblemError(f"block dimensions must be positive: {self.blocks}")

        def check_term(term: TraceTerm, where: str):
            if not 0 <= term.block < len(self.blocks):
                raise MalformedProblemError(f"{where}: block {term.block} does not exist")
            n = self.blocks[term.block]
            if np.shape(term.coeff) != (n, n):
                raise MalformedProblemError(
                    f"{where}: coefficient shape {np.shape(term.coeff)} does not match block "
                    f"{term.block} of dimension {n}"
                )
            if not is_hermitian(np.asarray(term.coeff, dtype=complex), rtol=1e-10):
                raise MalformedProblemError(f"{where}: coefficient is not Hermitian")

        for term in self.objective:
            check_term(term, "objective")
        for i, constraint in enumerate(self.inequalities):
            for term in constraint.terms:
                check_term(term, f"inequality {i} {constraint.label}".strip())
        for coupling in self.psd_couplings:
            dims = set()
            for block, _ in coupling.weights:
                if not 0 <= block < len(self.blocks):
                    raise MalformedProblemError(f"coupling: block {block} does not exist")
                dims.add(self.blocks[block])
            if len(dims) != 1:
                raise MalformedProblemError(
                    f"coupling {coupling.label!r} mixes block dimensions {sorted(dims)}"
                )
        for budget in self.trace_budgets:
            if not budget.blocks or any(
                not 0 <= b < len(self.blocks) for b in budget.blocks
            ):
                raise MalformedProblemError(f"trace budget refers to blocks {budget.blocks}")


@dataclass(frozen=True, eq=False)
class SdpSolution:
    block_values: tuple[np.ndarray, ...]
    t: float
    status: SolverStatus
    objective: float = math.nan  # value of the maximized objective
    dual_bound: float = math.nan
    iterations: int = 0
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def is_optimal(self) -> bool:
        return self.status is SolverStatus.OPTIMAL


def hvec(a: np.ndarray) -> np.ndarray:
    """
    Orthonormal real coordinates of a Hermitian matrix.

    Diagonal entries first, then sqrt(2) Re and sqrt(2) Im of the strict upper
    triangle, so that tr(A B) = hvec(A) @ hvec(B) for Hermitian A and B.
    """
    a = np.asarray(a, dtype=complex)
    iu = np.triu_indices(a.shape[0], k=1)
    return np.concatenate(
        [np.real(np.diag(a)), _SQRT2 * np.real(a[iu]), _SQRT2 * np.imag(a[iu])]
    )


def hmat(x: np.ndarray, n: int) -> np.ndarray:
    """Inverse of hvec."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n * n,):
        raise ValueError(f"expected {n * n} coordinates, got {x.shape}")
    iu = np.triu_indices(n, k=1)
    m = len(iu[0])
    a = np.zeros((n, n), dtype=complex)
    a[np.diag_indices(n)] = x[:n]
    upper = (x[n : n + m] + 1j * x[n + m :]) / _SQRT2
    a[iu] = upper
    a[(iu[1], iu[0])] = upper.conj()
    return a


def hermitian_to_real_symmetric(a: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re A, -Im A], [Im A, Re A]]."""
    a = np.asarray(a, dtype=complex)
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def real_symmetric_to_hermitian(s: np.ndarray) -> np.ndarray:
    """Recovers the Hermitian matrix from its embedding, averaging the duplicated halves."""
    s = np.asarray(s, dtype=float)
    n = s.shape[0] // 2
    if s.shape != (2 * n, 2 * n):
        raise ValueError(f"expected an even square matrix, got shape {s.shape}")
    re = 0.5 * (s[:n, :n] + s[n:, n:])
    im = 0.5 * (s[n:, :n] - s[:n, n:])
    return re + 1j * im


def _embedded_basis(n: int) -> np.ndarray:
    """Column p is the column-major vec of embed(hmat(e_p))."""
    columns = np.empty(((2 * n) ** 2, n * n))
    for p in range(n * n):
        e = np.zeros(n * n)
        e[p] = 1.0
        columns[:, p] = hermitian_to_real_symmetric(hmat(e, n)).ravel(order="F")
    return columns


@dataclass(frozen=True, eq=False)
class _RealForm:
    """minimize c^T x s.t. Gl x <= hl, hs_i - mat(Gs_i x) PSD."""

    c: np.ndarray
    Gl: np.ndarray
    hl: np.ndarray
    Gs: list[np.ndarray]
    hs: list[np.ndarray]
    offsets: tuple[int, ...]


def _real_form(problem: SdpProblem) -> _RealForm:
    offsets = []
    position = 0
    for n in problem.blocks:
        offsets.append(position)
        position += n * n
    nvar = problem.num_variables
    slack = nvar - 1 if problem.has_slack else None

    def scatter(row: np.ndarray, term: TraceTerm, sign: float):
        n = problem.blocks[term.block]
        start = offsets[term.block]
        row[start : start + n * n] += sign * hvec(term.coeff)

    c = np.zeros(nvar)
    for term in problem.objective:
        scatter(c, term, -1.0)
    if slack is not None:
        c[slack] = -1.0

    rows, bounds = [], []
    for constraint in problem.inequalities:
        row = np.zeros(nvar)
        for term in constraint.terms:
            scatter(row, term, -1.0)
        if constraint.uses_slack:
            row[slack] = 1.0
        rows.append(row)
        bounds.append(-constraint.lower)
    for budget in problem.trace_budgets:
        row = np.zeros(nvar)
        for block in budget.blocks:
            n = problem.blocks[block]
            scatter(row, TraceTerm(block, np.eye(n)), 1.0)
        rows.append(row)
        bounds.append(budget.bound)

    bases = {n: _embedded_basis(n) for n in set(problem.blocks)}
    Gs, hs = [], []

    def psd_rows(weights: tuple[tuple[int, float], ...]):
        n = problem.blocks[weights[0][0]]
        G = np.zeros(((2 * n) ** 2, nvar))
        for block, weight in weights:
            start = offsets[block]
            G[:, start : start + n * n] -= weight * bases[n]
        Gs.append(G)
        hs.append(np.zeros((2 * n, 2 * n)))

    for b in range(len(problem.blocks)):
        psd_rows(((b, 1.0),))
    for coupling in problem.psd_couplings:
        psd_rows(coupling.weights)

    Gl = np.array(rows).reshape(len(rows), nvar)
    return _RealForm(
        c=c, Gl=Gl, hl=np.array(bounds, dtype=float), Gs=Gs, hs=hs, offsets=tuple(offsets)
    )


def _to_cvxopt(a: np.ndarray) -> matrix:
    return matrix(np.ascontiguousarray(a, dtype=float))


def _residual(sol: dict, key: str) -> float:
    value = sol.get(key)
    return math.nan if value is None else float(value)


def solve_sdp(
    problem: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> SdpSolution:
    """
    Solves an SdpProblem with cvxopt's dense interior-point method.

    Args:
        problem: The problem; validated before any solver work.
        tol: Absolute, relative and feasibility tolerance passed to the solver.
        max_iter: Iteration cap; hitting it yields status MAX_ITER with the last
            iterate.

    Returns:
        The solution. Block values are empty when the status is INFEASIBLE,
        UNBOUNDED or NUMERICAL_ERROR; the last one means the interior-point
        iteration broke down arithmetically.

    Raises:
        ValueError: If tol or max_iter are not positive.
        MalformedProblemError: If the problem is structurally inconsistent.
    """
    if not tol > 0:
        raise ValueError(f"tol {tol} not in range (0, inf)")
    if max_iter < 1:
        raise ValueError(f"max_iter {max_iter} not in range [1, inf)")
    problem.validate()
    form = _real_form(problem)

    options = {
        "show_progress": False,
        "abstol": tol,
        "reltol": tol,
        "feastol": tol,
        "maxiters": max_iter,
    }
    try:
        sol = solvers.sdp(
            _to_cvxopt(form.c),
            Gl=_to_cvxopt(form.Gl) if form.Gl.shape[0] else None,
            hl=_to_cvxopt(form.hl) if form.Gl.shape[0] else None,
            Gs=[_to_cvxopt(G) for G in form.Gs],
            hs=[_to_cvxopt(h) for h in form.hs],
            options=options,
        )
    except (ArithmeticError, ValueError) as e:
        # cvxopt raises these when its scaling or KKT factorization breaks down
        logger.debug(f"SDP with {len(problem.blocks)} block(s) broke down: {e!r}")
        return SdpSolution(block_values=(), t=math.nan, status=SolverStatus.NUMERICAL_ERROR)
    status = _CVXOPT_STATUS.get(sol["status"], SolverStatus.MAX_ITER)
    residuals = {
        "primal_infeasibility": _residual(sol, "primal infeasibility"),
        "dual_infeasibility": _residual(sol, "dual infeasibility"),
        "gap": _residual(sol, "gap"),
        "relative_gap": _residual(sol, "relative gap"),
    }
    iterations = int(sol.get("iterations") or 0)
    logger.debug(
        f"SDP with {len(problem.blocks)} block(s), {problem.num_variables} variable(s): "
        f"status={status.value}, iterations={iterations}"
    )

    if status in (SolverStatus.INFEASIBLE, SolverStatus.UNBOUNDED) or sol["x"] is None:
        return SdpSolution(
            block_values=(),
            t=math.nan,
            status=status,
            iterations=iterations,
            residuals=residuals,
        )

    x = np.array(sol["x"]).ravel()
    block_values = tuple(
        hmat(x[start : start + n * n], n)
        for start, n in zip(form.offsets, problem.blocks, strict=True)
    )
    t = float(x[-1]) if problem.has_slack else 0.0
    return SdpSolution(
        block_values=block_values,
        t=t,
        status=status,
        objective=-_residual(sol, "primal objective"),
        dual_bound=-_residual(sol, "dual objective"),
        iterations=iterations,
        residuals=residuals,
    )


class CvxoptSolver:
    """Default SdpSolverProtocol implementation backed by solve_sdp."""

    def solve(
        self, problem: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
    ) -> SdpSolution:
        return solve_sdp(problem, tol=tol, max_iter=max_iter)


def _sdpa_entries(
    out: list[str], matno: int, blockno: int, mat: np.ndarray, diagonal: bool
):
    if diagonal:
        for i, value in enumerate(mat):
            if value != 0:
                out.append(f"{matno} {blockno} {i + 1} {i + 1} {value:.17g}")
        return
    rows, cols = np.triu_indices(mat.shape[0])
    for i, j in zip(rows, cols, strict=True):
        value = mat[i, j]
        if value != 0:
            out.append(f"{matno} {blockno} {i + 1} {j + 1} {value:.17g}")


def dump_sdpa(problem: SdpProblem, path: str | Path) -> Path:
    """
    Writes the real-embedded problem in SDPA sparse format (.dat-s).

    SDPA reads: minimize c^T x subject to sum_i F_i x_i - F_0 PSD. The linear
    rows become one diagonal block and each PSD constraint one dense block, with
    F_i = -G[:, i] and F_0 = -h. The last variable is the slack t when present.
    """
    problem.validate()
    form = _real_form(problem)
    path = Path(path)
    nvar = form.c.shape[0]
    has_lp = form.Gl.shape[0] > 0

    sizes = ([-form.Gl.shape[0]] if has_lp else []) + [h.shape[0] for h in form.hs]
    lines = [
        f'"real-embedded SDP: {len(problem.blocks)} Hermitian block(s), '
        f'slack={"yes" if problem.has_slack else "no"}',
        str(nvar),
        str(len(sizes)),
        " ".join(str(s) for s in sizes),
        " ".join(f"{v:.17g}" for v in form.c),
    ]

    block_offset = 1
    if has_lp:
        _sdpa_entries(lines, 0, 1, -form.hl, diagonal=True)
        for i in range(nvar):
            _sdpa_entries(lines, i + 1, 1, -form.Gl[:, i], diagonal=True)
        block_offset = 2
    for k, (G, h) in enumerate(zip(form.Gs, form.hs, strict=True)):
        blockno = block_offset + k
        n = h.shape[0]
        _sdpa_entries(lines, 0, blockno, -h, diagonal=False)
        for i in range(nvar):
            column = G[:, i]
            if np.any(column):
                _sdpa_entries(
                    lines, i + 1, blockno, -column.reshape((n, n), order="F"), diagonal=False
                )

    path.write_text("\n".join(lines) + "\n")
    logger.debug(f"Wrote SDPA problem with {nvar} variable(s) to {path}")
    return path
