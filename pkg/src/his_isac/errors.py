"""Exceptions raised by the optimization pipeline.

Every exception carries the diagnostics a caller needs to report the failure
without re-running anything.
"""

from collections.abc import Sequence


class HisIsacError(Exception):
    """Base class for all domain failures."""


class InvalidNoiseError(HisIsacError):
    def __init__(self, denominator: float):
        self.denominator = denominator
        super().__init__(
            f"SINR denominator {denominator:.3e} is not positive; check the noise powers"
        )


class DegenerateUserError(HisIsacError):
    """A user's covariance delivers no power along its own channel."""

    def __init__(self, k: int, gain: float):
        self.k = k
        self.gain = gain
        super().__init__(f"user {k} is degenerate: f_k^H R_k f_k = {gain:.3e}")


class IndefiniteResidualError(HisIsacError):
    def __init__(self, min_eigenvalue: float, trace: float):
        self.min_eigenvalue = min_eigenvalue
        self.trace = trace
        super().__init__(
            f"sensing residual is indefinite: min eigenvalue {min_eigenvalue:.3e} "
            f"(trace {trace:.3e})"
        )


class InfeasibleScenarioError(HisIsacError):
    """The communication constraints cannot be met within the power budget."""

    def __init__(self, binding_users: Sequence[int], gamma_c: float, detail: str = ""):
        self.binding_users = tuple(binding_users)
        self.gamma_c = gamma_c
        message = (
            f"scenario infeasible at Gamma_c={gamma_c:.4g}; "
            f"binding users: {list(self.binding_users)}"
        )
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class SolverFailureError(HisIsacError):
    def __init__(self, status: str, history: Sequence[tuple[float, float]] = ()):
        self.status = status
        self.history = tuple(history)
        super().__init__(
            f"SDP solver failed with status {status!r} after {len(self.history)} probe(s)"
        )


class MalformedProblemError(HisIsacError):
    """An SdpProblem is structurally inconsistent and was not sent to the solver."""


class ScenarioError(HisIsacError):
    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {message}{location}")


class ReportError(HisIsacError):
    """A report file could not be written."""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
