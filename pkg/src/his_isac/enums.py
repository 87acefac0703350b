from enum import Enum


class SolverStatus(Enum):
    """Termination states reported by the SDP solver."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"
    NUMERICAL_ERROR = "numerical_error"


class OptimizationStatus(Enum):
    """
    Termination states of the alternating transmit/receive optimization.
    """

    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    ASCENT_LOST = "ascent_lost"  # a round lowered Gamma_r*; the earlier round is kept


class BeampatternNormalization(Enum):
    """How a beampattern cut is referenced before conversion to dB."""

    NONE = "none"
    PEAK = "peak"
    REFERENCE = "reference"


class BeampatternSide(Enum):
    TRANSMIT = "transmit"
    RECEIVE = "receive"


class SweepVariable(Enum):
    """
    Scenario parameters a sweep can vary.
    """

    P_T = "P_T"
    A_T = "A_T"
    GAMMA_C = "Gamma_c"
    DELTA_THETA = "delta_theta"
    MAX_ORDER = "max_order"


class ArrayKind(Enum):
    """Aperture model used to synthesize channel vectors."""

    HIS = "his"
    DISCRETE = "discrete"
