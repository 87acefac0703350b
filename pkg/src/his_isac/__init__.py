from his_isac.ao_driver import Scenario, optimize
from his_isac.conic import CvxoptSolver, SdpProblem, SdpSolution, dump_sdpa, solve_sdp
from his_isac.discrete_baseline import DiscreteArray, DiscreteArraySpec, compare_gain
from his_isac.em_core import HisArray, build_channel_set, truncation_grid
from his_isac.enums import (
    ArrayKind,
    BeampatternNormalization,
    BeampatternSide,
    OptimizationStatus,
    SolverStatus,
    SweepVariable,
)
from his_isac.errors import (
    DegenerateUserError,
    HisIsacError,
    IndefiniteResidualError,
    InfeasibleScenarioError,
    InvalidNoiseError,
    MalformedProblemError,
    ReportError,
    ScenarioError,
    SolverFailureError,
)
from his_isac.models import (
    ApertureSpec,
    BeamformerSet,
    ChannelSet,
    CovariancePack,
    FarFieldPoint,
    NoiseModel,
    OptimizationResult,
    SolvedRun,
)
from his_isac.reports import emit_reports
from his_isac.scenario_config import ScenarioConfig, dump_scenario, load_scenario
from his_isac.sweep import ReportBundle, SweepSpec, run_sweep, solve_scenario
from his_isac.tx_beamform import TransmitOptimizer

__all__ = [
    # Core classes
    "HisArray",
    "DiscreteArray",
    "DiscreteArraySpec",
    "TransmitOptimizer",
    "CvxoptSolver",
    "Scenario",
    "ScenarioConfig",
    "SweepSpec",
    "ReportBundle",
    # Models
    "ApertureSpec",
    "BeamformerSet",
    "ChannelSet",
    "CovariancePack",
    "FarFieldPoint",
    "NoiseModel",
    "OptimizationResult",
    "SdpProblem",
    "SdpSolution",
    "SolvedRun",
    # Operations
    "build_channel_set",
    "compare_gain",
    "dump_scenario",
    "dump_sdpa",
    "emit_reports",
    "load_scenario",
    "optimize",
    "run_sweep",
    "solve_scenario",
    "solve_sdp",
    "truncation_grid",
    # Enums
    "ArrayKind",
    "BeampatternNormalization",
    "BeampatternSide",
    "OptimizationStatus",
    "SolverStatus",
    "SweepVariable",
    # Errors
    "HisIsacError",
    "DegenerateUserError",
    "IndefiniteResidualError",
    "InfeasibleScenarioError",
    "InvalidNoiseError",
    "MalformedProblemError",
    "ReportError",
    "ScenarioError",
    "SolverFailureError",
]
