"""Scenario files: YAML documents describing one system configuration.

Angles are given in degrees and the power budget in mA^2; both are converted
once when the configuration is turned into library objects.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Any

import yaml

from his_isac.ao_driver import DEFAULT_EPS2, DEFAULT_MAX_ITERS, Scenario
from his_isac.conic import DEFAULT_MAX_ITER, DEFAULT_TOL
from his_isac.em_core import HisArray, build_channel_set
from his_isac.errors import ScenarioError
from his_isac.models import ApertureSpec, FarFieldPoint, NoiseModel
from his_isac.protos import ArrayModel
from his_isac.tx_beamform import DEFAULT_EPS1, DEFAULT_GALLOP_AFTER
from his_isac.utils import convert_mA2_to_A2, db_to_linear

logger = logging.getLogger(__name__)

DEFAULT_SCENARIO_NAME = "default.scenario"

DEFAULT_LX = 0.5  # meters
DEFAULT_LY = 0.5  # meters
DEFAULT_CARRIER_FREQ = 2.4e9  # Hz
DEFAULT_P_T_MA2 = 100.0
DEFAULT_GAMMA_C_DB = 5.0
DEFAULT_SEED = 0

# Reference link used to derive the default noise powers: a 0.25 m^2 aperture
# driving 100 mA^2 toward a point 10 m away.
REFERENCE_AREA = 0.25  # m^2
REFERENCE_RANGE = 10.0  # m
REFERENCE_P_T_MA2 = 100.0
REFERENCE_SENSING_SNR_DB = 40.0
REFERENCE_USER_SNR_DB = 33.0

REFERENCE_GAIN = REFERENCE_AREA / (4.0 * math.pi * REFERENCE_RANGE) ** 2

assert REFERENCE_SENSING_SNR_DB > REFERENCE_USER_SNR_DB > DEFAULT_GAMMA_C_DB, (
    "default noise must leave the shipped scenario feasible"
)


def default_equivalent_noise() -> tuple[float, float]:
    """(sigma_c_eff_sq, sigma_R_sq) of the reference link."""
    p_ref = convert_mA2_to_A2(REFERENCE_P_T_MA2)
    sigma_R_sq = p_ref * REFERENCE_GAIN**2 / db_to_linear(REFERENCE_SENSING_SNR_DB)
    sigma_c_eff_sq = p_ref * REFERENCE_GAIN / db_to_linear(REFERENCE_USER_SNR_DB)
    return sigma_c_eff_sq, sigma_R_sq


@dataclass(frozen=True)
class PointConfig:
    theta_deg: float
    psi_deg: float
    r: float

    def to_point(self) -> FarFieldPoint:
        return FarFieldPoint.from_degrees(self.theta_deg, self.psi_deg, self.r)


@dataclass(frozen=True)
class ApertureConfig:
    Lx: float = DEFAULT_LX
    Ly: float = DEFAULT_LY
    carrier_freq: float = DEFAULT_CARRIER_FREQ
    max_order: tuple[int, int] | None = None

    def to_spec(self) -> ApertureSpec:
        return ApertureSpec(
            Lx=self.Lx, Ly=self.Ly, carrier_freq=self.carrier_freq, max_order=self.max_order
        )


@dataclass(frozen=True)
class NoiseConfig:
    sigma_c_sq: float  # A^2 at the users
    sigma_r_sq: float  # A^2 at the receive surface

    @classmethod
    def default_for(cls, aperture: ApertureConfig) -> "NoiseConfig":
        sigma_c_eff_sq, sigma_R_sq = default_equivalent_noise()
        noise = NoiseModel.from_equivalent(aperture.to_spec(), sigma_c_eff_sq, sigma_R_sq)
        return cls(sigma_c_sq=noise.sigma_c_sq, sigma_r_sq=noise.sigma_r_sq)


@dataclass(frozen=True)
class SolverConfig:
    eps1: float = DEFAULT_EPS1
    eps2: float = DEFAULT_EPS2
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    gallop_after: int | None = DEFAULT_GALLOP_AFTER


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One validated scenario with every default made explicit.

    Equality is field-wise, so a dumped and re-loaded config compares equal to
    the original.
    """

    targets: tuple[PointConfig, ...]
    users: tuple[PointConfig, ...] = ()
    aperture: ApertureConfig = field(default_factory=ApertureConfig)
    P_T_mA2: float = DEFAULT_P_T_MA2
    Gamma_c_dB: float = DEFAULT_GAMMA_C_DB
    noise: NoiseConfig | None = None  # None means the reference-link default
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        try:
            self.aperture.to_spec()
        except ValueError as e:
            raise ScenarioError("aperture", str(e)) from e
        if self.noise is None:
            object.__setattr__(self, "noise", NoiseConfig.default_for(self.aperture))
        _validate(self)

    @property
    def P_T(self) -> float:
        """Power budget in A^2."""
        return convert_mA2_to_A2(self.P_T_mA2)

    @property
    def gamma_c(self) -> float:
        return db_to_linear(self.Gamma_c_dB)

    def aperture_spec(self) -> ApertureSpec:
        return self.aperture.to_spec()

    def user_points(self) -> tuple[FarFieldPoint, ...]:
        return tuple(u.to_point() for u in self.users)

    def target_points(self) -> tuple[FarFieldPoint, ...]:
        return tuple(t.to_point() for t in self.targets)

    def noise_model(self) -> NoiseModel:
        return NoiseModel.for_aperture(
            self.aperture_spec(), self.noise.sigma_c_sq, self.noise.sigma_r_sq
        )

    def to_dict(self) -> dict[str, Any]:
        aperture = asdict(self.aperture)
        if self.aperture.max_order is not None:
            aperture["max_order"] = list(self.aperture.max_order)
        return {
            "aperture": aperture,
            "users": [asdict(u) for u in self.users],
            "targets": [asdict(t) for t in self.targets],
            "P_T_mA2": self.P_T_mA2,
            "Gamma_c_dB": self.Gamma_c_dB,
            "noise": asdict(self.noise),
            "solver": asdict(self.solver),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        """
        Builds a config from a parsed document, filling defaults.

        Raises:
            ScenarioError: Naming the first field that is missing or invalid.
        """
        if not isinstance(data, dict):
            raise ScenarioError("<root>", "expected a mapping of scenario sections")
        unknown = set(data) - _TOP_LEVEL_KEYS
        if unknown:
            raise ScenarioError(sorted(unknown)[0], "unknown section")
        if "targets" not in data or not data["targets"]:
            raise ScenarioError("targets", "at least one target is required")

        aperture = _section(data, "aperture", ApertureConfig)
        noise = data.get("noise")
        return cls(
            targets=_points(data["targets"], "targets"),
            users=_points(data.get("users") or [], "users"),
            aperture=aperture,
            P_T_mA2=_number(data.get("P_T_mA2", DEFAULT_P_T_MA2), "P_T_mA2"),
            Gamma_c_dB=_number(data.get("Gamma_c_dB", DEFAULT_GAMMA_C_DB), "Gamma_c_dB"),
            noise=_section(data, "noise", NoiseConfig) if noise is not None else None,
            solver=_section(data, "solver", SolverConfig),
            seed=_integer(data.get("seed", DEFAULT_SEED), "seed"),
        )

    def build_scenario(self, array: ArrayModel | None = None) -> Scenario:
        """Channels on the given array (the HIS surface by default) plus noise and budgets."""
        array = array or HisArray(self.aperture_spec())
        channel = build_channel_set(array, self.user_points(), self.target_points())
        return Scenario(
            channel=channel, noise=self.noise_model(), P_T=self.P_T, gamma_c=self.gamma_c
        )


_TOP_LEVEL_KEYS = {
    "aperture",
    "users",
    "targets",
    "P_T_mA2",
    "Gamma_c_dB",
    "noise",
    "solver",
    "seed",
}


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ScenarioError(name, f"expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(name, f"expected an integer, got {value!r}")
    return value


def _points(entries: Any, name: str) -> tuple[PointConfig, ...]:
    if not isinstance(entries, list):
        raise ScenarioError(name, "expected a list of points")
    points = []
    for i, entry in enumerate(entries):
        where = f"{name}[{i}]"
        if not isinstance(entry, dict) or set(entry) != {"theta_deg", "psi_deg", "r"}:
            raise ScenarioError(where, "expected keys theta_deg, psi_deg and r")
        points.append(
            PointConfig(
                theta_deg=_number(entry["theta_deg"], f"{where}.theta_deg"),
                psi_deg=_number(entry["psi_deg"], f"{where}.psi_deg"),
                r=_number(entry["r"], f"{where}.r"),
            )
        )
    return tuple(points)


def _section(data: dict[str, Any], name: str, cls):
    raw = data.get(name) or {}
    if not isinstance(raw, dict):
        raise ScenarioError(name, "expected a mapping")
    known = cls.__dataclass_fields__
    for key in raw:
        if key not in known:
            raise ScenarioError(f"{name}.{key}", "unknown field")
    values = {}
    for key, value in raw.items():
        where = f"{name}.{key}"
        match key:
            case "max_order":
                if value is not None:
                    if not isinstance(value, list) or len(value) != 2:
                        raise ScenarioError(where, "expected [n_x, n_y] or null")
                    value = tuple(_integer(v, where) for v in value)
            case "max_iters" | "max_iter":
                value = _integer(value, where)
            case "gallop_after":
                value = None if value is None else _integer(value, where)
            case _:
                value = _number(value, where)
        values[key] = value
    try:
        return cls(**values)
    except TypeError as e:
        raise ScenarioError(name, str(e)) from e


def _validate(config: ScenarioConfig):
    if not config.targets:
        raise ScenarioError("targets", "at least one target is required")
    if not math.isfinite(config.Gamma_c_dB):
        raise ScenarioError("Gamma_c_dB", f"{config.Gamma_c_dB} is not finite")
    if not config.P_T_mA2 > 0:
        raise ScenarioError("P_T_mA2", f"{config.P_T_mA2} not in range (0, inf)")
    for name, group in (("users", config.users), ("targets", config.targets)):
        for i, point in enumerate(group):
            try:
                point.to_point()
            except ValueError as e:
                raise ScenarioError(f"{name}[{i}]", str(e)) from e
    if config.noise.sigma_c_sq < 0 or not config.noise.sigma_r_sq > 0:
        raise ScenarioError(
            "noise", "sigma_c_sq must be nonnegative and sigma_r_sq positive"
        )
    solver = config.solver
    if not solver.eps1 > 0 or not solver.eps2 > 0:
        raise ScenarioError("solver", "eps1 and eps2 must be positive")
    if not solver.tol > 0:
        raise ScenarioError("solver.tol", f"{solver.tol} not in range (0, inf)")
    if solver.max_iters < 1 or solver.max_iter < 1:
        raise ScenarioError("solver", "iteration caps must be at least 1")
    if solver.gallop_after is not None and solver.gallop_after < 1:
        raise ScenarioError("solver.gallop_after", f"{solver.gallop_after} not in range [1, inf)")


def parse_scenario(text: str) -> ScenarioConfig:
    """Parses YAML text into a validated config."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ScenarioError("<yaml>", problem, line=line) from e
    return ScenarioConfig.from_dict(data if data is not None else {})


def load_scenario(path: str | Path) -> ScenarioConfig:
    """
    Reads and validates a scenario file.

    Raises:
        ScenarioError: On a parse error (with line number) or an invalid field.
        OSError: If the file cannot be read.
    """
    path = Path(path)
    config = parse_scenario(path.read_text(encoding="utf-8"))
    logger.debug(
        f"Loaded scenario {path} with {len(config.users)} user(s) and "
        f"{len(config.targets)} target(s)"
    )
    return config


def dump_scenario(config: ScenarioConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(
        yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None),
        encoding="utf-8",
    )
    return path


def default_scenario_text() -> str:
    return files("his_isac").joinpath("data", DEFAULT_SCENARIO_NAME).read_text(encoding="utf-8")


def load_default_scenario() -> ScenarioConfig:
    """The shipped two-user, two-target scenario."""
    return parse_scenario(default_scenario_text())
