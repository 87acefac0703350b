"""Half-wavelength discrete array with the same footprint as the HIS aperture.

Each isotropic element captures e_a = lambda^2 / (4 pi), so D elements collect
D e_a = A_T / pi of the aperture's energy one way. The amplitude sqrt(e_a) is
built into the channel vectors, which lets the unmodified SINR and optimization
code run on either array.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from his_isac.constants import ISOTROPIC_APERTURE_FACTOR
from his_isac.enums import BeampatternSide
from his_isac.models import ApertureSpec, FarFieldPoint, SolvedRun
from his_isac.sinr import beampattern_power
from his_isac.utils import linear_to_db

logger = logging.getLogger(__name__)

PEAK_SEARCH_STEP_DEG = 0.25


@dataclass(frozen=True)
class DiscreteArraySpec:
    Dx: int
    Dy: int
    wavelength: float

    def __post_init__(self):
        if self.Dx < 1 or self.Dy < 1:
            raise ValueError(f"element counts ({self.Dx}, {self.Dy}) must be positive")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength {self.wavelength} not in range (0, inf)")

    @classmethod
    def from_aperture(cls, aperture: ApertureSpec) -> "DiscreteArraySpec":
        """Fills the aperture with lambda/2-spaced elements, D_x = 2 Lx / lambda."""
        lam = aperture.wavelength
        exact_x = 2.0 * aperture.Lx / lam
        exact_y = 2.0 * aperture.Ly / lam
        Dx = max(1, round(exact_x))
        Dy = max(1, round(exact_y))
        if abs(Dx - exact_x) > 1e-9 or abs(Dy - exact_y) > 1e-9:
            logger.warning(
                f"Aperture is not a whole number of half wavelengths ({exact_x:.3f} x "
                f"{exact_y:.3f}); using {Dx} x {Dy} elements"
            )
        return cls(Dx=Dx, Dy=Dy, wavelength=lam)

    @property
    def spacing(self) -> float:
        return self.wavelength / 2.0

    @property
    def element_aperture(self) -> float:
        return ISOTROPIC_APERTURE_FACTOR * self.wavelength**2

    @property
    def D(self) -> int:
        return self.Dx * self.Dy

    def positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Element coordinates centered on the origin, row-major by x then y."""
        x = (np.arange(self.Dx) - (self.Dx - 1) / 2.0) * self.spacing
        y = (np.arange(self.Dy) - (self.Dy - 1) / 2.0) * self.spacing
        X, Y = np.meshgrid(x, y, indexing="ij")
        return X.ravel(), Y.ravel()


def discrete_channel_vector(spec: DiscreteArraySpec, point: FarFieldPoint) -> np.ndarray:
    """
    Element responses sqrt(e_a) e^{j kappa r} / (4 pi r) e^{-j kappa sin(theta) (x cos(psi) + y sin(psi))}.
    """
    kappa = 2.0 * math.pi / spec.wavelength
    x, y = spec.positions()
    s = math.sin(point.theta)
    phase = kappa * s * (x * math.cos(point.psi) + y * math.sin(point.psi))
    amplitude = (
        math.sqrt(spec.element_aperture)
        * np.exp(1j * kappa * point.r)
        / (4.0 * math.pi * point.r)
    )
    return amplitude * np.exp(-1j * phase)


class DiscreteArray:
    """ArrayModel adapter for DiscreteArraySpec."""

    def __init__(self, spec: DiscreteArraySpec):
        self.spec = spec

    @classmethod
    def from_aperture(cls, aperture: ApertureSpec) -> "DiscreteArray":
        return cls(DiscreteArraySpec.from_aperture(aperture))

    @property
    def dimension(self) -> int:
        return self.spec.D

    def channel_vector(self, point: FarFieldPoint) -> np.ndarray:
        return discrete_channel_vector(self.spec, point)


@dataclass(frozen=True)
class GainReport:
    """HIS minus discrete, in dB, for each compared metric."""

    min_sense_sinr_db: float
    comm_sinr_db: tuple[float, ...]
    tx_peak_db: float
    rx_peak_db: tuple[float, ...]


def _peak(run: SolvedRun, weights: np.ndarray, side: BeampatternSide) -> float:
    anchor = run.targets[0]
    psis = np.arange(0.0, 2.0 * math.pi, math.radians(PEAK_SEARCH_STEP_DEG))
    points = [anchor.with_psi(float(psi)) for psi in psis]
    return float(np.max(beampattern_power(weights, run.array, points, side)))


def _db_difference(a: float, b: float) -> float:
    return linear_to_db(a) - linear_to_db(b)


def compare_gain(his_run: SolvedRun, discrete_run: SolvedRun) -> GainReport:
    """
    Compares two solved runs of the same scenario.

    Beampattern peaks are searched along psi at the polar angle and range of
    the first target.

    Raises:
        ValueError: If the runs were solved for different scenarios.
    """
    if his_run.scenario_key() != discrete_run.scenario_key():
        raise ValueError("runs were solved for different scenarios and cannot be compared")

    his, disc = his_run.result, discrete_run.result
    tx = _db_difference(
        _peak(his_run, his.beamformers.W, BeampatternSide.TRANSMIT),
        _peak(discrete_run, disc.beamformers.W, BeampatternSide.TRANSMIT),
    )
    rx = tuple(
        _db_difference(
            _peak(his_run, his.beamformers.Q[:, l], BeampatternSide.RECEIVE),
            _peak(discrete_run, disc.beamformers.Q[:, l], BeampatternSide.RECEIVE),
        )
        for l in range(len(his_run.targets))
    )
    return GainReport(
        min_sense_sinr_db=_db_difference(his.gamma_r_star, disc.gamma_r_star),
        comm_sinr_db=tuple(
            _db_difference(a, b) for a, b in zip(his.comm_sinrs, disc.comm_sinrs, strict=True)
        ),
        tx_peak_db=tx,
        rx_peak_db=rx,
    )
