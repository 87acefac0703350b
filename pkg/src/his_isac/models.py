import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from his_isac.constants import FREE_SPACE_IMPEDANCE, SPEED_OF_LIGHT
from his_isac.enums import OptimizationStatus
from his_isac.utils import min_eigenvalue

if TYPE_CHECKING:
    from his_isac.protos import ArrayModel


@dataclass(frozen=True)
class ApertureSpec:
    """
    Rectangular aperture of Lx by Ly meters centered at the origin of the xy-plane.

    Transmit and receive surfaces share this geometry and are co-located, so the
    far-field angles of a point are the same on both sides.
    """

    Lx: float  # Extent along x, meters.
    Ly: float  # Extent along y, meters.
    carrier_freq: float  # Hz.
    max_order: tuple[int, int] | None = None  # Overrides the ceiling truncation rule.

    def __post_init__(self):
        if not self.Lx > 0:
            raise ValueError(f"Lx {self.Lx} not in range (0, inf)")
        if not self.Ly > 0:
            raise ValueError(f"Ly {self.Ly} not in range (0, inf)")
        if not self.carrier_freq > 0:
            raise ValueError(f"carrier_freq {self.carrier_freq} not in range (0, inf)")
        if self.max_order is not None:
            object.__setattr__(self, "max_order", tuple(int(n) for n in self.max_order))
            if min(self.max_order) < 0:
                raise ValueError(f"max_order {self.max_order} must be nonnegative")

    @classmethod
    def square(
        cls,
        area: float,
        carrier_freq: float,
        max_order: tuple[int, int] | None = None,
    ) -> "ApertureSpec":
        side = math.sqrt(area)
        return cls(Lx=side, Ly=side, carrier_freq=carrier_freq, max_order=max_order)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def impedance(self) -> float:
        return FREE_SPACE_IMPEDANCE

    @property
    def noise_scale(self) -> float:
        """kappa^2 Z0^2, the factor between surface noise and equivalent noise."""
        return (self.wavenumber * self.impedance) ** 2


@dataclass(frozen=True)
class FarFieldPoint:
    """Position in spherical coordinates; psi is wrapped into [0, 2 pi)."""

    r: float
    theta: float
    psi: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r {self.r} not in range (0, inf)")
        if not 0.0 <= self.theta < math.pi / 2:
            raise ValueError(f"theta {self.theta} not in range [0, pi/2)")
        object.__setattr__(self, "psi", float(self.psi) % (2.0 * math.pi))

    @classmethod
    def from_degrees(cls, theta_deg: float, psi_deg: float, r: float) -> "FarFieldPoint":
        return cls(r=r, theta=math.radians(theta_deg), psi=math.radians(psi_deg))

    def with_theta(self, theta: float) -> "FarFieldPoint":
        return FarFieldPoint(r=self.r, theta=theta, psi=self.psi)

    def with_psi(self, psi: float) -> "FarFieldPoint":
        return FarFieldPoint(r=self.r, theta=self.theta, psi=psi)


@dataclass(frozen=True)
class WavenumberGrid:
    """Fourier orders (n_x, n_y), row-major by n_x then n_y."""

    orders: tuple[tuple[int, int], ...]

    @property
    def N(self) -> int:
        return len(self.orders)

    @property
    def nx(self) -> np.ndarray:
        return np.array([o[0] for o in self.orders], dtype=float)

    @property
    def ny(self) -> np.ndarray:
        return np.array([o[1] for o in self.orders], dtype=float)

    def index_of(self, order: tuple[int, int]) -> int:
        return self.orders.index(tuple(order))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """
    Channel vectors of K users (rows of user_vectors) and M targets.

    Both arrays have one row per point and one column per aperture dimension.
    """

    user_vectors: np.ndarray
    target_vectors: np.ndarray

    def __post_init__(self):
        users = np.atleast_2d(np.asarray(self.user_vectors, dtype=complex))
        targets = np.atleast_2d(np.asarray(self.target_vectors, dtype=complex))
        if users.size == 0:
            users = np.zeros((0, targets.shape[1]), dtype=complex)
        if targets.shape[0] == 0:
            raise ValueError("ChannelSet needs at least one target")
        if users.shape[1] != targets.shape[1]:
            raise ValueError(
                f"user dimension {users.shape[1]} does not match target dimension {targets.shape[1]}"
            )
        object.__setattr__(self, "user_vectors", users)
        object.__setattr__(self, "target_vectors", targets)

    @property
    def K(self) -> int:
        return self.user_vectors.shape[0]

    @property
    def M(self) -> int:
        return self.target_vectors.shape[0]

    @property
    def N(self) -> int:
        return self.target_vectors.shape[1]

    @property
    def target_matrices(self) -> np.ndarray:
        """G_m = g_m g_m^H stacked along the first axis."""
        g = self.target_vectors
        return g[:, :, None] * g[:, None, :].conj()

    def user(self, k: int) -> np.ndarray:
        if not 0 <= k < self.K:
            raise ValueError(f"k {k} not in range 0..{self.K - 1}")
        return self.user_vectors[k]

    def target(self, m: int) -> np.ndarray:
        if not 0 <= m < self.M:
            raise ValueError(f"l {m} not in range 0..{self.M - 1}")
        return self.target_vectors[m]


@dataclass(frozen=True)
class NoiseModel:
    """
    Noise powers at the users (sigma_c_sq) and at the receive surface (sigma_r_sq).

    Both enter the SINRs divided by kappa^2 Z0^2; those equivalent values are
    exposed as sigma_c_eff_sq and sigma_R_sq.
    """

    sigma_c_sq: float
    sigma_r_sq: float
    scale: float  # kappa^2 Z0^2

    def __post_init__(self):
        if self.sigma_c_sq < 0:
            raise ValueError(f"sigma_c_sq {self.sigma_c_sq} not in range [0, inf)")
        if self.sigma_r_sq < 0:
            raise ValueError(f"sigma_r_sq {self.sigma_r_sq} not in range [0, inf)")
        if not self.scale > 0:
            raise ValueError(f"scale {self.scale} not in range (0, inf)")

    @classmethod
    def for_aperture(
        cls, aperture: ApertureSpec, sigma_c_sq: float, sigma_r_sq: float
    ) -> "NoiseModel":
        return cls(sigma_c_sq=sigma_c_sq, sigma_r_sq=sigma_r_sq, scale=aperture.noise_scale)

    @classmethod
    def from_equivalent(
        cls, aperture: ApertureSpec, sigma_c_eff_sq: float, sigma_R_sq: float
    ) -> "NoiseModel":
        scale = aperture.noise_scale
        return cls(sigma_c_sq=sigma_c_eff_sq * scale, sigma_r_sq=sigma_R_sq * scale, scale=scale)

    @property
    def sigma_c_eff_sq(self) -> float:
        return self.sigma_c_sq / self.scale

    @property
    def sigma_R_sq(self) -> float:
        return self.sigma_r_sq / self.scale


@dataclass(frozen=True, eq=False)
class CovariancePack:
    """Total transmit covariance R and the per-user covariances R_1..R_K."""

    R: np.ndarray
    per_user: np.ndarray  # shape (K, N, N)

    def __post_init__(self):
        R = np.asarray(self.R, dtype=complex)
        per_user = np.asarray(self.per_user, dtype=complex)
        if per_user.size == 0:
            per_user = np.zeros((0,) + R.shape, dtype=complex)
        if per_user.shape[1:] != R.shape:
            raise ValueError(f"per-user shape {per_user.shape} does not match R {R.shape}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "per_user", per_user)

    @property
    def K(self) -> int:
        return self.per_user.shape[0]

    @property
    def residual(self) -> np.ndarray:
        """R minus the sum of the per-user covariances."""
        return self.R - self.per_user.sum(axis=0)

    def scaled(self, c: float) -> "CovariancePack":
        return CovariancePack(R=c * self.R, per_user=c * self.per_user)

    def violations(self, P_T: float, rtol: float = 1e-8) -> list[str]:
        """Lists the CovariancePack invariants this pack breaks (empty if none)."""
        trace = float(np.real(np.trace(self.R)))
        floor = -rtol * max(trace, 1e-300)
        problems = []
        if min_eigenvalue(self.R) < floor:
            problems.append("R is not PSD")
        for k, R_k in enumerate(self.per_user):
            if min_eigenvalue(R_k) < floor:
                problems.append(f"R_{k} is not PSD")
        if self.K and min_eigenvalue(self.residual) < floor:
            problems.append("R - sum(R_k) is not PSD")
        if trace > P_T + rtol * max(P_T, 1e-300):
            problems.append(f"tr(R)={trace:.6e} exceeds P_T={P_T:.6e}")
        return problems


@dataclass(frozen=True, eq=False)
class BeamformerSet:
    """Transmit matrix W = [W_c | W_r] and receive filters Q (one column per target)."""

    W: np.ndarray
    Q: np.ndarray
    num_users: int

    def __post_init__(self):
        W = np.asarray(self.W, dtype=complex)
        Q = np.asarray(self.Q, dtype=complex)
        if W.ndim != 2 or Q.ndim != 2:
            raise ValueError("W and Q must be two-dimensional")
        if W.shape[0] != Q.shape[0]:
            raise ValueError(f"W has {W.shape[0]} rows but Q has {Q.shape[0]}")
        if not 0 <= self.num_users <= W.shape[1]:
            raise ValueError(f"num_users {self.num_users} not in range 0..{W.shape[1]}")
        norms = np.linalg.norm(Q, axis=0)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError(f"receive filters must have unit norm, got {norms}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "Q", Q)

    @property
    def W_c(self) -> np.ndarray:
        return self.W[:, : self.num_users]

    @property
    def W_r(self) -> np.ndarray:
        return self.W[:, self.num_users :]

    @property
    def power(self) -> float:
        return float(np.linalg.norm(self.W, "fro") ** 2)

    def covariances(self) -> CovariancePack:
        """R = W W^H and R_k = w_k w_k^H."""
        W_c = self.W_c
        per_user = W_c.T[:, :, None] * W_c.T[:, None, :].conj()
        return CovariancePack(R=self.W @ self.W.conj().T, per_user=per_user)


@dataclass(frozen=True, eq=False)
class BisectionBracket:
    gamma_start: float
    gamma_end: float
    history: tuple[tuple[float, float], ...] = ()  # (gamma_r probed, t)
    start_pack: CovariancePack | None = None  # covariance from the feasible probe at gamma_start
    solves: int = 0

    def __post_init__(self):
        if self.gamma_start > self.gamma_end:
            raise ValueError(
                f"gamma_start {self.gamma_start} exceeds gamma_end {self.gamma_end}"
            )

    @property
    def width(self) -> float:
        return self.gamma_end - self.gamma_start


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    gamma_r_star: float
    sdp_calls: int
    abs_calls: int
    bisection_calls: int
    wall_time: float
    min_comm_sinr: float | None = None  # None when there are no users


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    beamformers: BeamformerSet
    covariances: CovariancePack
    gamma_r_star: float
    iteration_trace: tuple[IterationRecord, ...]
    status: OptimizationStatus
    sense_sinrs: tuple[float, ...] = field(default=())
    comm_sinrs: tuple[float, ...] = field(default=())

    @property
    def sdp_calls(self) -> int:
        return sum(record.sdp_calls for record in self.iteration_trace)


@dataclass(frozen=True, eq=False)
class SolvedRun:
    """An optimization result together with the array and scenario that produced it."""

    array: "ArrayModel"
    users: tuple[FarFieldPoint, ...]
    targets: tuple[FarFieldPoint, ...]
    noise: NoiseModel
    P_T: float
    gamma_c: float
    result: OptimizationResult

    def scenario_key(self) -> tuple:
        """Everything two runs must share to be comparable; the array is excluded."""
        return (self.users, self.targets, self.noise, self.P_T, self.gamma_c)
