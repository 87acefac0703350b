"""Wavenumber-domain channel synthesis for a continuous aperture.

The aperture current is expanded on the Fourier basis

    Phi_n(x, y) = exp(-j 2 pi (n_x (x - Lx/2) / Lx + n_y (y - Ly/2) / Ly)) / sqrt(A_T)

over D = [-Lx/2, Lx/2] x [-Ly/2, Ly/2]. Projecting the far-field Green's function
e^{j kappa r} / (4 pi r) * exp(-j kappa sin(theta) (x cos(psi) + y sin(psi)))
onto Phi_n gives the closed-form coefficients evaluated here.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np

from his_isac.models import (
    ApertureSpec,
    ChannelSet,
    FarFieldPoint,
    WavenumberGrid,
)
from his_isac.protos import ArrayModel
from his_isac.utils import sinc

logger = logging.getLogger(__name__)

MIN_ORACLE_RESOLUTION = 64
MIN_NOISE_GRID = 16
NOISE_CHUNK_SIZE = 4096


def axis_orders(aperture: ApertureSpec) -> tuple[int, int]:
    """Largest |n_x| and |n_y| kept by the truncation rule."""
    ceil_x = math.ceil(aperture.Lx / aperture.wavelength - 1e-9)
    ceil_y = math.ceil(aperture.Ly / aperture.wavelength - 1e-9)
    if aperture.max_order is None:
        return ceil_x, ceil_y

    max_x, max_y = aperture.max_order
    if max_x < ceil_x or max_y < ceil_y:
        logger.warning(
            f"Truncation order {aperture.max_order} is below the radiating band "
            f"({ceil_x}, {ceil_y}); channel energy will be lost"
        )
    return max_x, max_y


def truncation_grid(aperture: ApertureSpec) -> WavenumberGrid:
    """
    Builds the rectangular set of Fourier orders that covers the radiating band.

    Per axis the orders run from -ceil(L/lambda) to +ceil(L/lambda), so the grid
    always holds at least (2 Lx/lambda + 1)(2 Ly/lambda + 1) entries.
    """
    max_x, max_y = axis_orders(aperture)
    orders = tuple(
        (n_x, n_y)
        for n_x in range(-max_x, max_x + 1)
        for n_y in range(-max_y, max_y + 1)
    )
    return WavenumberGrid(orders=orders)


def _axis_wavenumbers(
    aperture: ApertureSpec, n_x: np.ndarray, n_y: np.ndarray, point: FarFieldPoint
) -> tuple[np.ndarray, np.ndarray]:
    kappa = aperture.wavenumber
    lam = aperture.wavelength
    s = math.sin(point.theta)
    kx = kappa * (s * math.cos(point.psi) + lam * n_x / aperture.Lx)
    ky = kappa * (s * math.sin(point.psi) + lam * n_y / aperture.Ly)
    return kx, ky


def _fourier_coeffs(
    aperture: ApertureSpec, n_x: np.ndarray, n_y: np.ndarray, point: FarFieldPoint
) -> np.ndarray:
    kx, ky = _axis_wavenumbers(aperture, n_x, n_y, point)
    amplitude = (
        np.exp(1j * aperture.wavenumber * point.r)
        * math.sqrt(aperture.area)
        / (4.0 * math.pi * point.r)
    )
    # e^{j pi n} is exactly +-1; computing it from the parity avoids rounding.
    parity = np.where((n_x + n_y) % 2 == 0, 1.0, -1.0)
    return amplitude * parity * sinc(kx * aperture.Lx / 2) * sinc(ky * aperture.Ly / 2)


def fourier_green_coeff(
    aperture: ApertureSpec, order: tuple[int, int], point: FarFieldPoint
) -> complex:
    """
    Closed-form Fourier coefficient of the far-field Green's function.

    Args:
        aperture: Aperture geometry and carrier.
        order: Fourier order (n_x, n_y).
        point: Far-field observation point.

    Returns:
        (e^{j kappa r} sqrt(A_T) / (4 pi r)) e^{j pi (n_x + n_y)}
        sinc(kappa_x^n Lx / 2) sinc(kappa_y^n Ly / 2)
    """
    n_x = np.array([order[0]], dtype=float)
    n_y = np.array([order[1]], dtype=float)
    return complex(_fourier_coeffs(aperture, n_x, n_y, point)[0])


def channel_vector(
    aperture: ApertureSpec, grid: WavenumberGrid, point: FarFieldPoint
) -> np.ndarray:
    """Conjugated Fourier coefficients in grid order, so f = [f^1 ... f^N]^H."""
    return np.conj(_fourier_coeffs(aperture, grid.nx, grid.ny, point))


class HisArray:
    """Continuous-aperture surface represented by its truncated Fourier basis."""

    def __init__(self, aperture: ApertureSpec, grid: WavenumberGrid | None = None):
        self.aperture = aperture
        self.grid = grid or truncation_grid(aperture)

    @property
    def dimension(self) -> int:
        return self.grid.N

    @property
    def energy_scale(self) -> float:
        """Aperture energy of a unit-range point, A_T / (4 pi)^2."""
        return self.aperture.area / (4.0 * math.pi) ** 2

    def channel_vector(self, point: FarFieldPoint) -> np.ndarray:
        return channel_vector(self.aperture, self.grid, point)


def _check_vectors(kind: str, vectors: np.ndarray):
    """F_k = f_k f_k^H and G_m = g_m g_m^H are rank one only for finite, nonzero rows."""
    for i, v in enumerate(vectors):
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{kind}[{i}] channel vector is not finite")
        if not np.vdot(v, v).real > 0:
            raise ValueError(f"{kind}[{i}] channel vector is zero")


def build_channel_set(
    array: ArrayModel,
    users: Sequence[FarFieldPoint],
    targets: Sequence[FarFieldPoint],
) -> ChannelSet:
    """
    Synthesizes f_k for every user and g_m for every target on the given array.

    Transmit and receive surfaces are co-located, so g_m reuses the transmit
    closed form at the target position.

    Raises:
        ValueError: If there are no targets, or a channel vector is zero or
            not finite.
    """
    if not targets:
        raise ValueError("at least one target is required")
    n = array.dimension
    user_vectors = np.array(
        [array.channel_vector(p) for p in users], dtype=complex
    ).reshape(len(users), n)
    target_vectors = np.array([array.channel_vector(p) for p in targets], dtype=complex)
    _check_vectors("users", user_vectors)
    _check_vectors("targets", target_vectors)
    logger.debug(
        f"Built channel set with K={len(users)}, M={len(targets)}, dimension={n}"
    )
    return ChannelSet(user_vectors=user_vectors, target_vectors=target_vectors)


def _far_field_green(
    aperture: ApertureSpec, x: np.ndarray, y: np.ndarray, point: FarFieldPoint
) -> np.ndarray:
    kappa = aperture.wavenumber
    s = math.sin(point.theta)
    phase = kappa * s * (x * math.cos(point.psi) + y * math.sin(point.psi))
    return np.exp(1j * kappa * point.r) / (4.0 * math.pi * point.r) * np.exp(-1j * phase)


def _gauss_legendre_mesh(
    aperture: ApertureSpec, resolution: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(resolution)
    x = 0.5 * aperture.Lx * nodes
    y = 0.5 * aperture.Ly * nodes
    wx = 0.5 * aperture.Lx * weights
    wy = 0.5 * aperture.Ly * weights
    X, Y = np.meshgrid(x, y, indexing="ij")
    return X, Y, np.outer(wx, wy)


def green_energy_oracle(
    aperture: ApertureSpec, point: FarFieldPoint, quadrature_resolution: int = 128
) -> float:
    """
    Numerically integrates |G(p', p)|^2 over the aperture.

    Raises:
        ValueError: If quadrature_resolution is below 64 samples per axis.
    """
    if quadrature_resolution < MIN_ORACLE_RESOLUTION:
        raise ValueError(
            f"quadrature_resolution {quadrature_resolution} not in range "
            f"[{MIN_ORACLE_RESOLUTION}, inf)"
        )
    X, Y, W = _gauss_legendre_mesh(aperture, quadrature_resolution)
    green = _far_field_green(aperture, X, Y, point)
    return float(np.sum(W * np.abs(green) ** 2))


def green_fourier_quadrature(
    aperture: ApertureSpec,
    order: tuple[int, int],
    point: FarFieldPoint,
    quadrature_resolution: int = 128,
) -> complex:
    """Brute-force 2-D quadrature of the Fourier integral behind fourier_green_coeff."""
    if quadrature_resolution < MIN_ORACLE_RESOLUTION:
        raise ValueError(
            f"quadrature_resolution {quadrature_resolution} not in range "
            f"[{MIN_ORACLE_RESOLUTION}, inf)"
        )
    X, Y, W = _gauss_legendre_mesh(aperture, quadrature_resolution)
    n_x, n_y = order
    basis = np.exp(
        -2j
        * math.pi
        * (n_x * (X - aperture.Lx / 2) / aperture.Lx + n_y * (Y - aperture.Ly / 2) / aperture.Ly)
    ) / math.sqrt(aperture.area)
    return complex(np.sum(W * _far_field_green(aperture, X, Y, point) * basis))


def _axis_basis(n: np.ndarray, samples: int) -> np.ndarray:
    """
    Per-axis basis factors exp(-j 2 pi n (x - L/2) / L) at cell midpoints.

    Uses s = (x + L/2) / L in [0, 1); the shift by one period leaves the factor
    unchanged for integer n. Shape is (orders, samples).
    """
    s = (np.arange(samples) + 0.5) / samples
    return np.exp(-2j * math.pi * np.outer(n, s))


def fourier_basis_gram(
    aperture: ApertureSpec, grid: WavenumberGrid, resolution: int = 256
) -> np.ndarray:
    """
    Midpoint-rule Gram matrix of the Fourier basis over the aperture.

    The basis separates into x and y factors, so the N x N Gram matrix is built
    from the two one-dimensional inner-product tables.
    """
    if resolution < 2:
        raise ValueError(f"resolution {resolution} not in range [2, inf)")
    nx_values = np.unique(grid.nx)
    ny_values = np.unique(grid.ny)
    bx = _axis_basis(nx_values, resolution)
    by = _axis_basis(ny_values, resolution)
    # Each axis integrates (1/L) sum |.|^2 dx = 1; the 1/sqrt(A_T) prefactor and the
    # cell areas cancel into the per-axis 1/resolution weights.
    gx = bx @ bx.conj().T / resolution
    gy = by @ by.conj().T / resolution
    ix = np.searchsorted(nx_values, grid.nx)
    iy = np.searchsorted(ny_values, grid.ny)
    return gx[np.ix_(ix, ix)] * gy[np.ix_(iy, iy)]


def project_noise_samples(
    grid: WavenumberGrid,
    sigma_r_sq: float,
    num_samples: int,
    seed: int,
    aperture: ApertureSpec | None = None,
) -> np.ndarray:
    """
    Monte Carlo estimate of the covariance of white surface noise seen by the basis.

    Draws circularly symmetric complex Gaussian fields on a uniform cell grid
    (per-cell variance sigma_r_sq / dA), projects each field onto the N Fourier
    basis functions and returns the N x N sample covariance. Its expectation is
    sigma_r_sq * I_N.

    Args:
        grid: Fourier orders to project onto.
        sigma_r_sq: Noise power density of the surface field.
        num_samples: Number of independent noise fields.
        seed: Seed for numpy's default generator.
        aperture: Surface geometry; a unit square when omitted (the result does
            not depend on it).
    """
    if num_samples < 1:
        raise ValueError(f"num_samples {num_samples} not in range [1, inf)")
    if sigma_r_sq < 0:
        raise ValueError(f"sigma_r_sq {sigma_r_sq} not in range [0, inf)")

    area = aperture.area if aperture is not None else 1.0
    max_n = int(max(np.max(np.abs(grid.nx)), np.max(np.abs(grid.ny))))
    cells = max(2 * max_n + 2, MIN_NOISE_GRID)
    cell_area = area / cells**2

    bx = _axis_basis(grid.nx, cells)
    by = _axis_basis(grid.ny, cells)
    # Phi[n, (ix, iy)] flattened row-major, including 1/sqrt(A_T).
    phi = (bx[:, :, None] * by[:, None, :]).reshape(grid.N, cells * cells) / math.sqrt(area)

    rng = np.random.default_rng(seed)
    std = math.sqrt(sigma_r_sq / cell_area / 2.0)
    covariance = np.zeros((grid.N, grid.N), dtype=complex)
    remaining = num_samples
    while remaining > 0:
        batch = min(remaining, NOISE_CHUNK_SIZE)
        field = std * (
            rng.standard_normal((batch, cells * cells))
            + 1j * rng.standard_normal((batch, cells * cells))
        )
        projected = field @ phi.T * cell_area
        covariance += projected.T @ projected.conj()
        remaining -= batch

    logger.debug(
        f"Projected {num_samples} noise field(s) on a {cells}x{cells} grid onto {grid.N} orders"
    )
    return covariance / num_samples
