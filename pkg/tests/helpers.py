"""Builders shared by several test modules."""

import numpy as np

from his_isac.models import FarFieldPoint


def point(theta_deg: float, psi_deg: float, r: float = 10.0) -> FarFieldPoint:
    return FarFieldPoint.from_degrees(theta_deg, psi_deg, r)


def random_unit_columns(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    Q = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    return Q / np.linalg.norm(Q, axis=0)


def random_psd(rng: np.random.Generator, n: int, rank: int, scale: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return scale * (A @ A.conj().T)


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)
