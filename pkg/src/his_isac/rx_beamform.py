"""Per-target receive filters maximizing the sensing SINR.

For target l the SINR is the generalized Rayleigh quotient q^H B q / q^H C q with

    B = G_l R G_l^H,    C = sum_m G_m R G_m^H - B + sigma_R^2 I,

maximized by the principal eigenvector of C^-1 B. Both matrices are divided by
sigma_R^2 before solving; the quotient does not change.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from his_isac.models import ChannelSet, CovariancePack, NoiseModel
from his_isac.utils import fix_phase, hermitian_part, min_eigenvalue

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RayleighPair:
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        scale = max(float(np.max(np.abs(self.B), initial=0.0)), 1.0)
        if min_eigenvalue(self.B) < -1e-12 * scale:
            raise ValueError("B must be positive semidefinite")
        if not min_eigenvalue(self.C) > 0:
            raise ValueError("C must be positive definite")

    def quotient(self, q: np.ndarray) -> float:
        return float(np.real(q.conj() @ self.B @ q) / np.real(q.conj() @ self.C @ q))


@dataclass(frozen=True, eq=False)
class ReceiveFilter:
    q: np.ndarray
    sinr: float
    degenerate: bool = False


def _covariance(transmit: np.ndarray | CovariancePack) -> np.ndarray:
    if isinstance(transmit, CovariancePack):
        return transmit.R
    W = np.asarray(transmit, dtype=complex)
    return W @ W.conj().T


def rayleigh_pair(
    transmit: np.ndarray | CovariancePack,
    channel: ChannelSet,
    noise: NoiseModel,
    l: int,
    normalized: bool = False,
) -> RayleighPair:
    """
    Builds (B, C) for target l from W (or a covariance pack).

    With normalized=True both matrices are divided by sigma_R^2.
    """
    g_l = channel.target(l)
    R = _covariance(transmit)
    g = channel.target_vectors
    illumination = np.real(np.einsum("mi,ij,mj->m", g.conj(), R, g))
    outer = g[:, :, None] * g[:, None, :].conj()
    # G_m R G_m^H = (g_m^H R g_m) g_m g_m^H
    echoes = illumination[:, None, None] * outer
    B = echoes[l]
    C = echoes.sum(axis=0) - B + noise.sigma_R_sq * np.eye(g_l.shape[0])
    if normalized:
        B = B / noise.sigma_R_sq
        C = C / noise.sigma_R_sq
    return RayleighPair(B=hermitian_part(B), C=hermitian_part(C))


def _degenerate(channel: ChannelSet, l: int) -> ReceiveFilter:
    g_l = channel.target(l)
    logger.debug(f"Target {l} receives no transmit power; returning the matched filter")
    return ReceiveFilter(q=fix_phase(g_l / np.linalg.norm(g_l)), sinr=0.0, degenerate=True)


def _check_noise(noise: NoiseModel):
    if not noise.sigma_R_sq > 0:
        raise ValueError(f"sigma_R_sq {noise.sigma_R_sq} not in range (0, inf)")


def _illumination(transmit, channel: ChannelSet, l: int) -> float:
    g_l = channel.target(l)
    return float(np.real(g_l.conj() @ _covariance(transmit) @ g_l))


def receive_filter(
    transmit: np.ndarray | CovariancePack,
    channel: ChannelSet,
    noise: NoiseModel,
    l: int,
) -> ReceiveFilter:
    """
    Principal generalized eigenvector of the pencil (B, C) for target l.

    The pencil is Hermitian-definite, so scipy solves it through a Cholesky
    factor of C instead of forming C^-1 B.

    Returns:
        Unit-norm filter (largest entry real and nonnegative) and its SINR. If B
        is zero the matched filter is returned with SINR 0 and degenerate=True.
    """
    _check_noise(noise)
    if _illumination(transmit, channel, l) <= 0:
        return _degenerate(channel, l)

    pair = rayleigh_pair(transmit, channel, noise, l, normalized=True)
    n = pair.B.shape[0]
    _, vecs = scipy.linalg.eigh(pair.B, pair.C, subset_by_index=[n - 1, n - 1])
    q = vecs[:, 0]
    q = fix_phase(q / np.linalg.norm(q))
    return ReceiveFilter(q=q, sinr=pair.quotient(q))


def receive_filter_closed_form(
    transmit: np.ndarray | CovariancePack,
    channel: ChannelSet,
    noise: NoiseModel,
    l: int,
) -> ReceiveFilter:
    """
    MVDR form of the receive filter: q is proportional to C^-1 g_l.

    B has rank one, so the maximal quotient is (g_l^H R g_l) g_l^H C^-1 g_l.

    Raises:
        ValueError: If sigma_R^2 is zero (C may then be singular).
    """
    _check_noise(noise)
    gain = _illumination(transmit, channel, l)
    if gain <= 0:
        return _degenerate(channel, l)

    g_l = channel.target(l)
    pair = rayleigh_pair(transmit, channel, noise, l, normalized=True)
    factor = scipy.linalg.cho_factor(pair.C)
    x = scipy.linalg.cho_solve(factor, g_l)
    q = fix_phase(x / np.linalg.norm(x))
    sinr = gain / noise.sigma_R_sq * float(np.real(g_l.conj() @ x))
    return ReceiveFilter(q=q, sinr=sinr)


def receive_filters(
    transmit: np.ndarray | CovariancePack, channel: ChannelSet, noise: NoiseModel
) -> tuple[np.ndarray, tuple[float, ...]]:
    """Solves every target; returns Q (N x M) and the per-target SINRs."""
    results = [receive_filter(transmit, channel, noise, l) for l in range(channel.M)]
    Q = np.array([r.q for r in results]).T
    return Q, tuple(r.sinr for r in results)


def matched_filters(channel: ChannelSet) -> np.ndarray:
    """q_l = g_l / ||g_l||, the starting filters of the alternating loop."""
    g = channel.target_vectors
    return (g / np.linalg.norm(g, axis=1, keepdims=True)).T
