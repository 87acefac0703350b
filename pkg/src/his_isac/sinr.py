"""Communication and sensing SINRs, plus beampattern cuts.

Every SINR is linear. Functions accept either a CovariancePack (covariance form)
or a BeamformerSet (beamformer form); both give the same value.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np

from his_isac.enums import BeampatternNormalization, BeampatternSide
from his_isac.errors import InvalidNoiseError
from his_isac.models import (
    BeamformerSet,
    ChannelSet,
    CovariancePack,
    FarFieldPoint,
    NoiseModel,
)
from his_isac.protos import ArrayModel
from his_isac.utils import linear_to_db

logger = logging.getLogger(__name__)

# Cut values more than this far below the peak are clamped.
BEAMPATTERN_FLOOR_DB = -120.0

UNIT_NORM_TOL = 1e-9

SinrSource = CovariancePack | BeamformerSet


def _quadratic(R: np.ndarray, v: np.ndarray) -> float:
    return float(np.real(v.conj() @ R @ v))


def _ratio(numerator: float, denominator: float) -> float:
    if not denominator > 0:
        raise InvalidNoiseError(denominator)
    return numerator / denominator


def comm_sinr(source: SinrSource, channel: ChannelSet, noise: NoiseModel, k: int) -> float:
    """
    SINR of user k: f_k^H R_k f_k / (f_k^H (R - R_k) f_k + sigma_c^2 / (kappa^2 Z0^2)).

    Raises:
        ValueError: If k is out of range.
        InvalidNoiseError: If the denominator is not positive.
    """
    f = channel.user(k)
    if isinstance(source, BeamformerSet):
        if source.num_users != channel.K:
            raise ValueError(
                f"beamformer set has {source.num_users} user column(s), channel has {channel.K}"
            )
        gains = np.abs(source.W.conj().T @ f) ** 2
        signal = float(gains[k])
        interference = float(np.sum(gains) - signal)
    else:
        if source.K != channel.K:
            raise ValueError(f"pack has {source.K} user covariance(s), channel has {channel.K}")
        signal = _quadratic(source.per_user[k], f)
        interference = _quadratic(source.R - source.per_user[k], f)
    return _ratio(signal, interference + noise.sigma_c_eff_sq)


def _check_filter(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=complex)
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"receive filter norm {norm} is not 1 within {UNIT_NORM_TOL}")
    return q


def sense_sinr(
    source: SinrSource, q_l: np.ndarray, channel: ChannelSet, noise: NoiseModel, l: int
) -> float:
    """
    Sensing SINR of target l for receive filter q_l.

    q_l^H G_l R G_l^H q_l over q_l^H (sum_m G_m R G_m^H - G_l R G_l^H) q_l
    plus sigma_r^2 / (kappa^2 Z0^2).

    Raises:
        ValueError: If l is out of range or q_l is not unit norm.
    """
    q = _check_filter(q_l)
    channel.target(l)
    if isinstance(source, BeamformerSet):
        g = channel.target_vectors
        illumination = np.sum(np.abs(g.conj() @ source.W) ** 2, axis=1)
        echo = np.abs(g.conj() @ q) ** 2
        terms = echo * illumination
    else:
        G = channel.target_matrices
        terms = np.array(
            [_quadratic(G_m @ source.R @ G_m.conj().T, q) for G_m in G]
        )
    signal = float(terms[l])
    interference = float(np.sum(terms) - signal)
    return _ratio(signal, interference + noise.sigma_R_sq)


def min_sense_sinr(
    source: SinrSource, Q: np.ndarray, channel: ChannelSet, noise: NoiseModel
) -> float:
    return min(
        sense_sinr(source, Q[:, l], channel, noise, l) for l in range(channel.M)
    )


def all_sinrs(
    source: SinrSource, Q: np.ndarray, channel: ChannelSet, noise: NoiseModel
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Returns (per-user comm SINRs, per-target sense SINRs)."""
    comm = tuple(comm_sinr(source, channel, noise, k) for k in range(channel.K))
    sense = tuple(
        sense_sinr(source, Q[:, l], channel, noise, l) for l in range(channel.M)
    )
    return comm, sense


def beampattern_power(
    weights: np.ndarray,
    array: ArrayModel,
    points: Sequence[FarFieldPoint],
    side: BeampatternSide,
) -> np.ndarray:
    """
    Linear beampattern values at each point.

    Transmit: ||f(p)^H W||^2 for a weight matrix W. Receive: |q^H g(p)|^2 for a
    filter q.
    """
    weights = np.asarray(weights, dtype=complex)
    vectors = np.array([array.channel_vector(p) for p in points])
    match side:
        case BeampatternSide.TRANSMIT:
            W = weights.reshape(weights.shape[0], -1)
            return np.sum(np.abs(vectors.conj() @ W) ** 2, axis=1)
        case BeampatternSide.RECEIVE:
            return np.abs(vectors @ weights.conj().ravel()) ** 2
        case _:
            raise ValueError(f"Unexpected beampattern side: {side}")


def beampattern_cut(
    weights: np.ndarray,
    array: ArrayModel,
    theta_deg: float,
    psi_deg: Sequence[float],
    r: float,
    side: BeampatternSide = BeampatternSide.TRANSMIT,
    normalization: BeampatternNormalization = BeampatternNormalization.PEAK,
    reference: float | None = None,
) -> list[tuple[float, float]]:
    """
    Beampattern along psi at fixed theta.

    Args:
        weights: Transmit matrix W (N x columns) or receive filter q (length N).
        array: Array model producing the channel vectors.
        theta_deg: Fixed polar angle of the cut, degrees.
        psi_deg: Azimuth samples, degrees; at least two.
        r: Range at which channel vectors are evaluated, meters.
        side: Transmit or receive pattern.
        normalization: NONE reports absolute power, PEAK puts the cut's own peak
            at 0 dB, REFERENCE divides by `reference` (typically the HIS peak).
        reference: Linear reference power for REFERENCE normalization.

    Returns:
        List of (psi_deg, power_db); values below the peak by more than 120 dB are
        clamped.
    """
    psi_deg = list(psi_deg)
    if len(psi_deg) < 2:
        raise ValueError(f"beampattern cut needs at least 2 points, got {len(psi_deg)}")

    points = [FarFieldPoint.from_degrees(theta_deg, psi, r) for psi in psi_deg]
    power = beampattern_power(weights, array, points, side)
    peak = float(np.max(power))

    match normalization:
        case BeampatternNormalization.NONE:
            scale = 1.0
        case BeampatternNormalization.PEAK:
            scale = peak
        case BeampatternNormalization.REFERENCE:
            if reference is None or not reference > 0:
                raise ValueError(f"reference {reference} not in range (0, inf)")
            scale = reference
        case _:
            raise ValueError(f"Unexpected normalization: {normalization}")

    if peak <= 0 or scale <= 0:
        logger.debug("Beampattern is identically zero; reporting the floor value")
        return [(float(psi), BEAMPATTERN_FLOOR_DB) for psi in psi_deg]

    floor_db = linear_to_db(peak / scale) + BEAMPATTERN_FLOOR_DB
    cut = []
    for psi, value in zip(psi_deg, power, strict=True):
        value_db = linear_to_db(float(value) / scale) if value > 0 else -math.inf
        cut.append((float(psi), max(value_db, floor_db)))
    return cut
