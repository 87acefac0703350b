from dataclasses import replace

import numpy as np
import pytest

from his_isac.em_core import HisArray, build_channel_set
from his_isac.models import ApertureSpec, ChannelSet, NoiseModel
from his_isac.scenario_config import ScenarioConfig, load_default_scenario


@pytest.fixture
def aperture() -> ApertureSpec:
    """0.5 m x 0.5 m surface at 2.4 GHz."""
    return ApertureSpec(Lx=0.5, Ly=0.5, carrier_freq=2.4e9)


@pytest.fixture
def his_array(aperture) -> HisArray:
    return HisArray(aperture)


@pytest.fixture
def default_config() -> ScenarioConfig:
    """Two users at psi=180/270 and two targets at psi=90/45, all at theta=30, r=10."""
    return load_default_scenario()


@pytest.fixture
def single_target_config(default_config) -> ScenarioConfig:
    """
    The default users with only the psi=90 target.

    Both users and the target sit exactly on Fourier orders of the 0.5 m surface,
    so their channels are mutually orthogonal.
    """
    return replace(default_config, targets=default_config.targets[:1])


@pytest.fixture
def noise(default_config) -> NoiseModel:
    return default_config.noise_model()


@pytest.fixture
def channel(his_array, default_config) -> ChannelSet:
    return build_channel_set(
        his_array, default_config.user_points(), default_config.target_points()
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
