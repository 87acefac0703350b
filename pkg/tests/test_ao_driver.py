import logging
from dataclasses import replace
from unittest.mock import MagicMock

import numpy as np
import pytest
from helpers import point

from his_isac.ao_driver import Scenario, _Round, optimize
from his_isac.em_core import build_channel_set
from his_isac.enums import OptimizationStatus
from his_isac.scenario_config import PointConfig
from his_isac.sinr import all_sinrs
from his_isac.tx_beamform import CountingSolver


def assert_ascent(result):
    levels = [record.gamma_r_star for record in result.iteration_trace]
    for before, after in zip(levels, levels[1:], strict=False):
        assert after >= before * (1.0 - 1e-6)


class TestOptimizeArguments:
    @pytest.mark.parametrize(
        "kwargs,match",
        [({"eps1": 0.0}, "eps1"), ({"eps2": -1.0}, "eps2"), ({"max_iters": 0}, "max_iters")],
    )
    def test_invalid_arguments(self, single_target_config, kwargs, match):
        with pytest.raises(ValueError, match=match):
            optimize(single_target_config.build_scenario(), **kwargs)


class TestOptimize:
    def test_single_target_without_users(self, single_target_config):
        """One target and no users: the matched beam is optimal from the first round."""
        config = replace(single_target_config, users=())
        result = optimize(config.build_scenario())
        assert result.status is OptimizationStatus.CONVERGED
        assert len(result.iteration_trace) <= 3
        assert result.gamma_r_star == pytest.approx(1e4, rel=1e-4)
        assert result.comm_sinrs == ()
        assert result.iteration_trace[0].min_comm_sinr is None

    def test_users_meet_their_target(self, single_target_config):
        scenario = single_target_config.build_scenario()
        result = optimize(scenario)
        assert result.status is OptimizationStatus.CONVERGED
        assert all(s >= scenario.gamma_c * (1.0 - 1e-4) for s in result.comm_sinrs)
        assert result.beamformers.power <= scenario.P_T * (1.0 + 1e-8)
        assert_ascent(result)

    def test_reported_sinrs_match_beamformers(self, default_config):
        scenario = default_config.build_scenario()
        result = optimize(scenario)
        beams = result.beamformers
        comm, sense = all_sinrs(beams, beams.Q, scenario.channel, scenario.noise)
        assert comm == pytest.approx(result.comm_sinrs, rel=1e-9)
        assert sense == pytest.approx(result.sense_sinrs, rel=1e-9)
        assert result.gamma_r_star == pytest.approx(min(sense), rel=1e-9)
        assert all(s >= scenario.gamma_c * (1.0 - 1e-4) for s in comm)
        assert_ascent(result)

    def test_trace_counts_solves(self, default_config):
        solver = CountingSolver()
        result = optimize(default_config.build_scenario(), solver=solver)
        assert result.sdp_calls == solver.calls
        for record in result.iteration_trace:
            assert record.sdp_calls == record.abs_calls + record.bisection_calls
            assert record.wall_time >= 0.0

    def test_iteration_cap(self, default_config):
        result = optimize(default_config.build_scenario(), eps2=1e-12, max_iters=1)
        assert len(result.iteration_trace) == 1
        assert result.status is OptimizationStatus.MAX_ITER


def random_scenario(rng, array, noise, P_T: float, gamma_c: float) -> Scenario:
    """Up to three users spread in azimuth and up to three targets."""
    K = int(rng.integers(0, 4))
    M = int(rng.integers(1, 4))
    user_offset = rng.uniform(0.0, 360.0)
    users = [
        point(rng.uniform(10.0, 50.0), user_offset + 120.0 * k + rng.uniform(-20.0, 20.0))
        for k in range(K)
    ]
    targets = [point(rng.uniform(10.0, 50.0), rng.uniform(0.0, 360.0)) for _ in range(M)]
    channel = build_channel_set(array, users, targets)
    return Scenario(channel=channel, noise=noise, P_T=P_T, gamma_c=gamma_c)


@pytest.mark.slow
def test_randomized_scenarios(default_config, his_array, noise):
    """Ascent holds and users stay above Gamma_c; at least 95% of runs converge."""
    rng = np.random.default_rng(2024)
    converged = 0
    runs = 50
    for _ in range(runs):
        scenario = random_scenario(
            rng, his_array, noise, default_config.P_T, default_config.gamma_c
        )
        result = optimize(scenario)
        assert_ascent(result)
        assert all(s >= scenario.gamma_c * (1.0 - 1e-4) for s in result.comm_sinrs)
        for record in result.iteration_trace:
            if record.min_comm_sinr is not None:
                assert record.min_comm_sinr >= scenario.gamma_c * (1.0 - 1e-4)
        converged += result.status is OptimizationStatus.CONVERGED
    assert converged >= 0.95 * runs


def test_far_target_lowers_sensing(single_target_config):
    """Doubling the range of a lone target costs 1/16 of the echo SINR."""
    config = replace(single_target_config, users=())
    target = config.targets[0]
    far = replace(config, targets=(PointConfig(target.theta_deg, target.psi_deg, 2 * target.r),))
    near_result = optimize(config.build_scenario())
    far_result = optimize(far.build_scenario())
    assert far_result.gamma_r_star == pytest.approx(near_result.gamma_r_star / 16.0, rel=1e-3)


def fabricated_round(gamma_r_star: float) -> _Round:
    return _Round(
        beamformers=MagicMock(),
        covariances=MagicMock(),
        gamma_r_star=gamma_r_star,
        sense_sinrs=(gamma_r_star,),
        comm_sinrs=(),
    )


def test_lost_ascent_keeps_the_earlier_round(monkeypatch, single_target_config, caplog):
    rounds = iter([fabricated_round(100.0), fabricated_round(90.0)])
    monkeypatch.setattr(
        "his_isac.ao_driver._run_round", lambda *args: (next(rounds), 3, 5)
    )
    with caplog.at_level(logging.WARNING, logger="his_isac.ao_driver"):
        result = optimize(single_target_config.build_scenario())
    assert result.status is OptimizationStatus.ASCENT_LOST
    assert result.gamma_r_star == 100.0
    assert len(result.iteration_trace) == 1
    assert "lowered Gamma_r*" in caplog.text
