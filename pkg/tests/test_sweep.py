import logging
import math
from dataclasses import replace
from unittest.mock import MagicMock

import numpy as np
import pytest
from helpers import random_unit_columns

from his_isac import sweep as sweep_module
from his_isac.enums import ArrayKind, OptimizationStatus, SweepVariable
from his_isac.errors import HisIsacError
from his_isac.models import BeamformerSet, SolvedRun
from his_isac.sinr import all_sinrs
from his_isac.sweep import (
    SweepSpec,
    apply_sweep_value,
    evaluate_with_mismatch,
    point_config,
    psi_grid,
    run_sweep,
    solve_scenario,
)


class TestSweepSpec:
    def test_grid_is_stored_as_floats(self):
        spec = SweepSpec(SweepVariable.MAX_ORDER, (1, 2, 3))
        assert spec.grid == (1.0, 2.0, 3.0)

    def test_descending_grid(self):
        assert SweepSpec(SweepVariable.P_T, (100.0, 50.0, 10.0)).grid[0] == 100.0

    @pytest.mark.parametrize(
        "variable,grid,overrides,match",
        [
            (SweepVariable.P_T, (), (), "must not be empty"),
            (SweepVariable.P_T, (1.0, 3.0, 2.0), (), "not strictly monotone"),
            (SweepVariable.P_T, (1.0, 1.0), (), "not strictly monotone"),
            (SweepVariable.P_T, (1.0, 2.0), ({},), "1 override"),
            (SweepVariable.MAX_ORDER, (1.0, 2.5), (), "nonnegative integers"),
            (SweepVariable.MAX_ORDER, (-1.0, 2.0), (), "nonnegative integers"),
            (SweepVariable.A_T, (0.0, 0.25), (), "must be positive"),
        ],
    )
    def test_invalid(self, variable, grid, overrides, match):
        with pytest.raises(ValueError, match=match):
            SweepSpec(variable, grid, overrides)


class TestApplySweepValue:
    def test_power(self, default_config):
        config = apply_sweep_value(default_config, SweepVariable.P_T, 50.0)
        assert config.P_T == pytest.approx(5e-5)

    def test_area_keeps_the_aperture_square(self, default_config):
        config = apply_sweep_value(default_config, SweepVariable.A_T, 0.36)
        assert config.aperture.Lx == pytest.approx(0.6)
        assert config.aperture.Ly == pytest.approx(0.6)
        assert config.build_scenario().channel.N == 121

    def test_user_target(self, default_config):
        config = apply_sweep_value(default_config, SweepVariable.GAMMA_C, 0.0)
        assert config.gamma_c == 1.0

    def test_delta_theta_leaves_config(self, default_config):
        assert apply_sweep_value(default_config, SweepVariable.DELTA_THETA, 3.0) is default_config

    def test_max_order(self, default_config):
        config = apply_sweep_value(default_config, SweepVariable.MAX_ORDER, 2.0)
        assert config.aperture.max_order == (2, 2)

    def test_point_config_applies_overrides_first(self, default_config):
        spec = SweepSpec(
            SweepVariable.GAMMA_C,
            (0.0, 10.0),
            ({"Gamma_c_dB": 99.0, "P_T_mA2": 50.0}, {"aperture": {"Lx": 0.25}}),
        )
        first = point_config(default_config, spec, 0)
        assert first.Gamma_c_dB == 0.0
        assert first.P_T_mA2 == 50.0
        second = point_config(default_config, spec, 1)
        assert second.aperture.Lx == 0.25
        assert second.aperture.Ly == default_config.aperture.Ly
        assert second.P_T_mA2 == default_config.P_T_mA2


def test_psi_grid():
    grid = psi_grid()
    assert len(grid) == 720
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(359.5)
    assert psi_grid(180.0) == [0.0, 180.0]


@pytest.mark.parametrize("step", [0.0, -1.0, 181.0])
def test_psi_grid_rejects_step(step):
    with pytest.raises(ValueError, match="psi step"):
        psi_grid(step)


class TestEvaluateWithMismatch:
    @pytest.fixture
    def run(self, rng, his_array, default_config, channel, noise) -> SolvedRun:
        W = rng.standard_normal((channel.N, 4)) + 1j * rng.standard_normal((channel.N, 4))
        W *= 1e-2 / np.linalg.norm(W)
        beams = BeamformerSet(W=W, Q=random_unit_columns(rng, channel.N, 2), num_users=2)
        return SolvedRun(
            array=his_array,
            users=default_config.user_points(),
            targets=default_config.target_points(),
            noise=noise,
            P_T=1e-4,
            gamma_c=default_config.gamma_c,
            result=MagicMock(beamformers=beams),
        )

    def test_zero_offset_is_nominal(self, run, channel, noise):
        beams = run.result.beamformers
        expected = all_sinrs(beams, beams.Q, channel, noise)
        assert evaluate_with_mismatch(run, 0.0) == expected

    def test_only_the_first_user_moves(self, run):
        nominal_comm, nominal_sense = evaluate_with_mismatch(run, 0.0)
        comm, sense = evaluate_with_mismatch(run, 4.0)
        assert comm[0] != pytest.approx(nominal_comm[0])
        assert comm[1] == nominal_comm[1]
        assert sense == nominal_sense

    def test_offset_past_grazing(self, run):
        with pytest.raises(ValueError, match="theta"):
            evaluate_with_mismatch(run, 70.0)


class TestRunSweepWithoutSolving:
    def test_workers_must_be_positive(self, default_config):
        with pytest.raises(ValueError, match="workers"):
            run_sweep(default_config, SweepSpec(SweepVariable.P_T, (1.0,)), workers=0)

    def test_invalid_point_configs_are_recorded(self, default_config, caplog):
        spec = SweepSpec(
            SweepVariable.GAMMA_C,
            (0.0, 5.0),
            ({"P_T_mA2": -1.0}, {"aperture": {"Lx": 0.0}}),
        )
        with caplog.at_level(logging.WARNING, logger="his_isac.sweep"):
            bundle = run_sweep(default_config, spec)
        assert [p.index for p in bundle.points] == [0, 1]
        assert [p.value for p in bundle.points] == [0.0, 5.0]
        assert not bundle.ok
        assert "P_T_mA2" in bundle.points[0].error
        assert "aperture" in bundle.points[1].error
        assert "2 of 2 sweep point(s) failed" in caplog.text

    def test_solver_failures_are_recorded(self, default_config, monkeypatch, caplog):
        def fail(config, include_baseline):
            if config.Gamma_c_dB > 0:
                raise HisIsacError(f"no luck at {config.Gamma_c_dB}")
            raise RuntimeError("worse luck")

        monkeypatch.setattr(sweep_module, "_solve_runs", fail)
        spec = SweepSpec(SweepVariable.GAMMA_C, (0.0, 3.0))
        with caplog.at_level(logging.WARNING, logger="his_isac.sweep"):
            bundle = run_sweep(default_config, spec)
        assert [p.error for p in bundle.points] == ["worse luck", "no luck at 3.0"]
        assert "aborted" in caplog.text
        assert "failed: no luck at 3.0" in caplog.text

    def test_delta_theta_solves_the_nominal_scenario_once(self, default_config, monkeypatch):
        calls = []

        def fail(config, include_baseline):
            calls.append(config)
            raise HisIsacError("nominal scenario failed")

        monkeypatch.setattr(sweep_module, "_solve_runs", fail)
        bundle = run_sweep(default_config, SweepSpec(SweepVariable.DELTA_THETA, (0.0, 1.0, 2.0)))
        assert len(calls) == 1
        assert len(bundle.failed) == 3


@pytest.mark.slow
class TestRunSweep:
    def test_sensing_falls_as_users_demand_more(self, single_target_config):
        spec = SweepSpec(SweepVariable.GAMMA_C, (0.0, 10.0, 20.0))
        bundle = run_sweep(single_target_config, spec)
        assert bundle.ok
        sensing = [p.his.min_sense_sinr for p in bundle.points]
        assert sensing[0] >= sensing[1] >= sensing[2]
        for point in bundle.points:
            assert point.his.status is OptimizationStatus.CONVERGED
            assert min(point.his.comm_sinrs) >= 10 ** (point.value / 10) * (1 - 1e-4)

    def test_infeasible_point_does_not_stop_the_sweep(self, single_target_config):
        """Users cannot reach 60 dB; the 5 dB point still solves."""
        bundle = run_sweep(single_target_config, SweepSpec(SweepVariable.GAMMA_C, (5.0, 60.0)))
        assert bundle.points[0].ok
        assert not bundle.points[1].ok
        assert bundle.points[1].his is None
        assert bundle.failed == [bundle.points[1]]

    def test_parallel_workers_keep_grid_order(self, single_target_config):
        config = replace(single_target_config, users=())
        spec = SweepSpec(SweepVariable.P_T, (25.0, 100.0))
        bundle = run_sweep(config, spec, workers=2)
        assert [p.index for p in bundle.points] == [0, 1]
        low, high = (p.his.min_sense_sinr for p in bundle.points)
        assert high == pytest.approx(4.0 * low, rel=1e-3)

    def test_mismatch_degrades_the_moved_user(self, single_target_config):
        bundle = run_sweep(
            single_target_config, SweepSpec(SweepVariable.DELTA_THETA, (0.0, 5.0))
        )
        nominal, moved = bundle.points
        assert moved.his.comm_sinrs[0] < nominal.his.comm_sinrs[0]
        assert moved.his.comm_sinrs[1] == pytest.approx(nominal.his.comm_sinrs[1])

    def test_solve_scenario_with_baseline(self, single_target_config):
        bundle = solve_scenario(single_target_config, include_baseline=True, psi_step_deg=5.0)
        point = bundle.points[0]
        assert point.his.dimension == 81
        assert point.discrete.dimension == 64
        assert point.discrete.array is ArrayKind.DISCRETE
        assert set(bundle.cuts) == {
            "beampattern_tx",
            "beampattern_rx_target1",
            "beampattern_tx_discrete",
            "beampattern_rx_target1_discrete",
        }
        tx = dict(bundle.cuts["beampattern_tx"])
        assert max(tx.values()) == pytest.approx(0.0)
        assert tx[90.0] == pytest.approx(0.0, abs=1e-6)
        discrete_peak = max(db for _, db in bundle.cuts["beampattern_tx_discrete"])
        assert discrete_peak == pytest.approx(-10 * math.log10(math.pi), abs=0.3)

    def test_two_target_cuts(self, default_config):
        """The transmit cut splits into equal lobes; each receive cut nulls the other target."""
        bundle = solve_scenario(default_config, psi_step_deg=5.0)
        tx = dict(bundle.cuts["beampattern_tx"])
        assert abs(tx[90.0] - tx[45.0]) <= 0.5
        first = dict(bundle.cuts["beampattern_rx_target1"])
        second = dict(bundle.cuts["beampattern_rx_target2"])
        assert first[45.0] <= -10.0
        assert second[90.0] <= -10.0


@pytest.mark.slow
class TestGainSweeps:
    def test_gain_grows_with_the_user_target(self, single_target_config):
        """
        At 0.36 m^2 and 70 mA^2 the discrete array spends most of its power on
        24 dB users while the HIS spends about a quarter, so the gap widens.
        """
        config = replace(
            apply_sweep_value(single_target_config, SweepVariable.A_T, 0.36), P_T_mA2=70.0
        )
        spec = SweepSpec(SweepVariable.GAMMA_C, (0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0))
        bundle = run_sweep(config, spec, include_baseline=True)
        assert bundle.ok
        sensing = [p.his.min_sense_sinr for p in bundle.points]
        for before, after in zip(sensing, sensing[1:], strict=False):
            assert after <= before * (1.0 + 1e-4)
        gains = [p.gains.min_sense_sinr_db for p in bundle.points]
        assert gains[-1] - gains[0] >= 3.0

    def test_gain_settles_at_pi_squared(self, single_target_config):
        """Over three decades of power the top point's gain is pi^2 within 0.5 dB."""
        spec = SweepSpec(SweepVariable.P_T, (2.0, 20.0, 200.0, 2000.0))
        bundle = run_sweep(single_target_config, spec, include_baseline=True)
        assert bundle.ok
        sensing = [p.his.min_sense_sinr for p in bundle.points]
        assert sensing == sorted(sensing)
        top = bundle.points[-1].gains.min_sense_sinr_db
        assert top == pytest.approx(20.0 * math.log10(math.pi), abs=0.5)
