import math
from dataclasses import replace

import click
import pytest
from click.testing import CliRunner

from his_isac.scenario_config import dump_scenario, load_default_scenario, load_scenario
from his_isac_cli.cli import cli
from his_isac_cli.param_type_angle import POLAR_ANGLE
from his_isac_cli.param_type_grid import GRID


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


class TestGridParam:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("0,4,8", (0.0, 4.0, 8.0)),
            ("0, 4, 8", (0.0, 4.0, 8.0)),
            ("-5", (-5.0,)),
            ("0:24:4", (0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0)),
            ("5:0:-2.5", (5.0, 2.5, 0.0)),
            ("1e1:3e1:1e1", (10.0, 20.0, 30.0)),
        ],
    )
    def test_convert(self, text, expected):
        assert GRID.convert(text, None, None) == expected

    def test_decimal_steps_are_rounded(self):
        grid = GRID.convert("0:1:0.1", None, None)
        assert len(grid) == 11
        assert grid[3] == 0.3
        assert grid[-1] == 1.0

    def test_tuple_passes_through(self):
        assert GRID.convert((1.0, 2.0), None, None) == (1.0, 2.0)

    @pytest.mark.parametrize(
        "text,match",
        [
            ("0:10:0", "does not lead from 0 to 10"),
            ("0:10:-1", "does not lead from 0 to 10"),
            ("0:100000:1", "expands to 100001 points"),
            ("a,b", "is not a valid grid"),
            ("0:10", "is not a valid grid"),
        ],
    )
    def test_invalid(self, text, match):
        with pytest.raises(click.BadParameter, match=match):
            GRID.convert(text, None, None)


class TestPolarAngleParam:
    @pytest.mark.parametrize(
        "text,expected",
        [("30", 30.0), ("30deg", 30.0), ("0", 0.0), ("45.5DEG", 45.5)],
    )
    def test_degrees(self, text, expected):
        assert POLAR_ANGLE.convert(text, None, None) == expected

    def test_radians(self):
        assert POLAR_ANGLE.convert("0.5rad", None, None) == pytest.approx(math.degrees(0.5))

    def test_float_passes_through(self):
        assert POLAR_ANGLE.convert(12.5, None, None) == 12.5

    @pytest.mark.parametrize("text", ["90", "120deg", "-1", "1.6rad"])
    def test_out_of_range(self, text):
        with pytest.raises(click.BadParameter, match=r"is not in range \[0, 90\) degrees"):
            POLAR_ANGLE.convert(text, None, None)

    def test_garbage(self):
        with pytest.raises(click.BadParameter, match="is not a valid angle"):
            POLAR_ANGLE.convert("thirty", None, None)


def test_about(runner):
    result = runner.invoke(cli, ["about"])
    assert result.exit_code == 0
    assert "numpy version:" in result.output
    assert "python:" in result.output


class TestInitScenario:
    def test_writes_the_default_scenario(self, runner, tmp_path):
        path = tmp_path / "my.scenario"
        result = runner.invoke(cli, ["init-scenario", str(path)])
        assert result.exit_code == 0, result.output
        assert load_scenario(path) == load_default_scenario()

    def test_overrides_are_written(self, runner, tmp_path):
        path = tmp_path / "tuned.scenario"
        result = runner.invoke(cli, ["--eps1", "0.05", "--seed", "7", "init-scenario", str(path)])
        assert result.exit_code == 0, result.output
        config = load_scenario(path)
        assert config.solver.eps1 == 0.05
        assert config.seed == 7

    def test_bad_scenario_exits_with_error(self, runner, tmp_path):
        bad = tmp_path / "bad.scenario"
        bad.write_text("targets: []\n")
        result = runner.invoke(cli, ["--config", str(bad), "init-scenario", str(tmp_path / "x")])
        assert result.exit_code == 1
        assert "Error: targets: at least one target is required" in result.output

    def test_missing_config_file(self, runner, tmp_path):
        result = runner.invoke(cli, ["--config", str(tmp_path / "absent"), "about"])
        assert result.exit_code == 2
        assert "does not exist" in result.output


class TestSweepArguments:
    def test_invalid_grid(self, runner):
        result = runner.invoke(cli, ["sweep", "--var", "P_T", "--grid", "1;2"])
        assert result.exit_code == 2
        assert "is not a valid grid" in result.output

    def test_unknown_variable(self, runner):
        result = runner.invoke(cli, ["sweep", "--var", "bandwidth", "--grid", "1,2"])
        assert result.exit_code == 2

    def test_non_monotone_grid(self, runner, tmp_path):
        result = runner.invoke(
            cli, ["--out", str(tmp_path), "sweep", "--var", "P_T", "--grid", "1,1"]
        )
        assert result.exit_code == 1
        assert "Error: sweep grid" in result.output


def test_noise_check(runner):
    result = runner.invoke(cli, ["noise-check", "--samples", "20000"])
    assert result.exit_code == 0, result.output
    assert "basis size N=81" in result.output
    assert "projected noise is white within tolerance" in result.output


@pytest.fixture
def lone_target_scenario(tmp_path):
    config = load_default_scenario()
    config = replace(config, users=(), targets=config.targets[:1])
    return dump_scenario(config, tmp_path / "lone.scenario")


@pytest.mark.slow
class TestSolvingCommands:
    def test_solve(self, runner, tmp_path, lone_target_scenario):
        out = tmp_path / "results"
        result = runner.invoke(
            cli, ["--config", str(lone_target_scenario), "--out", str(out), "solve"]
        )
        assert result.exit_code == 0, result.output
        assert "min sensing SINR: 40.000 dB (converged)" in result.output
        for name in ["sweep.csv", "summary.json", "beampattern_tx.csv"]:
            assert (out / name).exists()

    def test_sweep_reports_failed_points(self, runner, tmp_path, default_config):
        scenario = dump_scenario(
            replace(default_config, targets=default_config.targets[:1]), tmp_path / "s.scenario"
        )
        result = runner.invoke(
            cli,
            [
                "--config",
                str(scenario),
                "--out",
                str(tmp_path / "out"),
                "sweep",
                "--var",
                "Gamma_c",
                "--grid",
                "5,60",
            ],
        )
        assert result.exit_code == 1
        assert "Gamma_c=60: failed" in result.output
        assert "Error: 1 sweep point(s) failed" in result.output
        assert (tmp_path / "out" / "sweep.csv").exists()

    def test_beampattern(self, runner, tmp_path, lone_target_scenario):
        out = tmp_path / "cuts"
        result = runner.invoke(
            cli,
            [
                "--config",
                str(lone_target_scenario),
                "--out",
                str(out),
                "beampattern",
                "--psi-step",
                "5",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "beampattern_tx: peak 0.000 dB at psi=90 deg" in result.output
        assert (out / "beampattern_rx_target1.csv").exists()
