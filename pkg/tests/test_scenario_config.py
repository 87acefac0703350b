from dataclasses import replace

import pytest

from his_isac.errors import ScenarioError
from his_isac.scenario_config import (
    ApertureConfig,
    PointConfig,
    ScenarioConfig,
    default_equivalent_noise,
    dump_scenario,
    load_scenario,
    parse_scenario,
)

MINIMAL = """\
targets:
  - {theta_deg: 30, psi_deg: 90, r: 10}
"""


def with_lines(*lines: str) -> str:
    return MINIMAL + "\n".join(lines) + "\n"


class TestDefaults:
    def test_minimal_document(self):
        config = parse_scenario(MINIMAL)
        assert config.users == ()
        assert config.targets == (PointConfig(30.0, 90.0, 10.0),)
        assert config.aperture == ApertureConfig()
        assert config.P_T == pytest.approx(1e-4)
        assert config.gamma_c == pytest.approx(10**0.5)

    def test_noise_defaults_to_reference_link(self):
        sigma_c_eff_sq, sigma_R_sq = default_equivalent_noise()
        noise = parse_scenario(MINIMAL).noise_model()
        assert noise.sigma_c_eff_sq == pytest.approx(sigma_c_eff_sq, rel=1e-12)
        assert noise.sigma_R_sq == pytest.approx(sigma_R_sq, rel=1e-12)

    def test_reference_link_values(self):
        """A 40 dB echo SNR and a 33 dB user SNR on the 0.25 m^2, 10 m link."""
        beta = 0.25 / (4 * 3.141592653589793 * 10.0) ** 2
        sigma_c_eff_sq, sigma_R_sq = default_equivalent_noise()
        assert sigma_R_sq == pytest.approx(1e-4 * beta**2 / 1e4, rel=1e-12)
        assert sigma_c_eff_sq == pytest.approx(1e-4 * beta / 10**3.3, rel=1e-12)

    def test_shipped_scenario(self, default_config):
        assert len(default_config.users) == 2
        assert len(default_config.targets) == 2
        assert default_config.Gamma_c_dB == 5.0
        scenario = default_config.build_scenario()
        assert scenario.channel.N == 81
        assert (scenario.channel.K, scenario.channel.M) == (2, 2)

    def test_zero_db_target(self):
        assert parse_scenario(with_lines("Gamma_c_dB: 0")).gamma_c == 1.0

    def test_max_order(self):
        config = parse_scenario(with_lines("aperture: {max_order: [3, 2]}"))
        assert config.aperture.max_order == (3, 2)
        assert config.build_scenario().channel.N == 7 * 5


class TestRoundTrip:
    def test_dump_and_load(self, tmp_path, default_config):
        path = dump_scenario(default_config, tmp_path / "default.scenario")
        assert load_scenario(path) == default_config

    def test_dump_keeps_overrides(self, tmp_path, default_config):
        config = replace(
            default_config,
            aperture=replace(default_config.aperture, max_order=(3, 3)),
            Gamma_c_dB=-2.5,
        )
        assert load_scenario(dump_scenario(config, tmp_path / "s.scenario")) == config

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_scenario(tmp_path / "absent.scenario")


class TestInvalidDocuments:
    def test_yaml_error_reports_line(self):
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario("aperture:\n\tLx: 0.5\n")
        assert exc_info.value.line == 2
        assert "(line 2)" in str(exc_info.value)

    @pytest.mark.parametrize("text", ["", "users: []\n", "targets: []\n"])
    def test_targets_required(self, text):
        with pytest.raises(ScenarioError, match="at least one target"):
            parse_scenario(text)

    def test_document_must_be_a_mapping(self):
        with pytest.raises(ScenarioError, match="expected a mapping"):
            parse_scenario("- 1\n- 2\n")

    @pytest.mark.parametrize(
        "line,match",
        [
            ("radar: {}", "radar: unknown section"),
            ("aperture: {Lz: 1.0}", r"aperture\.Lz: unknown field"),
            ("solver: {tolerance: 1.0e-6}", r"solver\.tolerance: unknown field"),
            ("P_T_mA2: true", "P_T_mA2: expected a number"),
            ("aperture: {carrier_freq: 2.4e9}", "expected a number, got '2.4e9'"),
            ("solver: {max_iters: 2.5}", "expected an integer"),
            ("aperture: {max_order: [1, 2, 3]}", r"expected \[n_x, n_y\] or null"),
            ("aperture: {Lx: -0.5}", "aperture: Lx -0.5 not in range"),
            ("P_T_mA2: 0", "P_T_mA2: 0.0 not in range"),
            ("solver: {eps1: 0}", "eps1 and eps2 must be positive"),
            ("solver: {gallop_after: 0}", r"solver\.gallop_after: 0 not in range"),
            ("noise: {sigma_c_sq: 1.0e-20, sigma_r_sq: 0}", "sigma_r_sq positive"),
            ("noise: {sigma_c_sq: 1.0e-20}", "noise"),
        ],
    )
    def test_invalid_field(self, line, match):
        with pytest.raises(ScenarioError, match=match):
            parse_scenario(with_lines(line))

    @pytest.mark.parametrize(
        "targets,match",
        [
            ("[{theta_deg: 30, psi_deg: 90}]", r"targets\[0\]: expected keys"),
            ("[{theta_deg: 30, psi_deg: 90, r: 10}, 5]", r"targets\[1\]: expected keys"),
            ("[{theta_deg: 95, psi_deg: 90, r: 10}]", r"targets\[0\]: theta"),
            ("[{theta_deg: 30, psi_deg: 90, r: 0}]", r"targets\[0\]: r"),
            ("{theta_deg: 30}", "targets: expected a list of points"),
        ],
    )
    def test_invalid_target(self, targets, match):
        with pytest.raises(ScenarioError, match=match):
            parse_scenario(f"targets: {targets}\n")

    def test_error_names_the_field(self):
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(with_lines("users: [{theta_deg: 30, psi_deg: x, r: 10}]"))
        assert exc_info.value.field == "users[0].psi_deg"
        assert exc_info.value.line is None
