from dataclasses import replace

import pytest

from ldes_contracts import ConfigError, default_gb_config, load_config, validate, write_config
from ldes_contracts.cli import bundled_config_path
from ldes_contracts.config import TimeGrid


def test_bundled_config_has_fixed_thermal_and_nuclear():
    config = load_config(bundled_config_path())
    assert config.technology("ccgt").cap_fixed == 35_000
    assert config.technology("nuclear").cap_fixed == 5_000
    assert len(config.scenarios) == 6 and config.time_grid.steps == 48


def test_round_trip(tmp_path, desk):
    path = write_config(desk, tmp_path / "sys.toml")
    assert (tmp_path / "sys_profiles.csv").exists()
    assert load_config(path) == desk


def test_round_trip_with_contracts_and_soc(tmp_path, desk):
    config = replace(desk, initial_soc_fraction=0.5,
                     contracts={"floor": {"type": "cf", "floor_rate": 0.05, "cap_rate": 0.14}})
    assert load_config(write_config(config, tmp_path / "c.toml")) == config


def test_probabilities_must_sum_to_one(desk):
    scen = list(desk.scenarios)
    scen[0] = replace(scen[0], probability=scen[0].probability - 0.02)
    with pytest.raises(ConfigError) as err:
        validate(replace(desk, scenarios=tuple(scen)))
    assert err.value.field == "scenarios.probability"


def test_empty_scenario_set(desk):
    with pytest.raises(ConfigError) as err:
        validate(replace(desk, scenarios=()))
    assert err.value.field == "scenarios"


@pytest.mark.parametrize("field, change", [
    ("technology[5].round_trip_efficiency", {"round_trip_efficiency": 1.2}),
    ("technology[5].storage_duration", {"storage_duration": None}),
    ("technology[5].var_cost", {"var_cost": -1.0}),
])
def test_technology_invariants(desk, field, change):
    techs = list(desk.technologies)
    techs[5] = replace(techs[5], **change)
    with pytest.raises(ConfigError) as err:
        validate(replace(desk, technologies=tuple(techs)))
    assert err.value.field == field


def test_weights_must_cover_a_year(desk):
    with pytest.raises(ConfigError) as err:
        validate(replace(desk, time_grid=TimeGrid((1.0,) * 48)))
    assert err.value.field == "time_grid.weights"


def test_capacity_factor_range(desk):
    s = desk.scenarios[0]
    bad = dict(s.vre_profiles, solar=(1.5,) + s.vre_profiles["solar"][1:])
    with pytest.raises(ConfigError, match="capacity factors"):
        validate(replace(desk, scenarios=(replace(s, vre_profiles=bad),) + desk.scenarios[1:]))


def test_malformed_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[system\nname = 1")
    with pytest.raises(ConfigError) as err:
        load_config(p)
    assert err.value.field == "file"


def test_missing_block(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('[system]\nname = "x"\n')
    with pytest.raises(ConfigError):
        load_config(p)


def test_default_config_is_deterministic():
    assert default_gb_config(1, 24, 7) == default_gb_config(1, 24, 7)
    assert default_gb_config(1, 24, 7) != default_gb_config(1, 24, 8)
