import textwrap

import pytest

from src.errors import ScenarioParseError, ScenarioValidationError
from src.presets import PRESETS
from src.scenario import (
    ScenarioConfig,
    load_preset,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    validate_scenario,
    with_overrides,
)
from src.trajectory import TrackingWindow, Waypoint

MISSION_TOML = textwrap.dedent(
    """
    name = "wall-grasp"

    [simulation]
    dt = 0.002
    t_end = 12
    integrator = "semi-implicit-euler"
    seed = 7

    [uav]
    mass = 1.5

    [gains.uav]
    stiffness = [10, 10, 12]

    [object]
    position = [2.0, 0.0, -1.0]

    [[waypoints]]
    time = 0.0
    position = [1.0, 0.0, -1.0]

    [[waypoints]]
    time = 4.0
    position = [1.8, 0.0, -1.0]

    [[tracking_windows]]
    t_on = 5.0
    t_off = 9.0

    [output]
    formats = ["csv", "json"]
    """
)

# ================================================
# Parsing
# ================================================


def test_empty_document_gives_defaults():
    assert parse_scenario("") == ScenarioConfig()


def test_parse_overrides_only_given_fields():
    config = parse_scenario(MISSION_TOML)
    assert config.name == "wall-grasp"
    assert config.simulation.dt == 0.002
    assert config.simulation.t_end == 12.0
    assert isinstance(config.simulation.t_end, float)
    assert config.simulation.integrator == "semi-implicit-euler"
    assert config.simulation.seed == 7
    assert config.uav.mass == 1.5
    assert config.uav.inertia == ScenarioConfig().uav.inertia
    assert config.gains.uav.stiffness == (10.0, 10.0, 12.0)
    assert config.gains.uav.damping == ScenarioConfig().gains.uav.damping
    assert config.waypoints == (
        Waypoint(0.0, (1.0, 0.0, -1.0)),
        Waypoint(4.0, (1.8, 0.0, -1.0)),
    )
    assert config.tracking_windows == (TrackingWindow(5.0, 9.0),)
    assert config.output.formats == ("csv", "json")


def test_malformed_toml_reports_location():
    with pytest.raises(ScenarioParseError) as excinfo:
        parse_scenario("[simulation]\ndt = = 0.1\n")
    assert excinfo.value.line == 2
    assert excinfo.value.column is not None


def test_unknown_keys_are_rejected_together():
    text = "colour = 'red'\n[uav]\nmas = 1.0\n[simulation]\nstep = 0.1\n"
    with pytest.raises(ScenarioValidationError) as excinfo:
        parse_scenario(text)
    problems = excinfo.value.problems
    assert len(problems) == 3
    assert any("'mas'" in p and "[uav]" in p for p in problems)


def test_wrong_types_are_reported():
    with pytest.raises(ScenarioValidationError) as excinfo:
        parse_scenario('[simulation]\ndt = "fast"\nseed = 1.5\n')
    assert len(excinfo.value.problems) == 2


def test_semantic_errors_are_listed_exhaustively():
    text = textwrap.dedent(
        """
        [simulation]
        dt = -0.001
        [uav]
        mass = 0.0
        [[waypoints]]
        time = 2.0
        position = [0.0, 0.0, -1.0]
        [[waypoints]]
        time = 1.0
        position = [0.0, 0.0, -1.0]
        """
    )
    with pytest.raises(ScenarioValidationError) as excinfo:
        parse_scenario(text)
    problems = excinfo.value.problems
    assert any("simulation.dt" in p for p in problems)
    assert any("uav.mass" in p for p in problems)
    assert any("waypoints[1].time" in p and "waypoints[0].time" in p for p in problems)


def test_tracking_window_must_fit_the_run():
    text = "[simulation]\nt_end = 5.0\n[[tracking_windows]]\nt_on = 4.0\nt_off = 6.0\n"
    with pytest.raises(ScenarioValidationError, match="tracking_windows"):
        parse_scenario(text)


def test_waypoint_needs_time_and_position():
    with pytest.raises(ScenarioValidationError, match="missing position"):
        parse_scenario("[[waypoints]]\ntime = 0.0\n")


def test_load_scenario_from_file(tmp_path):
    path = tmp_path / "mission.toml"
    path.write_text(MISSION_TOML, encoding="utf-8")
    assert load_scenario(str(path)).name == "wall-grasp"
    with pytest.raises(ScenarioParseError):
        load_scenario(str(tmp_path / "missing.toml"))


# ================================================
# Serialization and presets
# ================================================


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_valid_and_survive_serialization(name):
    config = load_preset(name)
    assert validate_scenario(config) == []
    text = serialize_scenario(config)
    again = parse_scenario(text)
    assert again == config
    assert serialize_scenario(again) == text


def test_unknown_preset():
    with pytest.raises(ScenarioValidationError, match="unknown preset"):
        load_preset("moon-landing")


def test_overrides_are_revalidated():
    config = load_preset("hover")
    shorter = with_overrides(config, dt=0.002, t_end=2.0, out_dir="elsewhere")
    assert shorter.simulation.dt == 0.002
    assert shorter.output.out_dir == "elsewhere"
    assert not shorter.output.strict_passivity
    assert with_overrides(config, strict_passivity=True).output.strict_passivity
    with pytest.raises(ScenarioValidationError):
        with_overrides(load_preset("fig3-mission"), t_end=8.0)
