from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from src.contact import ContactSet
from src.errors import SimulationDivergedError
from src.model import SUBSYSTEMS, MissionPhase, SystemState
from src.presets import PRESETS
from src.scenario import load_preset, with_overrides
from src.simulation import (
    TRACE_COLUMNS,
    VELOCITY_MASK,
    ClosedLoop,
    MissionSimulator,
    SimConfig,
    SimTrace,
    compute_controls,
    energy_records,
    evaluate,
    passivity_monitor,
    rk4_step,
    run,
    semi_implicit_euler_step,
    step,
)
from src.spatial_math import is_rotation
from src.trajectory import generate_setpoints

# Closed impedance loop m·p̈ + D·ṗ + K·p = 0 of one axis
MASS, DAMPING, STIFFNESS = 0.35, 8.0, 50.0
LOOP = np.array([[0.0, 1.0], [-STIFFNESS / MASS, -DAMPING / MASS]])


def _loop(_t, x):
    return LOOP @ x


X0 = np.array([0.02, 0.0])


def _integrate(stepper, dt, t_end=1.0):
    x = X0
    for k in range(int(round(t_end / dt))):
        x = stepper(_loop, k * dt, x, dt)
    return x


def _hover_controls(scenario, state, plant):
    setpoints = generate_setpoints(scenario, 0.0, state.uav_pose, state.object_pose)
    return compute_controls(state, setpoints, ContactSet.empty(), plant)


# ================================================
# Integrators
# ================================================


def test_rk4_is_fourth_order_on_impedance_loop():
    exact = expm(LOOP * 0.2) @ X0
    errors = np.array(
        [
            np.linalg.norm(_integrate(rk4_step, dt, t_end=0.2) - exact)
            for dt in (0.002, 0.001, 0.0005)
        ]
    )
    ratios = errors[:-1] / errors[1:]
    assert np.all((ratios >= 8.0) & (ratios <= 32.0)), ratios


def test_semi_implicit_euler_is_first_order():
    exact = expm(LOOP * 1.0) @ X0
    mask = np.array([False, True])

    def stepper(f, t, x, dt):
        return semi_implicit_euler_step(f, t, x, dt, mask)

    coarse = np.linalg.norm(_integrate(stepper, 0.002) - exact)
    fine = np.linalg.norm(_integrate(stepper, 0.001) - exact)
    assert 1.5 <= coarse / fine <= 3.0


def test_velocity_mask_selects_velocities():
    assert VELOCITY_MASK.sum() == 10


# ================================================
# Plant evaluation
# ================================================


def test_hover_equilibrium_is_exact():
    scenario = load_preset("hover")
    simulator = MissionSimulator(scenario)
    state, plant = simulator.state, simulator.plant
    ev = evaluate(state, _hover_controls(scenario, state, plant), plant)
    assert np.max(np.abs(ev.uav_linear)) < 1e-12
    assert np.max(np.abs(ev.uav_angular)) < 1e-12
    assert np.max(np.abs(ev.ee_relative)) < 1e-12
    assert abs(ev.aperture_accel) < 1e-12


def test_newtons_third_law_along_the_chain():
    scenario = load_preset("passivity-suite")
    simulator = MissionSimulator(scenario)
    plant = simulator.plant
    state = replace(
        simulator.state,
        ee_position=np.array([0.08, 0.01, 0.02]),
        ee_velocity=np.array([0.1, -0.05, 0.02]),
        uav_rates=np.array([0.1, 0.2, -0.1]),
    )
    controls = _hover_controls(scenario, state, plant)
    ev = evaluate(state, controls, plant)
    # Without stops or contacts the arm only transmits its actuation
    np.testing.assert_allclose(ev.w_man.force, controls.ee_force, atol=1e-12)


def test_energy_is_zero_at_hover_equilibrium():
    scenario = load_preset("hover")
    simulator = MissionSimulator(scenario)
    state, plant = simulator.state, simulator.plant
    energy = energy_records(state, _hover_controls(scenario, state, plant), plant)
    assert set(energy) == set(SUBSYSTEMS)
    assert energy["uav"].total == 0.0
    assert energy["manipulator"].total == 0.0


# ================================================
# Stepping
# ================================================


def test_step_keeps_attitude_on_so3():
    scenario = load_preset("hover")
    simulator = MissionSimulator(scenario)
    plant = simulator.plant
    state = replace(simulator.state, uav_rates=np.array([1.0, -2.0, 0.5]))
    controls = _hover_controls(scenario, state, plant)
    for k in range(50):
        state = step(state, controls, plant, scenario.simulation, k * 0.001)
    assert isinstance(state, SystemState)
    assert is_rotation(state.uav_rotation, 1e-12)


def test_step_detects_divergence():
    scenario = load_preset("hover")
    simulator = MissionSimulator(scenario)
    plant = simulator.plant
    controls = _hover_controls(scenario, simulator.state, plant)
    config = SimConfig(dt=0.001, t_end=1.0, divergence_limit=0.5)
    with pytest.raises(SimulationDivergedError) as excinfo:
        step(simulator.state, controls, plant, config, 0.2)
    assert excinfo.value.time == pytest.approx(0.201)


# ================================================
# Runs
# ================================================


def test_trace_layout(hover_trace):
    frame = hover_trace.frame
    assert list(frame.columns) == TRACE_COLUMNS
    assert len(frame) == 5001
    assert frame["time"].iloc[-1] == pytest.approx(5.0)
    assert set(frame["mission"]) == {MissionPhase.FREE_FLIGHT.value}
    assert hover_trace.metadata["contact_time"] is None


def test_hover_does_not_drift(hover_trace):
    frame = hover_trace.frame
    positions = frame[["uav_pos_x", "uav_pos_y", "uav_pos_z"]].to_numpy()
    drift = np.abs(positions - np.array([0.0, 0.0, -1.0]))
    assert drift.max() < 1e-9


def test_hover_regulation_settles(hover_trace):
    last = hover_trace.frame.iloc[-1]
    kinetic = sum(last[f"{sub}_T"] for sub in SUBSYSTEMS)
    assert kinetic < 1e-6


def test_runs_are_deterministic(tmp_path, fig3_trace):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    fig3_trace.to_csv(str(first))
    again = run(load_preset("fig3-mission"))
    again.to_csv(str(second))
    assert "Dock" in again.phases()
    assert first.read_bytes() == second.read_bytes()


def test_csv_round_trip_is_exact(tmp_path, hover_trace):
    path = tmp_path / "hover.csv"
    hover_trace.to_csv(str(path))
    loaded = SimTrace.from_csv(str(path), hover_trace.metadata)
    assert loaded.frame.equals(hover_trace.frame)
    assert loaded.dt == hover_trace.dt


def test_semi_implicit_euler_run_holds_hover():
    scenario = with_overrides(load_preset("hover"), t_end=1.0)
    scenario = replace(
        scenario,
        simulation=replace(scenario.simulation, integrator="semi-implicit-euler"),
    )
    frame = run(scenario).frame
    assert np.abs(frame["uav_pos_z"] + 1.0).max() < 1e-9


# ================================================
# Convergence and passivity
# ================================================


def test_uav_step_converges(passivity_suite_trace):
    frame = passivity_suite_trace.frame
    settled = frame[frame["time"] >= 11.0]
    error = np.hypot(settled["uav_pos_x"] - 0.5, settled["uav_pos_z"] + 1.0)
    assert error.max() < 1e-3


def test_manipulator_step_converges(passivity_suite_trace):
    frame = passivity_suite_trace.frame
    settled = frame[frame["time"] >= 8.0]
    assert (settled["ee_pos_x"] - 0.08).abs().max() < 1e-3


def test_passivity_suite_is_passive(passivity_suite_trace):
    report = passivity_monitor(passivity_suite_trace)
    assert report.passed, report.violations
    assert list(report.residuals.columns[:2]) == ["time", "impact"]


def test_undamped_loop_conserves_storage(hover_trace):
    lossless = np.array([[0.0, 1.0], [-STIFFNESS / MASS, 0.0]])
    K, D = np.array([[STIFFNESS]]), np.zeros((1, 1))
    frame, dt = hover_trace.frame.copy(), hover_trace.dt
    x, storage = X0, []
    for k in range(len(frame)):
        loop = ClosedLoop("uav", MASS, x[:1], x[1:], K, D)
        accel = lossless[1] @ x
        assert abs(loop.disturbance(np.array([accel]))[0]) < 1e-12
        storage.append(loop.kinetic() + loop.potential())
        x = rk4_step(lambda _t, y: lossless @ y, k * dt, x, dt)
    frame["uav_V"] = storage
    frame["uav_V_pre"] = storage
    frame["uav_supply"] = 0.0
    frame["uav_dissipation"] = 0.0
    report = passivity_monitor(SimTrace(frame, hover_trace.metadata))
    assert report.violations["uav"] == 0
    assert report.residuals["uav_residual"].abs().max() < 1e-12
    assert storage[-1] == pytest.approx(storage[0], rel=1e-9)


def test_passivity_monitor_flags_energy_injection(hover_trace):
    frame = hover_trace.frame.copy()
    frame.loc[100, "uav_V_pre"] = frame.loc[99, "uav_V"] + 1.0
    report = passivity_monitor(SimTrace(frame, hover_trace.metadata))
    assert not report.passed
    assert report.violations["uav"] == 1


# ================================================
# Wall mission
# ================================================


def test_mission_timeline(fig3_trace):
    assert fig3_trace.phases() == ["FreeFlight", "Dock", "AerialGrasp"]
    contact = fig3_trace.phase_entry_time(MissionPhase.DOCK)
    detach = fig3_trace.phase_entry_time(MissionPhase.AERIAL_GRASP)
    assert 6.0 <= contact <= 8.0
    assert 10.0 <= detach <= 12.0
    assert fig3_trace.metadata["grasp_time"] < detach


def test_mission_is_passive_outside_impacts(fig3_report):
    assert sum(fig3_report.violations.values()) == 0


def test_uav_stays_close_while_docked(fig3_trace):
    frame = fig3_trace.frame
    docked = frame[frame["mission"] == "Dock"]
    deviation = np.sqrt(
        sum((docked[f"uav_pos_{a}"] - docked[f"uav_sp_{a}"]) ** 2 for a in "xyz")
    )
    assert deviation.max() < 0.2


def test_object_is_carried_after_detach(fig3_trace):
    frame = fig3_trace.frame
    carried = frame[frame["mission"] == "AerialGrasp"]
    assert carried["attached"].eq(0).all()
    moved = carried["object_pos_x"].iloc[-1] - carried["object_pos_x"].iloc[0]
    assert moved < -0.5


def test_post_detach_tracking(fig3_trace):
    frame = fig3_trace.frame
    error = np.sqrt(
        sum((frame[f"uav_pos_{a}"] - frame[f"uav_sp_{a}"]) ** 2 for a in "xyz")
    )
    carried = frame["mission"] == "AerialGrasp"
    assert error[carried].max() < 0.3
    assert error[frame["time"] >= 24.0].max() < 1e-2


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_friction_cone_holds(preset_trace, name):
    frame = preset_trace(name).frame
    mu = load_preset(name).contact.friction
    for i in range(7):
        t = np.hypot(frame[f"fc_{3 * i:02d}"], frame[f"fc_{3 * i + 1:02d}"])
        n = frame[f"fc_{3 * i + 2:02d}"]
        assert (t <= mu * n + 1e-12).all()


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_attitude_error_stays_small(preset_trace, name):
    assert preset_trace(name).frame["attitude_error_deg"].max() < 2.0
