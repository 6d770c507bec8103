"""
Fixed-step simulation engine of the flying hand.

Controls are computed once per step and held over it (zero-order hold). The
integrated state carries, besides the mechanical coordinates, the running
supply ∫d·ṗ dt and dissipation ∫ṗ·D·ṗ dt of the three closed loops so that
the passivity monitor can check V(t_k+1) − V(t_k) ≤ Δsupply step by step.
"""

# src/simulation.py

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.contact import (
    CONTACT_NAMES,
    ContactParams,
    ContactSet,
    WallAttachment,
    build_grasp_matrix,
    resolve_contacts,
)
from src.control import (
    ControllerGains,
    FeedForward,
    GripperImpedance,
    Setpoints,
    attitude_authority,
    attitude_error_deg,
    feed_forward,
    gripper_control,
    gripper_impedance,
    manipulator_control,
    thrust_attitude_from_u,
    uav_control,
)
from src.dynamics import (
    gripper_reaction,
    gyroscopic_moment,
    limit_force,
    manipulator_reaction,
    mixer_forward,
    mixer_inverse,
    reaction_moment,
    relative_ee_accel,
    uav_accel,
)
from src.errors import SimulationDivergedError
from src.mission import EventMonitor, MissionState, environment_wrench, step_mission
from src.model import (
    E3,
    GRAVITY,
    INDEX_APERTURE_RATE,
    SLICE_EE_VELOCITY,
    SLICE_UAV_RATES,
    SLICE_UAV_ROTATION,
    SLICE_UAV_VELOCITY,
    STATE_SIZE,
    SUBSYSTEMS,
    GripperParams,
    ManipulatorParams,
    MissionPhase,
    ObjectParams,
    SystemState,
    UavParams,
    end_effector_kinematics,
    end_effector_mass,
    initial_state,
)
from src.spatial_math import (
    Frame,
    Matrix,
    Pose,
    Vector,
    Wrench,
    cross,
    orthonormalize,
    skew,
)
from src.trajectory import generate_setpoints

if TYPE_CHECKING:
    from src.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

Derivative = Callable[[float, np.ndarray], np.ndarray]


class Integrator(Enum):
    RK4 = "rk4"
    SEMI_IMPLICIT_EULER = "semi-implicit-euler"


@dataclass(frozen=True)
class SimConfig:
    """Integration settings of one run."""

    dt: float = 0.001
    t_end: float = 10.0
    integrator: str = Integrator.RK4.value
    seed: int = 0
    divergence_limit: float = 1e6
    impact_relaxation: float = 1.0

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def problems(self, prefix: str = "simulation") -> List[str]:
        found: List[str] = []
        if not self.dt > 0.0:
            found.append(f"{prefix}.dt must be > 0 (got {self.dt})")
        elif not self.t_end > self.dt:
            found.append(f"{prefix}.t_end must exceed dt (got {self.t_end})")
        if self.integrator not in {i.value for i in Integrator}:
            found.append(
                f"{prefix}.integrator must be 'rk4' or 'semi-implicit-euler' "
                f"(got {self.integrator!r})"
            )
        if not self.divergence_limit > 0.0:
            found.append(f"{prefix}.divergence_limit must be > 0")
        if not self.impact_relaxation >= 0.0:
            found.append(f"{prefix}.impact_relaxation must be >= 0")
        return found


@dataclass(frozen=True)
class Plant:
    """Everything physical the dynamics and the controllers need."""

    uav: UavParams = field(default_factory=UavParams)
    manipulator: ManipulatorParams = field(default_factory=ManipulatorParams)
    gripper: GripperParams = field(default_factory=GripperParams)
    obj: ObjectParams = field(default_factory=ObjectParams)
    contact: ContactParams = field(default_factory=ContactParams)
    gains: ControllerGains = field(default_factory=ControllerGains)
    g: float = GRAVITY

    @classmethod
    def from_scenario(cls, scenario: "ScenarioConfig") -> "Plant":
        return cls(
            uav=scenario.uav,
            manipulator=scenario.manipulator,
            gripper=scenario.gripper,
            obj=scenario.object,
            contact=scenario.contact,
            gains=scenario.gains,
        )


@dataclass(frozen=True)
class Controls:
    """Control inputs held constant over one step."""

    setpoints: Setpoints
    feed_forward: FeedForward
    u_uav: Vector
    thrust: float
    moment: Vector
    rotor_thrusts: Vector
    desired_rotation: Matrix
    u_man: Vector
    ee_force: Vector
    gripper_force: float
    gripper: GripperImpedance


@dataclass(frozen=True)
class ClosedLoop:
    """One subsystem seen as m·p̈ + D·ṗ + K·e = d."""

    name: str
    mass: float
    error: Vector
    velocity: Vector
    K: Matrix
    D: Matrix

    def kinetic(self) -> float:
        return 0.5 * self.mass * float(self.velocity @ self.velocity)

    def potential(self) -> float:
        return 0.5 * float(self.error @ self.K @ self.error)

    def disturbance(self, accel: Vector) -> Vector:
        """
        Port input d rebuilt from the loop terms at the evaluated acceleration.

        d is not measured independently: it is whatever closes m·a + D·v + K·e,
        so the supply it integrates matches ΔV up to integration error.
        """
        return self.mass * accel + self.D @ self.velocity + self.K @ self.error

    def dissipation_rate(self) -> float:
        return float(self.velocity @ self.D @ self.velocity)


@dataclass(frozen=True)
class EnergyRecord:
    kinetic: float
    potential: float
    supply: float
    dissipation: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential


@dataclass(frozen=True)
class Evaluation:
    """Accelerations and interconnection wrenches at one instant."""

    uav_linear: Vector
    uav_angular: Vector
    ee_accel: Vector
    ee_relative: Vector
    aperture_accel: float
    contacts: ContactSet
    w_obj: Wrench
    w_h: Wrench
    w_man: Wrench
    disturbances: Tuple[Vector, Vector, Vector]
    supply_rate: Vector
    dissipation_rate: Vector


# ================================================
# Generic fixed-step integrators
# ================================================


def rk4_step(f: Derivative, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step of x' = f(t, x)."""
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def semi_implicit_euler_step(
    f: Derivative, t: float, x: np.ndarray, dt: float, velocity_mask: np.ndarray
) -> np.ndarray:
    """
    Symplectic Euler step: velocities first, then positions with the new velocities.

    :param velocity_mask: Boolean mask of the velocity-like components of x.
    """
    x_new = np.array(x, dtype=float)
    x_new[velocity_mask] += dt * f(t, x)[velocity_mask]
    rest = ~velocity_mask
    x_new[rest] += dt * f(t, x_new)[rest]
    return x_new


VELOCITY_MASK = np.zeros(STATE_SIZE, dtype=bool)
for _velocity in (SLICE_UAV_VELOCITY, SLICE_UAV_RATES, SLICE_EE_VELOCITY):
    VELOCITY_MASK[_velocity] = True
VELOCITY_MASK[INDEX_APERTURE_RATE] = True


# ================================================
# Closed loops and energy
# ================================================


def closed_loops(
    state: SystemState, controls: Controls, plant: Plant
) -> Tuple[ClosedLoop, ClosedLoop, ClosedLoop]:
    """The UAV, manipulator and gripper loops with the gains of this step."""
    gains = plant.gains
    setpoints = controls.setpoints
    c = controls.gripper.scale
    uav = ClosedLoop(
        "uav",
        plant.uav.mass,
        state.uav_position - setpoints.uav_position,
        state.uav_velocity,
        gains.uav.K,
        gains.uav.D,
    )
    manipulator = ClosedLoop(
        "manipulator",
        end_effector_mass(state.mission, plant.manipulator, plant.gripper, plant.obj),
        state.ee_position - setpoints.ee_position,
        state.ee_velocity,
        gains.manipulator.K,
        gains.manipulator.D,
    )
    gripper = ClosedLoop(
        "gripper",
        plant.gripper.phalange_mass,
        np.array([state.aperture - controls.gripper.target]),
        np.array([state.aperture_rate]),
        c * c * gains.gripper.K,
        c * c * gains.gripper.D,
    )
    return uav, manipulator, gripper


def energy_records(
    state: SystemState, controls: Controls, plant: Plant
) -> Dict[str, EnergyRecord]:
    """Storage V = T + P of each loop plus its accumulated supply and dissipation."""
    return {
        loop.name: EnergyRecord(
            loop.kinetic(),
            loop.potential(),
            float(state.supply[i]),
            float(state.dissipation[i]),
        )
        for i, loop in enumerate(closed_loops(state, controls, plant))
    }


# ================================================
# Plant evaluation
# ================================================


def held_object_pose(state: SystemState, manipulator: ManipulatorParams) -> Pose:
    """Object pose: on the wall, or carried by the palm once grasped."""
    if state.grasp_offset is None:
        return state.object_pose
    return end_effector_kinematics(state, manipulator).pose.compose(state.grasp_offset)


def evaluate(state: SystemState, controls: Controls, plant: Plant) -> Evaluation:
    """
    Accelerations of every body for the given state and held controls.

    The end-effector is a point mass driven by the commanded arm force, the
    workspace stops, gravity and, in Dock, the contact forces. The wrenches
    f_h^e and f_man^m are then rebuilt from that motion and the UAV receives
    the reaction of f_man^m.
    """
    manipulator = plant.manipulator
    gripper = plant.gripper
    g = plant.g
    kinematics = end_effector_kinematics(state, manipulator)
    R_e = kinematics.pose.rotation

    ee_limit = limit_force(
        state.ee_position,
        state.ee_velocity,
        manipulator.lower,
        manipulator.upper,
        manipulator.limit_stiffness,
        manipulator.limit_damping,
    )
    aperture_limit = float(
        limit_force(
            state.aperture,
            state.aperture_rate,
            gripper.aperture_min,
            gripper.aperture_max,
            gripper.limit_stiffness,
            gripper.limit_damping,
        )
    )

    if state.mission is MissionPhase.DOCK:
        contacts = resolve_contacts(
            state, manipulator, gripper, plant.obj, plant.contact
        )
        w_obj = environment_wrench(state, contacts, plant.obj)
        # Force the hand applies to the object, in F_i.
        contact_force = state.object_pose.rotation @ w_obj.force
    else:
        contacts = ContactSet.empty()
        contact_force = np.zeros(3)

    mass = end_effector_mass(state.mission, manipulator, gripper, plant.obj)
    actuation = controls.ee_force + ee_limit
    ee_accel = (R_e @ actuation + mass * g * E3 - contact_force) / mass

    if state.mission is MissionPhase.AERIAL_GRASP:
        carried = replace(state, object_pose=held_object_pose(state, manipulator))
        w_obj = environment_wrench(carried, contacts, plant.obj, ee_accel)
        object_pose = carried.object_pose
    elif state.mission is MissionPhase.FREE_FLIGHT:
        w_obj = environment_wrench(state, contacts, plant.obj)
        object_pose = state.object_pose
    else:
        object_pose = state.object_pose

    accel_local = R_e.T @ ee_accel
    object_in_ee = kinematics.pose.inverse().compose(object_pose)
    w_h = gripper_reaction(
        state,
        gripper.phalange_mass * accel_local,
        w_obj,
        object_in_ee,
        manipulator,
        gripper,
        g,
    )
    w_man = manipulator_reaction(state, w_h, accel_local, manipulator, g)

    gyro = gyroscopic_moment(controls.rotor_thrusts, state.uav_rates, plant.uav)
    uav_linear, uav_angular = uav_accel(
        state, controls.thrust, controls.moment, -w_man, plant.uav, manipulator, gyro, g
    )
    ee_relative = relative_ee_accel(
        state,
        ee_accel,
        uav_linear,
        uav_angular,
        kinematics.offset_body,
        kinematics.offset_rate_body,
        manipulator,
    )

    squeeze = sum(p.normal_force for p in contacts.phalanges)
    aperture_accel = (
        controls.gripper.scale * controls.gripper_force + squeeze + aperture_limit
    ) / gripper.phalange_mass

    loops = closed_loops(state, controls, plant)
    accels = (uav_linear, ee_relative, np.array([aperture_accel]))
    disturbances = tuple(loop.disturbance(a) for loop, a in zip(loops, accels))
    supply_rate = np.array(
        [float(d @ loop.velocity) for d, loop in zip(disturbances, loops)]
    )
    dissipation_rate = np.array([loop.dissipation_rate() for loop in loops])

    return Evaluation(
        uav_linear=uav_linear,
        uav_angular=uav_angular,
        ee_accel=ee_accel,
        ee_relative=ee_relative,
        aperture_accel=aperture_accel,
        contacts=contacts,
        w_obj=w_obj,
        w_h=w_h,
        w_man=w_man,
        disturbances=disturbances,
        supply_rate=supply_rate,
        dissipation_rate=dissipation_rate,
    )


def state_derivative(
    state: SystemState, controls: Controls, plant: Plant
) -> np.ndarray:
    """Time derivative of SystemState.as_vector()."""
    ev = evaluate(state, controls, plant)
    return np.concatenate(
        [
            state.uav_velocity,
            ev.uav_linear,
            (state.uav_rotation @ skew(state.uav_rates)).reshape(9),
            ev.uav_angular,
            state.ee_velocity,
            ev.ee_relative,
            [state.aperture_rate, ev.aperture_accel],
            ev.supply_rate,
            ev.dissipation_rate,
        ]
    )


# ================================================
# Controls and stepping
# ================================================


def compute_controls(
    state: SystemState, setpoints: Setpoints, contacts: ContactSet, plant: Plant
) -> Controls:
    """
    Evaluate the three impedance laws, the attitude loop and the mixer.

    The reaction moment fed to the attitude loop comes from a plant
    evaluation at this state; the end-effector motion does not depend on the
    propeller moment, so that evaluation is exact.
    """
    uav = plant.uav
    gains = plant.gains
    ff = feed_forward(
        state.mission, state, plant.manipulator, plant.gripper, plant.obj, plant.g
    )
    u_uav = uav_control(state, setpoints, gains.uav, ff)
    thrust, R_des = thrust_attitude_from_u(u_uav, uav.mass, plant.g, setpoints.yaw)
    u_man, ee_force = manipulator_control(
        state, setpoints, gains.manipulator, ff, plant.manipulator, plant.g
    )
    G = (
        build_grasp_matrix(contacts.frames)
        if state.mission is MissionPhase.DOCK
        else None
    )
    impedance = gripper_impedance(state.mission, setpoints, G, plant.gripper)
    u_h = gripper_control(state, setpoints, gains.gripper, G, plant.gripper)

    hover_split = mixer_inverse(thrust, np.zeros(3), uav)
    provisional = Controls(
        setpoints=setpoints,
        feed_forward=ff,
        u_uav=u_uav,
        thrust=thrust,
        moment=np.zeros(3),
        rotor_thrusts=hover_split,
        desired_rotation=R_des,
        u_man=u_man,
        ee_force=ee_force,
        gripper_force=u_h,
        gripper=impedance,
    )
    reaction = -evaluate(state, provisional, plant).w_man
    gyro = gyroscopic_moment(hover_split, state.uav_rates, uav)
    moment = attitude_authority(
        state,
        R_des,
        gains.attitude,
        reaction_moment(state, reaction, plant.manipulator),
        uav,
        gyro,
    )

    rotors = mixer_inverse(thrust, moment, uav)
    if uav.clamp_thrust:
        rotors = np.clip(rotors, 0.0, uav.max_rotor_thrust)
    realised_thrust, realised_moment = mixer_forward(rotors, uav)
    return replace(
        provisional,
        thrust=realised_thrust,
        moment=realised_moment,
        rotor_thrusts=rotors,
    )


def step(
    state: SystemState,
    controls: Controls,
    plant: Plant,
    config: SimConfig,
    time: float = 0.0,
) -> SystemState:
    """
    Advance the state by one fixed step with the controls held.

    The attitude is projected back onto SO(3) after the step.

    :raises SimulationDivergedError: on non-finite values or when a state
        component exceeds the divergence limit.
    """

    def f(_t: float, x: np.ndarray) -> np.ndarray:
        return state_derivative(state.with_vector(x), controls, plant)

    x = state.as_vector()
    if config.integrator == Integrator.RK4.value:
        x_next = rk4_step(f, time, x, config.dt)
    else:
        x_next = semi_implicit_euler_step(f, time, x, config.dt, VELOCITY_MASK)

    if not np.all(np.isfinite(x_next)):
        raise SimulationDivergedError(time + config.dt, "non-finite state")
    worst = int(np.argmax(np.abs(x_next)))
    if abs(x_next[worst]) > config.divergence_limit:
        raise SimulationDivergedError(
            time + config.dt,
            f"state component {worst} reached {x_next[worst]:.3e}",
        )
    x_next[SLICE_UAV_ROTATION] = orthonormalize(
        x_next[SLICE_UAV_ROTATION].reshape(3, 3)
    ).reshape(9)
    next_state = state.with_vector(x_next)
    if next_state.grasp_offset is not None:
        next_state = replace(
            next_state, object_pose=held_object_pose(next_state, plant.manipulator)
        )
    return next_state


# ================================================
# Trace
# ================================================

AXES = ("x", "y", "z")
ENERGY_FIELDS = ("T", "P", "V", "V_pre", "supply", "dissipation")


def _axes(prefix: str) -> List[str]:
    return [f"{prefix}_{axis}" for axis in AXES]


TRACE_COLUMNS: List[str] = (
    ["time", "mission"]
    + _axes("uav_pos")
    + _axes("uav_vel")
    + [f"uav_R{i}{j}" for i in range(3) for j in range(3)]
    + _axes("uav_omega")
    + _axes("ee_pos")
    + _axes("ee_vel")
    + ["aperture", "aperture_rate"]
    + _axes("object_pos")
    + _axes("uav_sp")
    + _axes("ee_sp")
    + ["finger_sp", "tracking_enabled", "tracking_clamped", "tracking_blend"]
    + ["thrust"]
    + _axes("moment")
    + [f"rotor_{i}" for i in range(1, 5)]
    + _axes("f_man")
    + _axes("m_man")
    + _axes("f_h")
    + _axes("m_h")
    + _axes("f_obj")
    + _axes("m_obj")
    + [f"fc_{i:02d}" for i in range(3 * len(CONTACT_NAMES))]
    + [f"pen_{name}" for name in CONTACT_NAMES]
    + ["attitude_error_deg"]
    + [f"{sub}_{q}" for sub in SUBSYSTEMS for q in ENERGY_FIELDS]
    + ["impact_energy", "attached"]
)


@dataclass
class SimTrace:
    """One row per step in TRACE_COLUMNS order plus run metadata."""

    frame: pd.DataFrame
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return self.frame.empty

    @property
    def dt(self) -> float:
        if "dt" in self.metadata:
            return float(self.metadata["dt"])
        return float(self.frame["time"].iloc[1] - self.frame["time"].iloc[0])

    def phases(self) -> List[str]:
        """Mission phases in order of appearance."""
        return list(dict.fromkeys(self.frame["mission"]))

    def phase_entry_time(self, phase: MissionPhase) -> Optional[float]:
        rows = self.frame.loc[self.frame["mission"] == phase.value, "time"]
        return None if rows.empty else float(rows.iloc[0])

    def to_csv(self, path: str) -> None:
        self.frame.to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path: str, metadata: Optional[Dict[str, Any]] = None):
        frame = pd.read_csv(path, float_precision="round_trip")
        return cls(frame, dict(metadata or {}))


def _impact_energy(state: SystemState, contacts: ContactSet, plant: Plant) -> float:
    """Energy scale k·δ² of the deepest active contact or stop."""
    manipulator = plant.manipulator
    gripper = plant.gripper
    ee_excess = np.maximum(
        np.maximum(manipulator.lower - state.ee_position, 0.0),
        np.maximum(state.ee_position - manipulator.upper, 0.0),
    ).max()
    aperture_excess = max(
        gripper.aperture_min - state.aperture,
        state.aperture - gripper.aperture_max,
        0.0,
    )
    return max(
        plant.contact.stiffness * contacts.max_penetration**2,
        manipulator.limit_stiffness * float(ee_excess) ** 2,
        gripper.limit_stiffness * aperture_excess**2,
    )


def _record(
    t: float,
    state: SystemState,
    controls: Controls,
    ev: Evaluation,
    sensed: ContactSet,
    energy: Dict[str, EnergyRecord],
    v_pre: Optional[Dict[str, float]],
    impact: float,
    attached: bool,
) -> List[Any]:
    sp = controls.setpoints
    values: List[Any] = [t, state.mission.value]
    values += list(state.uav_position) + list(state.uav_velocity)
    values += list(state.uav_rotation.reshape(9)) + list(state.uav_rates)
    values += list(state.ee_position) + list(state.ee_velocity)
    values += [state.aperture, state.aperture_rate]
    values += list(state.object_pose.position)
    values += list(sp.uav_position) + list(sp.ee_position)
    values += [
        sp.finger_position,
        int(sp.object_tracking_enabled),
        int(sp.tracking_clamped),
        sp.tracking_blend,
    ]
    values += [controls.thrust] + list(controls.moment) + list(controls.rotor_thrusts)
    for wrench in (ev.w_man, ev.w_h, ev.w_obj):
        values += list(wrench.force) + list(wrench.moment)
    values += list(ev.contacts.forces)
    values += [p.penetration for p in sensed.points]
    values.append(attitude_error_deg(state.uav_rotation, controls.desired_rotation))
    for sub in SUBSYSTEMS:
        record = energy[sub]
        before = record.total if v_pre is None else v_pre[sub]
        values += [
            record.kinetic,
            record.potential,
            record.total,
            before,
            record.supply,
            record.dissipation,
        ]
    values += [impact, int(attached)]
    return [float(v) if isinstance(v, (np.floating, np.integer)) else v for v in values]


# ================================================
# Mission run
# ================================================


class MissionSimulator:
    """
    Runs one scenario from its initial hover to t_end.

    The loop senses the contacts, updates the mission events, generates the
    setpoints, evaluates the controllers and integrates one step, logging a
    trace row per step.
    """

    def __init__(self, scenario: "ScenarioConfig"):
        """
        Parameters:
        - scenario (ScenarioConfig): validated scenario to simulate
        """
        self.scenario = scenario
        self.config = scenario.simulation
        self.plant = Plant.from_scenario(scenario)

        # Randomness only enters through the object pose estimate
        self.rng = np.random.default_rng(self.config.seed)

        self.mission = MissionState()
        self.monitor = EventMonitor(
            scenario.contact,
            WallAttachment(
                scenario.object.attach_pose, scenario.contact.breakaway_force
            ),
        )
        initial = scenario.initial
        self.state = initial_state(
            initial.uav_position,
            scenario.manipulator,
            scenario.gripper,
            scenario.object,
            None if initial.ee_position is None else np.asarray(initial.ee_position),
        )
        self._clamp_reported = False

    def _sense_contacts(self, state: SystemState) -> ContactSet:
        if state.mission is MissionPhase.AERIAL_GRASP:
            return ContactSet.empty()
        plant = self.plant
        return resolve_contacts(
            state, plant.manipulator, plant.gripper, plant.obj, plant.contact
        )

    def _enter_phase(self, state: SystemState, phase: MissionPhase) -> SystemState:
        """
        Apply the jump conditions of a mission transition.

        On detach the object joins the palm: its offset is frozen and the
        palm velocity is shared with the object (momentum conserving).
        """
        if phase is not MissionPhase.AERIAL_GRASP:
            return replace(state, mission=phase)
        plant = self.plant
        manipulator = plant.manipulator
        kinematics = end_effector_kinematics(state, manipulator)
        offset = kinematics.pose.inverse().compose(state.object_pose)
        hand_mass = manipulator.mass + plant.gripper.phalange_mass
        merged = hand_mass / (hand_mass + plant.obj.mass) * kinematics.velocity
        R_m = np.asarray(manipulator.mount_rotation, dtype=float)
        relative = state.uav_rotation.T @ (merged - state.uav_velocity) - cross(
            state.uav_rates, kinematics.offset_body
        )
        return replace(
            state,
            mission=phase,
            grasp_offset=offset,
            ee_velocity=R_m.T @ relative,
        )

    def _advance_mission(
        self, state: SystemState, contacts: ContactSet, t: float
    ) -> SystemState:
        if state.mission is MissionPhase.DOCK:
            pull = environment_wrench(state, contacts, self.plant.obj)
        else:
            pull = Wrench.zero(Frame.OBJECT)
        events = self.monitor.update(contacts, pull, t)
        next_mission = step_mission(self.mission, events, t)
        if next_mission.phase is not self.mission.phase:
            state = self._enter_phase(state, next_mission.phase)
            self.mission = next_mission
        return state

    def _object_estimate(self, state: SystemState) -> Pose:
        noise = self.scenario.object.pose_noise_std
        if noise <= 0.0:
            return state.object_pose
        jitter = self.rng.normal(0.0, noise, 3)
        return Pose(state.object_pose.position + jitter, state.object_pose.rotation)

    def _report_clamp(self, setpoints: Setpoints, t: float) -> None:
        if setpoints.tracking_clamped and not self._clamp_reported:
            logger.warning(
                "object tracking setpoint clamped to the workspace at t=%.3f s", t
            )
        self._clamp_reported = setpoints.tracking_clamped

    def run(self) -> SimTrace:
        """
        Simulate the whole scenario.

        Returns:
        - SimTrace: one row per step from t = 0 to t_end
        """
        config = self.config
        plant = self.plant
        n_steps = config.n_steps
        state = self.state
        rows: List[List[Any]] = []
        v_pre: Optional[Dict[str, float]] = None

        logger.info(
            "running %s: %d steps of %.4f s (%s)",
            self.scenario.name,
            n_steps,
            config.dt,
            config.integrator,
        )
        for k in range(n_steps + 1):
            t = k * config.dt

            # Discrete part: contacts, events, mission jumps
            sensed = self._sense_contacts(state)
            state = self._advance_mission(state, sensed, t)
            if state.mission is MissionPhase.AERIAL_GRASP:
                sensed = ContactSet.empty()

            # Control part: setpoints and held inputs for this step
            setpoints = generate_setpoints(
                self.scenario, t, state.uav_pose, self._object_estimate(state)
            )
            self._report_clamp(setpoints, t)
            controls = compute_controls(state, setpoints, sensed, plant)
            ev = evaluate(state, controls, plant)
            energy = energy_records(state, controls, plant)
            rows.append(
                _record(
                    t,
                    state,
                    controls,
                    ev,
                    sensed,
                    energy,
                    v_pre,
                    _impact_energy(state, sensed, plant),
                    self.monitor.attachment.attached,
                )
            )
            if k == n_steps:
                break

            # Continuous part: one integration step
            try:
                next_state = step(state, controls, plant, config, t)
            except SimulationDivergedError as error:
                logger.error("%s", error)
                raise
            v_pre = {
                name: record.total
                for name, record in energy_records(next_state, controls, plant).items()
            }
            state = next_state

        self.state = state
        metadata = {
            "scenario": self.scenario.name,
            "dt": config.dt,
            "t_end": config.t_end,
            "integrator": config.integrator,
            "seed": config.seed,
            "impact_relaxation": config.impact_relaxation,
            "contact_time": self.monitor.contact_time,
            "grasp_time": self.monitor.grasp_time,
            "detach_time": self.monitor.detach_time,
        }
        return SimTrace(pd.DataFrame(rows, columns=TRACE_COLUMNS), metadata)


def run(scenario: "ScenarioConfig") -> SimTrace:
    """Simulate a scenario; the same scenario always yields the same trace."""
    return MissionSimulator(scenario).run()


# ================================================
# Passivity monitor
# ================================================


@dataclass(frozen=True)
class PassivityReport:
    """
    Per-step passivity check of every closed loop.

    residuals holds, per subsystem, ΔV, Δsupply, the residual
    ΔV − (Δsupply − Δdissipation) and the violation flags.
    """

    residuals: pd.DataFrame
    violations: Dict[str, int]
    impact_violations: Dict[str, int]

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values()) + sum(self.impact_violations.values())

    @property
    def passed(self) -> bool:
        return self.total_violations == 0


def passivity_monitor(
    trace: SimTrace, relaxation: Optional[float] = None
) -> PassivityReport:
    """
    Check ΔV ≤ Δsupply + tol on every step of every subsystem.

    tol = 10·dt⁴·(1 + |V|). Steps with an active contact or stop at either
    end get an extra k·δ_max² times `relaxation` (the trace metadata value
    by default).

    The supply comes from `ClosedLoop.disturbance`, which rebuilds d from the
    closed-loop terms. Between events the check therefore measures how
    consistently the integrator carries V and the supply integral. Energy
    injected at an event such as a mission switch shows up as a jump of V_pre
    against V.
    """
    frame = trace.frame
    if relaxation is None:
        relaxation = float(trace.metadata.get("impact_relaxation", 1.0))
    dt = trace.dt
    impact_now = frame["impact_energy"].to_numpy()[:-1]
    impact_next = frame["impact_energy"].to_numpy()[1:]
    impact_scale = np.maximum(impact_now, impact_next)
    impact = impact_scale > 0.0

    columns: Dict[str, Any] = {"time": frame["time"].to_numpy()[:-1], "impact": impact}
    violations: Dict[str, int] = {}
    impact_violations: Dict[str, int] = {}
    for sub in SUBSYSTEMS:
        V = frame[f"{sub}_V"].to_numpy()
        V_pre = frame[f"{sub}_V_pre"].to_numpy()
        supply = frame[f"{sub}_supply"].to_numpy()
        dissipation = frame[f"{sub}_dissipation"].to_numpy()
        delta_v = V_pre[1:] - V[:-1]
        delta_supply = np.diff(supply)
        delta_dissipation = np.diff(dissipation)
        tolerance = 10.0 * dt**4 * (1.0 + np.abs(V[:-1]))
        tolerance = tolerance + np.where(impact, relaxation * impact_scale, 0.0)
        violated = delta_v > delta_supply + tolerance

        columns[f"{sub}_dV"] = delta_v
        columns[f"{sub}_dsupply"] = delta_supply
        columns[f"{sub}_residual"] = delta_v - (delta_supply - delta_dissipation)
        columns[f"{sub}_violation"] = violated
        violations[sub] = int(np.sum(violated & ~impact))
        impact_violations[sub] = int(np.sum(violated & impact))
        if violations[sub] or impact_violations[sub]:
            logger.warning(
                "passivity violated for %s on %d step(s) (%d at impacts)",
                sub,
                violations[sub] + impact_violations[sub],
                impact_violations[sub],
            )
    return PassivityReport(pd.DataFrame(columns), violations, impact_violations)
