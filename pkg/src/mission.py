"""
Mission state machine: FreeFlight → Dock → AerialGrasp.

The phase decides how the object enters the dynamics: not at all in
FreeFlight, through the contact forces in Dock and as a rigidly held load in
AerialGrasp.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from src.contact import (
    ContactParams,
    ContactSet,
    WallAttachment,
    build_grasp_matrix,
    check_detach,
    object_wrench_docked,
)
from src.dynamics import object_inertial_wrench
from src.errors import MissionSequenceError
from src.model import MissionPhase, ObjectParams, SystemState
from src.spatial_math import Frame, Vector, Wrench

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MissionState:
    phase: MissionPhase = MissionPhase.FREE_FLIGHT
    entry_time: float = 0.0


@dataclass(frozen=True)
class TransitionEvents:
    """Latched mission events; once raised they stay raised."""

    contact_made: bool = False
    grasp_secured: bool = False
    detach: bool = False

    def merge(self, other: "TransitionEvents") -> "TransitionEvents":
        return TransitionEvents(
            self.contact_made or other.contact_made,
            self.grasp_secured or other.grasp_secured,
            self.detach or other.detach,
        )


def step_mission(
    state: MissionState, events: TransitionEvents, time: float
) -> MissionState:
    """
    Advance the mission by at most one transition.

    :raises MissionSequenceError: if a grasp or a detach is reported before
        the first contact.
    """
    if (events.grasp_secured or events.detach) and not events.contact_made:
        raise MissionSequenceError(
            f"grasp/detach reported before contact at t={time:.3f} s"
        )
    if state.phase is MissionPhase.FREE_FLIGHT and events.contact_made:
        next_state = MissionState(MissionPhase.DOCK, time)
    elif (
        state.phase is MissionPhase.DOCK
        and events.grasp_secured
        and events.detach
    ):
        next_state = MissionState(MissionPhase.AERIAL_GRASP, time)
    else:
        return state
    logger.info(
        "mission %s -> %s at t=%.3f s",
        state.phase.value,
        next_state.phase.value,
        time,
    )
    return next_state


def environment_wrench(
    state: SystemState,
    contacts: ContactSet,
    obj: ObjectParams,
    accel: Optional[Vector] = None,
) -> Wrench:
    """
    Object wrench (f_obj^o, M_obj^o) for the current phase.

    :param accel: Inertial acceleration of the held object (AerialGrasp).
    """
    if state.mission is MissionPhase.DOCK:
        G = build_grasp_matrix(contacts.frames)
        return object_wrench_docked(G, contacts.forces)
    if state.mission is MissionPhase.AERIAL_GRASP:
        return object_inertial_wrench(
            state, np.zeros(3) if accel is None else accel, obj
        )
    return Wrench.zero(Frame.OBJECT)


@dataclass
class EventMonitor:
    """
    Raises the transition events from the contact state sampled every step.

    contact_made latches on the first palm penetration. grasp_secured needs
    every phalange normal above the threshold for the debounce time. The
    wall attachment is only loaded once the grasp is secured.
    """

    params: ContactParams
    attachment: WallAttachment
    events: TransitionEvents = field(default_factory=TransitionEvents)
    loaded_since: Optional[float] = None
    contact_time: Optional[float] = None
    grasp_time: Optional[float] = None
    detach_time: Optional[float] = None

    def update(
        self, contacts: ContactSet, pull: Wrench, time: float
    ) -> TransitionEvents:
        events = self.events
        if not events.contact_made and contacts.palm.active:
            events = replace(events, contact_made=True)
            self.contact_time = time
        if events.contact_made and not events.grasp_secured:
            loaded = all(
                p.normal_force > self.params.grasp_threshold
                for p in contacts.phalanges
            )
            if not loaded:
                self.loaded_since = None
            elif self.loaded_since is None:
                self.loaded_since = time
            if (
                loaded
                and time - self.loaded_since >= self.params.grasp_debounce - 1e-12
            ):
                events = replace(events, grasp_secured=True)
                self.grasp_time = time
                logger.info("grasp secured at t=%.3f s", time)
        if events.grasp_secured and not events.detach:
            self.attachment = check_detach(pull, self.attachment, time)
            if not self.attachment.attached:
                events = replace(events, detach=True)
                self.detach_time = time
                logger.info("object detached from the wall at t=%.3f s", time)
        self.events = events
        return events
