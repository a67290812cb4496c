"""Flight phase sequencing and distance-based triggers.

The flight walks a one-way chain

    ON_LAUNCHER -> CONTROLLED_FLIGHT -> BRANCH_APPROACH -> FLAP_CUTOFF
                -> {PERCHED | MISSED}

with CRASHED reachable from any non-terminal phase (ground contact,
non-finite state, or timeout). The distance driving the triggers is the
horizontal distance from the claw tip to the branch plane: the claw is
the device that has to arrive. The PERCHED / MISSED decision itself
belongs to the grasp model; the transition function consumes it once the
flight loop has evaluated the contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from perchsim.control import Setpoints
from perchsim.dynamics import (
    BranchGeometry,
    ConfigurationError,
    SimState,
    Vec3,
    VehicleParams,
    claw_tip_position,
)


class Phase(Enum):
    ON_LAUNCHER = "on_launcher"
    CONTROLLED_FLIGHT = "controlled_flight"
    BRANCH_APPROACH = "branch_approach"
    FLAP_CUTOFF = "flap_cutoff"
    PERCHED = "perched"
    MISSED = "missed"
    CRASHED = "crashed"


TERMINAL_PHASES = frozenset({Phase.PERCHED, Phase.MISSED, Phase.CRASHED})

# Legal successor sets; used by the log-legality checker as well.
LEGAL_TRANSITIONS: dict[Phase, frozenset[Phase]] = {
    Phase.ON_LAUNCHER: frozenset({Phase.CONTROLLED_FLIGHT, Phase.CRASHED}),
    Phase.CONTROLLED_FLIGHT: frozenset({Phase.BRANCH_APPROACH, Phase.CRASHED}),
    Phase.BRANCH_APPROACH: frozenset({Phase.FLAP_CUTOFF, Phase.CRASHED}),
    Phase.FLAP_CUTOFF: frozenset({Phase.PERCHED, Phase.MISSED, Phase.CRASHED}),
    Phase.PERCHED: frozenset(),
    Phase.MISSED: frozenset(),
    Phase.CRASHED: frozenset(),
}


@dataclass(frozen=True)
class TriggerConfig:
    approach_distance: float    # m, detector enable (1.5 nominal)
    cutoff_distance: float      # m, flapping stop (0.2 nominal)
    contact_distance: float     # m, grasp evaluation plane offset
    flyby_distance: float       # m past the plane that counts as a miss
    ground_altitude: float      # m
    timeout: float              # s

    def __post_init__(self) -> None:
        if not (0.0 < self.cutoff_distance < self.approach_distance):
            raise ConfigurationError(
                "need 0 < cutoff_distance < approach_distance"
            )
        if self.timeout <= 0 or self.flyby_distance <= 0:
            raise ConfigurationError("timeout and flyby_distance must be positive")
        if self.contact_distance < 0:
            raise ConfigurationError("contact_distance must be >= 0")


def phase_transition(
    phase: Phase,
    state: SimState,
    geometry: BranchGeometry,
    trig: TriggerConfig,
    params: VehicleParams,
    grasp_outcome: Phase | None = None,
) -> Phase:
    """Advance the phase machine by at most one legal transition.

    grasp_outcome carries the PERCHED / MISSED decision made by the
    grasp model at contact (or fly-by); it is only honored while in
    FLAP_CUTOFF. Terminal phases never exit.
    """
    if phase in TERMINAL_PHASES:
        return phase

    x, y, z = state.position
    vx, vy, vz = state.velocity
    finite = (
        math.isfinite(x) and math.isfinite(y) and math.isfinite(z)
        and math.isfinite(vx) and math.isfinite(vy) and math.isfinite(vz)
        and math.isfinite(state.pitch) and math.isfinite(state.yaw)
    )
    if not finite or z <= trig.ground_altitude or state.time > trig.timeout:
        return Phase.CRASHED

    if phase is Phase.ON_LAUNCHER:
        # The run starts at rail exit, so the first check leaves the rail.
        return Phase.CONTROLLED_FLIGHT

    distance = geometry.plane_distance(claw_tip_position(state, params))
    if phase is Phase.CONTROLLED_FLIGHT:
        if distance <= trig.approach_distance:
            return Phase.BRANCH_APPROACH
        return phase
    if phase is Phase.BRANCH_APPROACH:
        if distance <= trig.cutoff_distance:
            return Phase.FLAP_CUTOFF
        return phase
    # FLAP_CUTOFF: wait for the grasp decision.
    if grasp_outcome is not None:
        if grasp_outcome not in (Phase.PERCHED, Phase.MISSED):
            raise ValueError(f"grasp outcome must be terminal, got {grasp_outcome}")
        return grasp_outcome
    return phase


def setpoints_for_phase(
    phase: Phase,
    pitch_ref: float,
    geometry: BranchGeometry,
    position: Vec3,
) -> Setpoints:
    """Controller set-points for the current phase.

    Flying phases hold the perching pitch, the branch height as the
    altitude target and a bearing-to-branch heading. Flap cutoff keeps
    the surfaces regulating the same trim with the flapping disabled;
    terminal phases command everything neutral.
    """
    if phase in TERMINAL_PHASES:
        return Setpoints(0.0, 0.0, 0.0, flapping_enabled=False)
    bx, by, bz = geometry.branch.center
    bearing = math.atan2(by - position[1], bx - position[0])
    return Setpoints(
        pitch_ref=pitch_ref,
        yaw_ref=bearing,
        alt_ref=bz,
        flapping_enabled=(phase is not Phase.FLAP_CUTOFF),
    )


def detector_enabled(phase: Phase) -> bool:
    """The optical detector runs only inside the approach envelope."""
    return phase in (Phase.BRANCH_APPROACH, Phase.FLAP_CUTOFF)
