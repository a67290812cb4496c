"""Perch success model evaluated at branch-plane crossing.

Three gates decide the outcome of a contact:
  - capture: the branch must lie inside the claw jaw envelope and the
    vehicle must not glide past it during the bistable closure time,
  - hold: the closed claw's torque (with its friction margin) must beat
    the gravity torque from the center-of-mass offset,
  - load: the constant-deceleration impact force must stay below the
    structural limit.

Closure is a geometric gate over the 25 ms snap, not a contact-dynamics
simulation: the model reproduces the success envelope, not force
histories.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from perchsim.dynamics import BranchSpec, ConfigurationError, Vec3, VehicleParams


class FailureReason(Enum):
    NONE = "none"
    MISS_VERTICAL = "miss_vertical"
    MISS_LATERAL = "miss_lateral"
    SLIP_DURING_CLOSURE = "slip_during_closure"
    HOLD_TORQUE_EXCEEDED = "hold_torque_exceeded"
    OVERLOAD = "overload"


@dataclass(frozen=True)
class ContactEvent:
    """Kinematic snapshot at the branch-plane crossing."""

    time: float                 # s
    claw_tip_position: Vec3     # m
    relative_speed: float       # m/s, claw relative to the (static) branch
    vertical_miss: float        # m, claw minus branch, positive above
    lateral_miss: float         # m, along the branch axis from its center

    def __post_init__(self) -> None:
        if self.relative_speed < 0:
            raise ConfigurationError("relative_speed must be >= 0")


@dataclass(frozen=True)
class GraspResult:
    captured: bool
    held: bool
    impact_force: float         # N
    failure_reason: FailureReason


@dataclass(frozen=True)
class GraspConfig:
    """Contact-evaluation constants (scenario data, not paper values)."""

    com_offset: float           # m, claw axis to vehicle center of mass
    stop_distance: float        # m, deceleration distance for the impact model
    overload_limit: float       # N

    def __post_init__(self) -> None:
        if self.com_offset < 0:
            raise ConfigurationError("com_offset must be >= 0")
        if self.stop_distance <= 0 or self.overload_limit <= 0:
            raise ConfigurationError("stop_distance and overload_limit must be positive")


def capture_check(
    ev: ContactEvent, params: VehicleParams, branch: BranchSpec
) -> tuple[bool, FailureReason]:
    """Geometric capture gate at plane crossing.

    The branch must fit inside the jaw (half aperture minus branch
    radius, both vertically) and inside the branch span laterally, and
    the forward travel during the closure time must stay within the
    capture depth margin or the branch slips back out.
    """
    if abs(ev.vertical_miss) > 0.5 * params.claw_aperture - branch.radius:
        return False, FailureReason.MISS_VERTICAL
    if abs(ev.lateral_miss) > 0.5 * branch.length:
        return False, FailureReason.MISS_LATERAL
    if ev.relative_speed * params.claw_close_time > params.capture_depth_margin:
        return False, FailureReason.SLIP_DURING_CLOSURE
    return True, FailureReason.NONE


def hold_check(
    com_offset: float, params: VehicleParams, gravity: float = 9.81
) -> tuple[bool, FailureReason]:
    """Post-closure hold gate against the gravity torque.

    Held iff m * g * com_offset <= claw_torque * pad_friction_coeff,
    i.e. the offset stays below claw_torque * margin / (m * g).
    """
    if com_offset < 0:
        raise ConfigurationError("com_offset must be >= 0")
    gravity_torque = params.mass * gravity * com_offset
    if gravity_torque <= params.claw_torque * params.pad_friction_coeff:
        return True, FailureReason.NONE
    return False, FailureReason.HOLD_TORQUE_EXCEEDED


def impact_force(ev: ContactEvent, params: VehicleParams, stop_distance: float) -> float:
    """Constant-deceleration impact force: m v^2 / (2 s)."""
    if stop_distance <= 0:
        raise ConfigurationError("stop_distance must be positive")
    v = ev.relative_speed
    return params.mass * v * v / (2.0 * stop_distance)


def evaluate_grasp(
    ev: ContactEvent,
    params: VehicleParams,
    branch: BranchSpec,
    cfg: GraspConfig,
    gravity: float,
) -> GraspResult:
    """Full contact evaluation: capture, then hold, then load.

    The perched outcome requires all three gates; the failure reason is
    the first gate that failed.
    """
    force = impact_force(ev, params, cfg.stop_distance)
    captured, reason = capture_check(ev, params, branch)
    held = False
    if captured:
        held, hold_reason = hold_check(cfg.com_offset, params, gravity)
        if not held:
            reason = hold_reason
        elif force >= cfg.overload_limit:
            reason = FailureReason.OVERLOAD
    return GraspResult(captured=captured, held=held, impact_force=force, failure_reason=reason)
