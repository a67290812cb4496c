"""Triple-loop pitch / yaw / altitude flight controller.

Three independent SISO loops, as on the real autopilot:
  - pitch: PI on pitch error plus rate damping, output to the elevator
  - yaw: proportional on wrapped heading error plus rate damping, output
    to the rudder
  - altitude: PI on altitude error, output as a flapping-frequency
    command biased around the cruise frequency

Both integrators are clamped (anti-windup) and frozen whenever the loop
output is saturated in the direction the error would push it further.
The rate-damping term on pitch is an addition over the plain PI of the
flight hardware; setting pitch_rate_kd to 0 recovers it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from perchsim.dynamics import ConfigurationError, wrap_angle
from perchsim.sensors import SensorFrame


@dataclass(frozen=True)
class ControlGains:
    pitch_kp: float             # rad elevator per rad error
    pitch_ki: float             # rad elevator per rad*s
    pitch_rate_kd: float        # rad elevator per rad/s
    yaw_kp: float               # rad rudder per rad error
    yaw_rate_kd: float          # rad rudder per rad/s
    alt_kp: float               # Hz per m error
    alt_ki: float               # Hz per m*s
    pitch_int_limit: float      # rad*s, symmetric clamp
    alt_int_limit: float        # m*s, symmetric clamp
    elevator_limit: float       # rad
    rudder_limit: float         # rad
    cruise_flap_freq: float     # Hz, altitude-loop feedforward bias
    max_flap_freq: float        # Hz, upper clamp for the frequency command

    def __post_init__(self) -> None:
        if min(self.pitch_int_limit, self.alt_int_limit,
               self.elevator_limit, self.rudder_limit) <= 0:
            raise ConfigurationError("controller limits must be positive")
        if not (0.0 <= self.cruise_flap_freq <= self.max_flap_freq):
            raise ConfigurationError("cruise_flap_freq outside [0, max_flap_freq]")


@dataclass(frozen=True)
class ControlState:
    """Integrator state threaded through controller updates."""

    pitch_integrator: float = 0.0   # rad*s
    alt_integrator: float = 0.0     # m*s
    last_update_time: float = 0.0   # s, time of last valid frame
    dropout_count: int = 0
    last_command: Optional["ControlCommand"] = None


@dataclass(frozen=True)
class ControlCommand:
    elevator: float         # rad
    rudder: float           # rad
    flap_freq_cmd: float    # Hz
    leg_angle_cmd: float    # rad, neutral here; the leg loop owns it
    claw_trigger: bool      # neutral here; the grasp logic owns it


@dataclass(frozen=True)
class Setpoints:
    pitch_ref: float        # rad
    yaw_ref: float          # rad
    alt_ref: float          # m
    flapping_enabled: bool


def _clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def _advance_integrator(
    integrator: float, error: float, dt: float, limit: float,
    raw_output: float, out_lo: float, out_hi: float,
) -> float:
    """Clamped integrator update with saturation freeze.

    The integrator holds its value while the raw loop output sits beyond
    an output limit and the error would push it further past it.
    """
    if (raw_output > out_hi and error > 0.0) or (raw_output < out_lo and error < 0.0):
        return integrator
    return _clamp(integrator + error * dt, -limit, limit)


def pitch_loop(
    refs: Setpoints, pitch: float, pitch_rate: float,
    cs: ControlState, gains: ControlGains, dt: float,
) -> tuple[float, ControlState]:
    """PI + rate damping to the elevator. Returns (elevator, new state)."""
    error = refs.pitch_ref - pitch
    raw = (
        gains.pitch_kp * error
        + gains.pitch_ki * cs.pitch_integrator
        - gains.pitch_rate_kd * pitch_rate
    )
    limit = gains.elevator_limit
    elevator = _clamp(raw, -limit, limit)
    integ = _advance_integrator(
        cs.pitch_integrator, error, dt, gains.pitch_int_limit, raw, -limit, limit
    )
    return elevator, replace(cs, pitch_integrator=integ)


def yaw_loop(refs: Setpoints, yaw: float, yaw_rate: float, gains: ControlGains) -> float:
    """Proportional heading hold with rate damping, wrapped to (-pi, pi]."""
    error = wrap_angle(refs.yaw_ref - yaw)
    raw = gains.yaw_kp * error - gains.yaw_rate_kd * yaw_rate
    return _clamp(raw, -gains.rudder_limit, gains.rudder_limit)


def altitude_loop(
    refs: Setpoints, z: float, cs: ControlState, gains: ControlGains, dt: float
) -> tuple[float, ControlState]:
    """PI altitude hold acting through the flapping frequency."""
    error = refs.alt_ref - z
    raw = (
        gains.cruise_flap_freq
        + gains.alt_kp * error
        + gains.alt_ki * cs.alt_integrator
    )
    freq = _clamp(raw, 0.0, gains.max_flap_freq)
    integ = _advance_integrator(
        cs.alt_integrator, error, dt, gains.alt_int_limit, raw, 0.0, gains.max_flap_freq
    )
    return freq, replace(cs, alt_integrator=integ)


def neutral_command() -> ControlCommand:
    return ControlCommand(0.0, 0.0, 0.0, 0.0, False)


def controller_update(
    frame: SensorFrame, refs: Setpoints,
    cs: ControlState, gains: ControlGains, dt: float,
) -> tuple[ControlCommand, ControlState]:
    """One controller cycle: compose the three loops from a sensor frame.

    An invalid frame holds the previous command unchanged (zero-order
    hold) and counts as a dropout; integrators are untouched. With
    flapping disabled the frequency command is zero and the altitude
    integrator is frozen.
    """
    if not frame.valid:
        held = cs.last_command if cs.last_command is not None else neutral_command()
        return held, replace(cs, dropout_count=cs.dropout_count + 1)

    elevator, cs = pitch_loop(refs, frame.pitch, frame.pitch_rate, cs, gains, dt)
    rudder = yaw_loop(refs, frame.yaw, frame.yaw_rate, gains)
    if refs.flapping_enabled:
        freq, cs = altitude_loop(refs, frame.position[2], cs, gains, dt)
    else:
        freq = 0.0

    cmd = ControlCommand(elevator, rudder, freq, 0.0, False)
    cs = replace(cs, last_update_time=frame.timestamp, last_command=cmd)
    return cmd, cs
