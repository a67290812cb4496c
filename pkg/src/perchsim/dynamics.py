"""Reduced-order ornithopter flight dynamics.

Model summary:
  - World frame: x downrange, y lateral (left positive), z up.
  - 8 mechanical DOF as states: position (3), world-frame velocity (3),
    pitch + pitch rate, yaw + yaw rate, plus the flapping phase angle.
    Roll is not modeled; only pitch, yaw and altitude are controlled.
  - Aerodynamics: flat-plate lift/drag acting at the reference point.
    Lift is perpendicular to the airspeed vector in the vertical plane
    that contains it; drag opposes the airspeed vector.
  - Flapping: mean thrust along the body x axis proportional to the
    square of the flapping frequency, plus a zero-mean vertical force
    oscillation at the flap phase (the visible bobbing of the vehicle).
  - Moments: control-surface effectiveness scales with dynamic pressure
    (V^2); rate damping scales with V; static stability restores the
    attitude toward the velocity direction.

Integration is classical RK4 at a fixed step. flap_freq, leg_angle and
claw_closed are not continuous states: they are piecewise constant over
a step and updated by the controller / leg servo / grasp logic between
steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from perchsim.control import ControlCommand

TWO_PI = 2.0 * math.pi

# Hard cap on the integrator step: keeps >= 40 steps per flap cycle at
# the 5 Hz flapping ceiling, where the vertical force oscillation is the
# fastest dynamic in the model.
DT_MAX = 0.005

Vec3 = tuple[float, float, float]


class DynamicsFault(Exception):
    """Integration produced a non-finite state (model blew up)."""


class ConfigurationError(Exception):
    """A parameter set or launch configuration violates its invariants."""


@dataclass(frozen=True)
class VehicleParams:
    """Physical and actuation parameters of the simulated ornithopter.

    Units: SI throughout (kg, m, s, rad, N, Hz). The damping/stability
    coefficients are moments per rad (or rad/s) per (m/s)^2 (or m/s).
    """

    mass: float                     # kg
    wingspan: float                 # m
    wing_area: float                # m^2, effective lifting area
    pitch_inertia: float            # kg m^2
    yaw_inertia: float              # kg m^2
    flap_thrust_coeff: float        # N s^2: thrust = coeff * freq^2
    flap_osc_amplitude: float       # N: peak vertical force at max_flap_freq
    max_flap_freq: float            # Hz
    cruise_flap_freq: float         # Hz, trim frequency for level flight
    elevator_effectiveness: float   # N m / rad per (m/s)^2
    rudder_effectiveness: float     # N m / rad per (m/s)^2
    pitch_damping: float            # N m s / rad per (m/s)
    yaw_damping: float              # N m s / rad per (m/s)
    pitch_stability: float          # N m / rad per (m/s)^2
    yaw_stability: float            # N m / rad per (m/s)^2
    parasitic_drag_coeff: float     # dimensionless CD0
    leg_length: float               # m
    leg_angle_range: tuple[float, float]  # rad, (min, max), contains 0
    leg_max_rate: float             # rad/s
    claw_aperture: float            # m, jaw opening
    claw_close_time: float          # s
    claw_torque: float              # N m
    capture_depth_margin: float     # m, forward travel the claw tolerates
    pad_friction_coeff: float       # dimensionless hold margin factor

    def __post_init__(self) -> None:
        if self.mass <= 0 or self.wing_area <= 0:
            raise ConfigurationError("mass and wing_area must be positive")
        if self.pitch_inertia <= 0 or self.yaw_inertia <= 0:
            raise ConfigurationError("inertias must be positive")
        if not (0.0 < self.max_flap_freq <= 10.0):
            raise ConfigurationError("max_flap_freq must be in (0, 10] Hz")
        if self.flap_thrust_coeff <= 0:
            raise ConfigurationError("flap_thrust_coeff must be positive")
        if not (0.0 <= self.cruise_flap_freq <= self.max_flap_freq):
            raise ConfigurationError("cruise_flap_freq outside [0, max_flap_freq]")
        if self.claw_close_time <= 0 or self.claw_torque <= 0 or self.claw_aperture <= 0:
            raise ConfigurationError("claw close time, torque and aperture must be positive")
        lo, hi = self.leg_angle_range
        if not (lo < hi and lo <= 0.0 <= hi):
            raise ConfigurationError("leg_angle_range must be a nonempty interval containing 0")
        if self.leg_length <= 0 or self.leg_max_rate <= 0:
            raise ConfigurationError("leg_length and leg_max_rate must be positive")
        if self.capture_depth_margin <= 0:
            raise ConfigurationError("capture_depth_margin must be positive")


@dataclass(frozen=True)
class Environment:
    gravity: float = 9.81           # m/s^2
    air_density: float = 1.225      # kg/m^3
    wind: Vec3 = (0.0, 0.0, 0.0)    # m/s, world frame

    def __post_init__(self) -> None:
        if self.gravity <= 0 or self.air_density <= 0:
            raise ConfigurationError("gravity and air_density must be positive")


@dataclass(frozen=True)
class BranchSpec:
    """The perching target: a horizontal cylinder."""

    center: Vec3                    # m, world frame
    length: float                   # m
    radius: float                   # m
    axis: Vec3                      # unit vector, horizontal

    def __post_init__(self) -> None:
        if self.length <= 0 or self.radius <= 0:
            raise ConfigurationError("branch length and radius must be positive")
        ax, ay, az = self.axis
        norm = math.sqrt(ax * ax + ay * ay + az * az)
        if abs(norm - 1.0) > 1e-9 or abs(az) > 1e-9:
            raise ConfigurationError("branch axis must be horizontal and unit-norm")


@dataclass(frozen=True)
class LaunchConfig:
    rail_length: float              # m
    exit_speed: float               # m/s, in (0, 10] (rail capability)
    angle_of_attack: float          # rad, pitch at release
    rail_height: float              # m
    lateral_offset: float           # m, perpendicular to heading, left positive
    heading: float                  # rad, rail direction in world frame

    def __post_init__(self) -> None:
        if self.rail_length <= 0:
            raise ConfigurationError("rail_length must be positive")
        if not (0.0 < self.exit_speed <= 10.0):
            raise ConfigurationError(
                f"exit_speed must be in (0, 10] m/s, got {self.exit_speed}"
            )


@dataclass(frozen=True)
class SimState:
    """Full vehicle state at one instant."""

    time: float                     # s
    position: Vec3                  # m
    velocity: Vec3                  # m/s
    pitch: float                    # rad, nose-up positive
    pitch_rate: float               # rad/s
    yaw: float                      # rad
    yaw_rate: float                 # rad/s
    flap_freq: float                # Hz, currently realized frequency
    flap_phase: float               # rad in [0, 2*pi)
    leg_angle: float                # rad, claw-up positive relative to body x
    claw_closed: bool


def aero_coefficients(alpha: float, parasitic_drag_coeff: float) -> tuple[float, float]:
    """Flat-plate lift and drag coefficients at angle of attack alpha.

    CL = 2 sin(a) cos(a), CD = CD0 + 2 sin^2(a). Valid over the full
    angle range, including the 30-40 deg regime perching flight lives in.
    """
    s = math.sin(alpha)
    return 2.0 * s * math.cos(alpha), parasitic_drag_coeff + 2.0 * s * s


def flapping_forces(flap_freq: float, flap_phase: float, params: VehicleParams) -> Vec3:
    """Body-frame force from the flapping wings.

    Mean thrust along body x is flap_thrust_coeff * freq^2; the vertical
    component is a zero-mean oscillation at the flap phase whose
    amplitude scales with (freq / max_freq)^2. Zero everywhere when the
    flapping is stopped.
    """
    if flap_freq < 0.0 or flap_freq > params.max_flap_freq:
        raise ValueError(
            f"flap_freq {flap_freq} outside [0, {params.max_flap_freq}] Hz "
            "(controller saturation bug)"
        )
    if flap_freq == 0.0:
        return (0.0, 0.0, 0.0)
    thrust = params.flap_thrust_coeff * flap_freq * flap_freq
    ratio = flap_freq / params.max_flap_freq
    osc = params.flap_osc_amplitude * ratio * ratio * math.sin(flap_phase)
    return (thrust, 0.0, osc)


def _wrap_pi(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


def _make_deriv(params: VehicleParams, env: Environment):
    """Build the state-derivative closure with parameters bound as locals.

    The returned function maps the 11-float continuous state tuple
    (x, y, z, vx, vy, vz, pitch, pitch_rate, yaw, yaw_rate, flap_phase)
    plus (elevator, rudder, flap_freq) to its time derivative. Binding
    the constants once keeps the RK4 inner loop cheap.
    """
    sin = math.sin
    cos = math.cos
    atan2 = math.atan2
    sqrt = math.sqrt

    mass = params.mass
    inv_m = 1.0 / mass
    area = params.wing_area
    cd0 = params.parasitic_drag_coeff
    kt = params.flap_thrust_coeff
    osc_amp = params.flap_osc_amplitude
    fmax = params.max_flap_freq
    elev_eff = params.elevator_effectiveness
    rud_eff = params.rudder_effectiveness
    c_pd = params.pitch_damping
    c_yd = params.yaw_damping
    c_ps = params.pitch_stability
    c_ys = params.yaw_stability
    inv_iy = 1.0 / params.pitch_inertia
    inv_iz = 1.0 / params.yaw_inertia
    g = env.gravity
    half_rho = 0.5 * env.air_density
    wx, wy, wz = env.wind

    def deriv(s: tuple, elevator: float, rudder: float, flap_freq: float) -> tuple:
        (_, _, _, vx, vy, vz, pitch, pitch_rate, yaw, yaw_rate, _) = s

        # Airspeed and flow angles
        ax = vx - wx
        ay = vy - wy
        az = vz - wz
        v2 = ax * ax + ay * ay + az * az

        fx = 0.0
        fy = 0.0
        fz = -mass * g
        m_pitch = 0.0
        m_yaw = 0.0

        if v2 > 1e-12:
            v = sqrt(v2)
            vh = sqrt(ax * ax + ay * ay)
            gamma = atan2(az, vh)
            chi = atan2(ay, ax) if vh > 1e-9 else yaw
            alpha = _wrap_pi(pitch - gamma)

            sa = sin(alpha)
            cl = 2.0 * sa * cos(alpha)
            cd = cd0 + 2.0 * sa * sa
            q_s = half_rho * v2 * area
            lift = q_s * cl
            drag = q_s * cd

            # Drag opposes the airspeed; lift is perpendicular to it in
            # the vertical plane containing it.
            sg = sin(gamma)
            cg = cos(gamma)
            cchi = cos(chi)
            schi = sin(chi)
            inv_v = 1.0 / v
            fx += -drag * ax * inv_v - lift * sg * cchi
            fy += -drag * ay * inv_v - lift * sg * schi
            fz += -drag * az * inv_v + lift * cg

            beta = _wrap_pi(chi - yaw)
            m_pitch = v2 * (elev_eff * elevator - c_ps * alpha) - c_pd * v * pitch_rate
            m_yaw = v2 * (rud_eff * rudder + c_ys * beta) - c_yd * v * yaw_rate

        # Flapping force: body frame (thrust, 0, osc) rotated by yaw/pitch.
        if flap_freq > 0.0:
            thrust = kt * flap_freq * flap_freq
            ratio = flap_freq / fmax
            osc = osc_amp * ratio * ratio * sin(s[10])
            cp = cos(pitch)
            sp = sin(pitch)
            cy = cos(yaw)
            sy = sin(yaw)
            fwd = thrust * cp - osc * sp    # horizontal magnitude along heading
            fx += fwd * cy
            fy += fwd * sy
            fz += thrust * sp + osc * cp

        return (
            vx,
            vy,
            vz,
            fx * inv_m,
            fy * inv_m,
            fz * inv_m,
            pitch_rate,
            m_pitch * inv_iy,
            yaw_rate,
            m_yaw * inv_iz,
            TWO_PI * flap_freq,
        )

    return deriv


def _state_to_tuple(state: SimState) -> tuple:
    x, y, z = state.position
    vx, vy, vz = state.velocity
    return (
        x, y, z, vx, vy, vz,
        state.pitch, state.pitch_rate, state.yaw, state.yaw_rate,
        state.flap_phase,
    )


def _tuple_to_state(s: tuple, template: SimState, time: float) -> SimState:
    phase = math.fmod(s[10], TWO_PI)
    if phase < 0.0:
        phase += TWO_PI
    return SimState(
        time=time,
        position=(s[0], s[1], s[2]),
        velocity=(s[3], s[4], s[5]),
        pitch=s[6],
        pitch_rate=s[7],
        yaw=s[8],
        yaw_rate=s[9],
        flap_freq=template.flap_freq,
        flap_phase=phase,
        leg_angle=template.leg_angle,
        claw_closed=template.claw_closed,
    )


def make_stepper(params: VehicleParams, env: Environment, dt: float):
    """Build a tuple-level RK4 stepper for the fixed step dt.

    The flight loop uses this directly; step_rk4 wraps it for the
    SimState API. Raises DynamicsFault if a step goes non-finite.
    """
    if dt <= 0.0 or dt > DT_MAX:
        raise ConfigurationError(f"dt must be in (0, {DT_MAX}] s, got {dt}")
    deriv = _make_deriv(params, env)
    half = 0.5 * dt
    sixth = dt / 6.0
    isfinite = math.isfinite

    def step(s: tuple, elevator: float, rudder: float, flap_freq: float) -> tuple:
        k1 = deriv(s, elevator, rudder, flap_freq)
        s2 = tuple(si + half * ki for si, ki in zip(s, k1))
        k2 = deriv(s2, elevator, rudder, flap_freq)
        s3 = tuple(si + half * ki for si, ki in zip(s, k2))
        k3 = deriv(s3, elevator, rudder, flap_freq)
        s4 = tuple(si + dt * ki for si, ki in zip(s, k3))
        k4 = deriv(s4, elevator, rudder, flap_freq)
        out = tuple(
            si + sixth * (a + 2.0 * (b + c) + d)
            for si, a, b, c, d in zip(s, k1, k2, k3, k4)
        )
        for v in out:
            if not isfinite(v):
                raise DynamicsFault("non-finite state after RK4 step")
        return out

    return step


def state_derivative(
    state: SimState, cmd: "ControlCommand", params: VehicleParams, env: Environment
) -> tuple:
    """Time derivative of the continuous state under the given command.

    Returns (dx, dy, dz, dvx, dvy, dvz, dpitch, dpitch_rate, dyaw,
    dyaw_rate, dflap_phase). Raises DynamicsFault on non-finite output.
    """
    out = _make_deriv(params, env)(
        _state_to_tuple(state), cmd.elevator, cmd.rudder, state.flap_freq
    )
    for v in out:
        if not math.isfinite(v):
            raise DynamicsFault("non-finite state derivative")
    return out


def step_rk4(
    state: SimState,
    cmd: "ControlCommand",
    params: VehicleParams,
    env: Environment,
    dt: float,
) -> SimState:
    """Advance the state by one RK4 step of size dt.

    flap_phase is re-normalized to [0, 2*pi); claw_closed, leg_angle and
    flap_freq pass through unchanged (they are updated by the grasp
    logic, leg servo and controller respectively).
    """
    step = make_stepper(params, env, dt)
    out = step(_state_to_tuple(state), cmd.elevator, cmd.rudder, state.flap_freq)
    return _tuple_to_state(out, state, state.time + dt)


def launch_release(
    cfg: LaunchConfig, params: VehicleParams, initial_flap_freq: float | None = None
) -> SimState:
    """State at rail exit.

    The rail accelerates horizontally, so the flight-path angle at exit
    is zero and the configured angle of attack is realized as pitch.
    The release point sits rail_length along the heading from the rail
    origin, displaced laterally by lateral_offset, at rail_height. The
    wings are already flapping at the cruise frequency.
    """
    f0 = params.cruise_flap_freq if initial_flap_freq is None else initial_flap_freq
    if not (0.0 <= f0 <= params.max_flap_freq):
        raise ConfigurationError("initial flap frequency outside [0, max_flap_freq]")
    ch = math.cos(cfg.heading)
    sh = math.sin(cfg.heading)
    x = cfg.rail_length * ch - cfg.lateral_offset * sh
    y = cfg.rail_length * sh + cfg.lateral_offset * ch
    return SimState(
        time=0.0,
        position=(x, y, cfg.rail_height),
        velocity=(cfg.exit_speed * ch, cfg.exit_speed * sh, 0.0),
        pitch=cfg.angle_of_attack,
        pitch_rate=0.0,
        yaw=cfg.heading,
        yaw_rate=0.0,
        flap_freq=f0,
        flap_phase=0.0,
        leg_angle=0.0,
        claw_closed=False,
    )


def claw_tip_position(state: SimState, params: VehicleParams) -> Vec3:
    """World position of the claw tip.

    The leg extends leg_length from the body reference point in the body
    vertical plane, at leg_angle above the body x axis, so the claw
    elevation in the world is pitch + leg_angle.
    """
    x, y, z = state.position
    el = state.pitch + state.leg_angle
    horiz = params.leg_length * math.cos(el)
    return (
        x + horiz * math.cos(state.yaw),
        y + horiz * math.sin(state.yaw),
        z + params.leg_length * math.sin(el),
    )


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]. Shared by control and guidance."""
    return _wrap_pi(angle)


@dataclass(frozen=True)
class BranchGeometry:
    """Branch plane frame shared by the FSM, detector and grasp checks.

    The branch plane is the vertical plane containing the branch axis.
    approach_normal is its horizontal unit normal oriented toward the
    launch side, so plane_distance() is positive before the crossing and
    negative after.
    """

    branch: BranchSpec
    approach_normal: Vec3

    @classmethod
    def from_launch_side(cls, branch: BranchSpec, reference_point: Vec3) -> "BranchGeometry":
        """Orient the plane normal toward the given launch-side point."""
        ax, ay, _ = branch.axis
        # Horizontal normal of the vertical plane containing the axis
        nx, ny = ay, -ax
        bx, by, _ = branch.center
        if nx * (reference_point[0] - bx) + ny * (reference_point[1] - by) < 0.0:
            nx, ny = -nx, -ny
        return cls(branch=branch, approach_normal=(nx, ny, 0.0))

    def plane_distance(self, point: Vec3) -> float:
        """Horizontal distance from point to the branch plane, launch side positive."""
        nx, ny, _ = self.approach_normal
        bx, by, _ = self.branch.center
        return nx * (point[0] - bx) + ny * (point[1] - by)

    def along_axis(self, point: Vec3) -> float:
        """Signed offset of point along the branch axis from the branch center."""
        ax, ay, _ = self.branch.axis
        bx, by, _ = self.branch.center
        return ax * (point[0] - bx) + ay * (point[1] - by)
