"""Sensor and leg-actuation models.

Three pieces feed the closed loop:
  - a motion-capture channel (rate, latency, Gaussian noise, dropouts)
    streaming the vehicle pose to the controller,
  - the claw-mounted optical line detector reporting the branch position
    relative to the claw once the vehicle is close enough,
  - the rate-limited elbow servo that tilts the leg to put the claw on
    the detected line, running at its own 50 Hz cadence.

All functions are stateless; the latency buffer is owned by the caller
and the mocap noise stream is passed in per run.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from perchsim.dynamics import (
    BranchGeometry,
    ConfigurationError,
    SimState,
    Vec3,
    VehicleParams,
    claw_tip_position,
    wrap_angle,
)


@dataclass(frozen=True)
class SensorFrame:
    """One motion-capture measurement. Pose fields are meaningful only
    when valid is True."""

    timestamp: float        # s, time the pose refers to (current - latency)
    position: Vec3          # m
    pitch: float            # rad
    yaw: float              # rad
    pitch_rate: float       # rad/s
    yaw_rate: float         # rad/s
    valid: bool


@dataclass(frozen=True)
class MocapModel:
    rate: float                 # Hz
    latency: float              # s
    position_noise_std: float   # m, per axis
    angle_noise_std: float      # rad; also used for the rate channels (per s)
    dropout_prob: float         # per-frame probability

    def __post_init__(self) -> None:
        if self.rate <= 0 or self.latency < 0:
            raise ConfigurationError("mocap rate must be > 0 and latency >= 0")
        if self.position_noise_std < 0 or self.angle_noise_std < 0:
            raise ConfigurationError("noise stds must be >= 0")
        if not (0.0 <= self.dropout_prob < 1.0):
            raise ConfigurationError("dropout_prob must be in [0, 1)")


@dataclass(frozen=True)
class LineDetection:
    vertical_offset: float  # m, branch minus claw, positive up
    lateral_offset: float   # m, branch minus claw along the branch axis
    range: float            # m, horizontal distance claw to branch plane
    valid: bool


@dataclass(frozen=True)
class DetectorModel:
    """Optical line detector envelope. Range and field of view are
    scenario data; the hardware publishes only its 1.5 m working range."""

    range: float                # m
    fov_vertical_halfwidth: float   # m
    fov_lateral_halfwidth: float    # m

    def __post_init__(self) -> None:
        if min(self.range, self.fov_vertical_halfwidth, self.fov_lateral_halfwidth) <= 0:
            raise ConfigurationError("detector range and FOV half-widths must be positive")


@dataclass(frozen=True)
class LegServoModel:
    update_rate: float          # Hz (50 in the nominal scenario)
    max_rate: float             # rad/s
    angle_range: tuple[float, float]    # rad
    leg_length: float           # m

    def __post_init__(self) -> None:
        if self.update_rate <= 0 or self.max_rate <= 0 or self.leg_length <= 0:
            raise ConfigurationError("leg servo rates and leg length must be positive")


# Pose record buffered for latency interpolation:
# (time, x, y, z, pitch, yaw, pitch_rate, yaw_rate)
_Pose = tuple[float, float, float, float, float, float, float, float]


class PoseHistory:
    """Caller-owned ring buffer of true poses used to realize latency."""

    def __init__(self, capacity: int = 64):
        self._buf: deque[_Pose] = deque(maxlen=capacity)

    def append(self, state: SimState) -> None:
        x, y, z = state.position
        self._buf.append(
            (state.time, x, y, z, state.pitch, state.yaw,
             state.pitch_rate, state.yaw_rate)
        )

    @property
    def latest_time(self) -> float:
        return self._buf[-1][0]

    def sample(self, t: float) -> _Pose | None:
        """Linearly interpolated pose at time t, or None if t precedes
        the buffered history (startup transient)."""
        buf = self._buf
        if not buf or t < buf[0][0] - 1e-12:
            return None
        if t >= buf[-1][0]:
            return buf[-1]
        # Buffers are tiny (a few latency steps); linear scan is fine.
        after = buf[-1]
        before = buf[0]
        for rec in reversed(buf):
            if rec[0] <= t:
                before = rec
                break
            after = rec
        span = after[0] - before[0]
        if span <= 0.0:
            return before
        w = (t - before[0]) / span
        lerp = lambda a, b: a + w * (b - a)
        alerp = lambda a, b: a + w * wrap_angle(b - a)
        return (
            t,
            lerp(before[1], after[1]),
            lerp(before[2], after[2]),
            lerp(before[3], after[3]),
            alerp(before[4], after[4]),
            alerp(before[5], after[5]),
            lerp(before[6], after[6]),
            lerp(before[7], after[7]),
        )


def mocap_sample(
    history: PoseHistory, model: MocapModel, rng: np.random.Generator
) -> SensorFrame:
    """Sample the mocap channel at the current instant.

    Returns the true pose delayed by the channel latency with zero-mean
    Gaussian noise per field. Frames drop out with dropout_prob; a
    history shorter than the latency also yields an invalid frame. The
    random draw count per call is fixed so substreams stay aligned
    regardless of outcomes.
    """
    dropped = rng.random() < model.dropout_prob
    noise = rng.standard_normal(7)

    t_meas = history.latest_time - model.latency
    pose = history.sample(t_meas)
    if pose is None:
        return SensorFrame(t_meas, (0.0, 0.0, 0.0), 0.0, 0.0, 0.0, 0.0, valid=False)

    ps = model.position_noise_std
    ans = model.angle_noise_std
    return SensorFrame(
        timestamp=pose[0],
        position=(pose[1] + ps * noise[0], pose[2] + ps * noise[1], pose[3] + ps * noise[2]),
        pitch=pose[4] + ans * noise[3],
        yaw=pose[5] + ans * noise[4],
        pitch_rate=pose[6] + ans * noise[5],
        yaw_rate=pose[7] + ans * noise[6],
        valid=not dropped,
    )


def line_detector(
    true_state: SimState,
    geometry: BranchGeometry,
    params: VehicleParams,
    detector: DetectorModel,
) -> LineDetection:
    """Branch position relative to the claw tip, if the detector sees it.

    Valid only while the claw is on the approach side of the branch
    plane within the detector range and the branch lies inside the field
    of view. Offsets are branch minus claw: positive vertical_offset
    means the branch is above the claw.
    """
    claw = claw_tip_position(true_state, params)
    rng_m = geometry.plane_distance(claw)
    v_off = geometry.branch.center[2] - claw[2]
    l_off = -geometry.along_axis(claw)
    valid = (
        0.0 <= rng_m <= detector.range
        and abs(v_off) <= detector.fov_vertical_halfwidth
        and abs(l_off) <= detector.fov_lateral_halfwidth
    )
    return LineDetection(v_off, l_off, rng_m, valid)


def leg_servo_update(
    current: float, detection: LineDetection, model: LegServoModel, dt: float
) -> float:
    """One 50 Hz leg-servo correction toward the detected branch line.

    The target rotates the claw through arctan(vertical_offset / leg
    length); motion toward it is slew-limited and clamped to the
    mechanical range. An invalid detection holds position.
    """
    if not detection.valid:
        return current
    target = current + math.atan2(detection.vertical_offset, model.leg_length)
    lo, hi = model.angle_range
    target = min(max(target, lo), hi)
    max_step = model.max_rate * dt
    delta = target - current
    if delta > max_step:
        delta = max_step
    elif delta < -max_step:
        delta = -max_step
    return current + delta
