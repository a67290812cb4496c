"""Scenario files: the experiment definition.

A scenario is a sectioned key-value text file; every physical value
carries its SI unit in the key name. The file is strict in both
directions: unknown sections or keys are errors, and so are missing
ones, so a scenario never silently falls back to built-in constants.
Calibrated values live here, never in code.

Format:

    # comment
    [section]
    key_unit = 1.25            # scalar
    center_m = 14.0 0.5 2.0    # vector: whitespace-separated floats
    enabled = true             # boolean

    [dispersions]
    launch.exit_speed_mps = gauss 0.1        # additive N(0, sigma)
    launch.heading_rad = uniform -0.02 0.02  # additive U(lo, hi)

Dispersions may only target scalar float keys of other sections.
"""

from __future__ import annotations

import copy
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from perchsim.control import ControlGains
from perchsim.dynamics import (
    BranchGeometry,
    BranchSpec,
    ConfigurationError,
    DT_MAX,
    Environment,
    LaunchConfig,
    VehicleParams,
)
from perchsim.fsm import TriggerConfig
from perchsim.grasp import GraspConfig
from perchsim.sensors import DetectorModel, LegServoModel, MocapModel


class ScenarioError(Exception):
    """Scenario file failed to parse or validate; message names the key."""


# Schema: section -> key -> value kind. Order here is the canonical file
# order used by write_scenario().
SCHEMA: dict[str, dict[str, str]] = {
    "vehicle": {
        "mass_kg": "float",
        "wingspan_m": "float",
        "wing_area_m2": "float",
        "pitch_inertia_kgm2": "float",
        "yaw_inertia_kgm2": "float",
        "flap_thrust_coeff_ns2": "float",
        "flap_osc_amplitude_n": "float",
        "max_flap_freq_hz": "float",
        "cruise_flap_freq_hz": "float",
        "elevator_effectiveness_nm_per_rad_mps2": "float",
        "rudder_effectiveness_nm_per_rad_mps2": "float",
        "pitch_damping_nms_per_rad_mps": "float",
        "yaw_damping_nms_per_rad_mps": "float",
        "pitch_stability_nm_per_rad_mps2": "float",
        "yaw_stability_nm_per_rad_mps2": "float",
        "parasitic_drag_coeff": "float",
        "leg_length_m": "float",
        "leg_angle_range_rad": "vec2",
        "leg_max_rate_radps": "float",
        "claw_aperture_m": "float",
        "claw_close_time_s": "float",
        "claw_torque_nm": "float",
        "capture_depth_margin_m": "float",
        "pad_friction_coeff": "float",
    },
    "environment": {
        "gravity_mps2": "float",
        "air_density_kgpm3": "float",
        "wind_mps": "vec3",
    },
    "branch": {
        "center_m": "vec3",
        "length_m": "float",
        "radius_m": "float",
        "axis": "vec3",
    },
    "launch": {
        "rail_length_m": "float",
        "exit_speed_mps": "float",
        "angle_of_attack_rad": "float",
        "rail_height_m": "float",
        "lateral_offset_m": "float",
        "heading_rad": "float",
    },
    "gains": {
        "pitch_kp": "float",
        "pitch_ki": "float",
        "pitch_rate_kd": "float",
        "yaw_kp": "float",
        "yaw_rate_kd": "float",
        "alt_kp_hz_per_m": "float",
        "alt_ki_hz_per_m_s": "float",
        "pitch_int_limit_rad_s": "float",
        "alt_int_limit_m_s": "float",
        "elevator_limit_rad": "float",
        "rudder_limit_rad": "float",
    },
    "approach": {
        "pitch_ref_rad": "float",
    },
    "triggers": {
        "approach_distance_m": "float",
        "cutoff_distance_m": "float",
        "contact_distance_m": "float",
        "flyby_distance_m": "float",
        "ground_altitude_m": "float",
        "timeout_s": "float",
    },
    "mocap": {
        "rate_hz": "float",
        "latency_s": "float",
        "position_noise_std_m": "float",
        "angle_noise_std_rad": "float",
        "dropout_prob": "float",
    },
    "detector": {
        "range_m": "float",
        "fov_vertical_halfwidth_m": "float",
        "fov_lateral_halfwidth_m": "float",
    },
    "leg": {
        "update_rate_hz": "float",
        "enabled": "bool",
    },
    "grasp": {
        "com_offset_m": "float",
        "stop_distance_m": "float",
        "overload_limit_n": "float",
    },
    "sim": {
        "dt_s": "float",
        "controller_rate_hz": "float",
        "master_seed": "int",
    },
}

MAX_PITCH_REF = math.radians(40.0)  # above this: speed collapse, loss of lateral control

RawScenario = dict[str, dict[str, object]]


@dataclass(frozen=True)
class DispersionSpec:
    """Additive perturbation of one scalar scenario value."""

    section: str
    key: str
    kind: str       # "gauss" or "uniform"
    a: float        # sigma, or lower bound
    b: float        # unused, or upper bound

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "gauss":
            return self.a * rng.standard_normal()
        return rng.uniform(self.a, self.b)


@dataclass(frozen=True)
class Scenario:
    """Fully validated experiment definition."""

    vehicle: VehicleParams
    env: Environment
    branch: BranchSpec
    launch: LaunchConfig
    gains: ControlGains
    pitch_ref: float
    triggers: "TriggerConfig"
    mocap: MocapModel
    detector: DetectorModel
    leg: LegServoModel
    leg_compensation_enabled: bool
    grasp: GraspConfig
    dt: float
    controller_rate: float
    master_seed: int
    dispersions: tuple[DispersionSpec, ...]
    raw: RawScenario = field(repr=False)

    def geometry(self) -> BranchGeometry:
        from perchsim.dynamics import launch_release

        release = launch_release(self.launch, self.vehicle)
        return BranchGeometry.from_launch_side(self.branch, release.position)


def _parse_value(kind: str, text: str, where: str) -> object:
    tokens = text.split()
    if not tokens:
        raise ScenarioError(f"{where}: empty value")
    try:
        if kind == "float":
            if len(tokens) != 1:
                raise ValueError
            return float(tokens[0])
        if kind == "int":
            if len(tokens) != 1:
                raise ValueError
            return int(tokens[0])
        if kind == "bool":
            if len(tokens) != 1 or tokens[0] not in ("true", "false"):
                raise ValueError
            return tokens[0] == "true"
        if kind == "vec2":
            if len(tokens) != 2:
                raise ValueError
            return (float(tokens[0]), float(tokens[1]))
        if kind == "vec3":
            if len(tokens) != 3:
                raise ValueError
            return (float(tokens[0]), float(tokens[1]), float(tokens[2]))
    except ValueError:
        raise ScenarioError(f"{where}: cannot parse {text!r} as {kind}") from None
    raise ScenarioError(f"{where}: unknown value kind {kind}")


def parse_scenario_text(text: str, name: str = "<scenario>") -> RawScenario:
    """Parse and schema-check scenario text into the raw value mapping."""
    raw: RawScenario = {}
    dispersion_lines: list[tuple[str, str, str]] = []
    section: str | None = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        where = f"{name}:{lineno}"
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section != "dispersions" and section not in SCHEMA:
                raise ScenarioError(f"{where}: unknown section [{section}]")
            if section in raw:
                raise ScenarioError(f"{where}: duplicate section [{section}]")
            if section != "dispersions":
                raw[section] = {}
            continue
        if section is None:
            raise ScenarioError(f"{where}: key outside any section")
        if "=" not in stripped:
            raise ScenarioError(f"{where}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if section == "dispersions":
            dispersion_lines.append((key, value, where))
            continue
        keys = SCHEMA[section]
        if key not in keys:
            raise ScenarioError(f"{where}: unknown key '{section}.{key}'")
        if key in raw[section]:
            raise ScenarioError(f"{where}: duplicate key '{section}.{key}'")
        raw[section][key] = _parse_value(keys[key], value, f"{where} ({section}.{key})")

    for sec, keys in SCHEMA.items():
        if sec not in raw:
            raise ScenarioError(f"{name}: missing section [{sec}]")
        for key in keys:
            if key not in raw[sec]:
                raise ScenarioError(f"{name}: missing key '{sec}.{key}'")

    raw["dispersions"] = _parse_dispersions(dispersion_lines, raw)
    return raw


def _parse_dispersions(
    lines: list[tuple[str, str, str]], raw: RawScenario
) -> dict[str, object]:
    out: dict[str, object] = {}
    for target, value, where in lines:
        if target.count(".") != 1:
            raise ScenarioError(f"{where}: dispersion target must be 'section.key'")
        sec, key = target.split(".")
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ScenarioError(f"{where}: dispersion target '{target}' does not exist")
        if SCHEMA[sec][key] != "float":
            raise ScenarioError(f"{where}: dispersion target '{target}' is not a scalar")
        if target in out:
            raise ScenarioError(f"{where}: duplicate dispersion for '{target}'")
        tokens = value.split()
        try:
            if tokens[0] == "gauss" and len(tokens) == 2:
                out[target] = ("gauss", float(tokens[1]), 0.0)
            elif tokens[0] == "uniform" and len(tokens) == 3:
                lo, hi = float(tokens[1]), float(tokens[2])
                if lo >= hi:
                    raise ScenarioError(f"{where}: uniform bounds must satisfy lo < hi")
                out[target] = ("uniform", lo, hi)
            else:
                raise ValueError
        except (ValueError, IndexError):
            raise ScenarioError(
                f"{where}: dispersion must be 'gauss <sigma>' or 'uniform <lo> <hi>'"
            ) from None
    return out


def _steps_per_period(rate_hz: float, dt: float, what: str) -> int:
    steps = 1.0 / (rate_hz * dt)
    rounded = round(steps)
    if rounded < 1 or abs(steps - rounded) > 1e-6:
        raise ScenarioError(
            f"{what} ({rate_hz} Hz) period is not an integer multiple of sim.dt_s ({dt} s)"
        )
    return rounded


def build_scenario(raw: RawScenario) -> Scenario:
    """Assemble and cross-validate the typed scenario from raw values."""
    from perchsim.fsm import TriggerConfig

    v = raw["vehicle"]
    e = raw["environment"]
    b = raw["branch"]
    l = raw["launch"]
    g = raw["gains"]
    t = raw["triggers"]
    mo = raw["mocap"]
    de = raw["detector"]
    le = raw["leg"]
    gr = raw["grasp"]
    si = raw["sim"]

    try:
        vehicle = VehicleParams(
            mass=v["mass_kg"],
            wingspan=v["wingspan_m"],
            wing_area=v["wing_area_m2"],
            pitch_inertia=v["pitch_inertia_kgm2"],
            yaw_inertia=v["yaw_inertia_kgm2"],
            flap_thrust_coeff=v["flap_thrust_coeff_ns2"],
            flap_osc_amplitude=v["flap_osc_amplitude_n"],
            max_flap_freq=v["max_flap_freq_hz"],
            cruise_flap_freq=v["cruise_flap_freq_hz"],
            elevator_effectiveness=v["elevator_effectiveness_nm_per_rad_mps2"],
            rudder_effectiveness=v["rudder_effectiveness_nm_per_rad_mps2"],
            pitch_damping=v["pitch_damping_nms_per_rad_mps"],
            yaw_damping=v["yaw_damping_nms_per_rad_mps"],
            pitch_stability=v["pitch_stability_nm_per_rad_mps2"],
            yaw_stability=v["yaw_stability_nm_per_rad_mps2"],
            parasitic_drag_coeff=v["parasitic_drag_coeff"],
            leg_length=v["leg_length_m"],
            leg_angle_range=v["leg_angle_range_rad"],
            leg_max_rate=v["leg_max_rate_radps"],
            claw_aperture=v["claw_aperture_m"],
            claw_close_time=v["claw_close_time_s"],
            claw_torque=v["claw_torque_nm"],
            capture_depth_margin=v["capture_depth_margin_m"],
            pad_friction_coeff=v["pad_friction_coeff"],
        )
        env = Environment(
            gravity=e["gravity_mps2"],
            air_density=e["air_density_kgpm3"],
            wind=e["wind_mps"],
        )
        branch = BranchSpec(
            center=b["center_m"], length=b["length_m"],
            radius=b["radius_m"], axis=b["axis"],
        )
        launch = LaunchConfig(
            rail_length=l["rail_length_m"],
            exit_speed=l["exit_speed_mps"],
            angle_of_attack=l["angle_of_attack_rad"],
            rail_height=l["rail_height_m"],
            lateral_offset=l["lateral_offset_m"],
            heading=l["heading_rad"],
        )
        gains = ControlGains(
            pitch_kp=g["pitch_kp"],
            pitch_ki=g["pitch_ki"],
            pitch_rate_kd=g["pitch_rate_kd"],
            yaw_kp=g["yaw_kp"],
            yaw_rate_kd=g["yaw_rate_kd"],
            alt_kp=g["alt_kp_hz_per_m"],
            alt_ki=g["alt_ki_hz_per_m_s"],
            pitch_int_limit=g["pitch_int_limit_rad_s"],
            alt_int_limit=g["alt_int_limit_m_s"],
            elevator_limit=g["elevator_limit_rad"],
            rudder_limit=g["rudder_limit_rad"],
            cruise_flap_freq=v["cruise_flap_freq_hz"],
            max_flap_freq=v["max_flap_freq_hz"],
        )
        triggers = TriggerConfig(
            approach_distance=t["approach_distance_m"],
            cutoff_distance=t["cutoff_distance_m"],
            contact_distance=t["contact_distance_m"],
            flyby_distance=t["flyby_distance_m"],
            ground_altitude=t["ground_altitude_m"],
            timeout=t["timeout_s"],
        )
        mocap = MocapModel(
            rate=mo["rate_hz"],
            latency=mo["latency_s"],
            position_noise_std=mo["position_noise_std_m"],
            angle_noise_std=mo["angle_noise_std_rad"],
            dropout_prob=mo["dropout_prob"],
        )
        detector = DetectorModel(
            range=de["range_m"],
            fov_vertical_halfwidth=de["fov_vertical_halfwidth_m"],
            fov_lateral_halfwidth=de["fov_lateral_halfwidth_m"],
        )
        leg = LegServoModel(
            update_rate=le["update_rate_hz"],
            max_rate=v["leg_max_rate_radps"],
            angle_range=v["leg_angle_range_rad"],
            leg_length=v["leg_length_m"],
        )
        graspcfg = GraspConfig(
            com_offset=gr["com_offset_m"],
            stop_distance=gr["stop_distance_m"],
            overload_limit=gr["overload_limit_n"],
        )
    except ConfigurationError as exc:
        raise ScenarioError(str(exc)) from exc

    pitch_ref = raw["approach"]["pitch_ref_rad"]
    if not (0.0 < pitch_ref < MAX_PITCH_REF):
        raise ScenarioError(
            f"approach.pitch_ref_rad must be in (0, {MAX_PITCH_REF:.4f}) rad"
        )

    dt = si["dt_s"]
    if not (0.0 < dt <= DT_MAX):
        raise ScenarioError(f"sim.dt_s must be in (0, {DT_MAX}] s")
    _steps_per_period(si["controller_rate_hz"], dt, "controller rate")
    _steps_per_period(mo["rate_hz"], dt, "mocap rate")
    _steps_per_period(le["update_rate_hz"], dt, "leg update rate")

    dispersions = tuple(
        DispersionSpec(sec_key.split(".")[0], sec_key.split(".")[1], kind, a, bnd)
        for sec_key, (kind, a, bnd) in raw["dispersions"].items()
    )

    return Scenario(
        vehicle=vehicle,
        env=env,
        branch=branch,
        launch=launch,
        gains=gains,
        pitch_ref=pitch_ref,
        triggers=triggers,
        mocap=mocap,
        detector=detector,
        leg=leg,
        leg_compensation_enabled=le["enabled"],
        grasp=graspcfg,
        dt=dt,
        controller_rate=si["controller_rate_hz"],
        master_seed=si["master_seed"],
        dispersions=dispersions,
        raw=raw,
    )


def load_scenario(
    path: str,
    seed_override: int | None = None,
    dt_override: float | None = None,
    leg_enabled_override: bool | None = None,
) -> Scenario:
    """Load, override and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    raw = parse_scenario_text(text, name=path)
    if seed_override is not None:
        raw["sim"]["master_seed"] = int(seed_override)
    if dt_override is not None:
        raw["sim"]["dt_s"] = float(dt_override)
    if leg_enabled_override is not None:
        raw["leg"]["enabled"] = bool(leg_enabled_override)
    return build_scenario(raw)


def apply_dispersions(scenario: Scenario, rng: np.random.Generator) -> Scenario:
    """Sample every dispersion (in file order) and rebuild the scenario.

    Perturbations are additive on the nominal values; rebuild re-runs
    all invariants, so a dispersion that walks a parameter out of its
    valid range fails loudly instead of simulating nonsense.
    """
    if not scenario.dispersions:
        return scenario
    raw = copy.deepcopy(scenario.raw)
    for spec in scenario.dispersions:
        raw[spec.section][spec.key] += spec.sample(rng)
    try:
        return build_scenario(raw)
    except ScenarioError as exc:
        raise ScenarioError(f"dispersed scenario invalid: {exc}") from exc


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_scenario(raw: RawScenario, path: str, header: str = "") -> None:
    """Write a raw scenario mapping in canonical section/key order."""
    lines: list[str] = []
    if header:
        lines.extend(f"# {line}".rstrip() for line in header.splitlines())
        lines.append("")
    for sec, keys in SCHEMA.items():
        lines.append(f"[{sec}]")
        for key in keys:
            lines.append(f"{key} = {_format_value(raw[sec][key])}")
        lines.append("")
    disp = raw.get("dispersions", {})
    lines.append("[dispersions]")
    for target, (kind, a, b) in disp.items():
        if kind == "gauss":
            lines.append(f"{target} = gauss {repr(float(a))}")
        else:
            lines.append(f"{target} = uniform {repr(float(a))} {repr(float(b))}")
    lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))


def scenario_hash(scenario: Scenario) -> str:
    """Stable hash of the effective scenario values (overrides included)."""
    parts: list[str] = []
    for sec in sorted(scenario.raw):
        entries = scenario.raw[sec]
        for key in sorted(entries):
            parts.append(f"{sec}.{key}={_format_value(entries[key])}")
    digest = hashlib.sha256(";".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]
