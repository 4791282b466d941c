"""Scenario files and the deterministic simulation loop.

A scenario is a YAML document: parameter and gain overrides, an initial
state, and a time-stamped event list that scripts the pilot (mode
requests, attitude/throttle/velocity setpoints, throttle ramps) plus
external disturbances (impulsive pitch torque). Event times must lie on
the integration grid so runs are exactly reproducible.

Inclines are modeled by tilting gravity in the planar ground model, not
by terrain geometry, so scenarios with a nonzero gravity tilt are
ground-only: mode transitions are disabled for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import yaml

from .control import (
    DECOUPLED,
    ControlGains,
    ControlSetpoint,
    ModeManager,
    default_gains,
    gains_from_dict,
)
from .dynamics import (
    AERIAL,
    GROUND,
    AerialState,
    GroundState,
    VehicleState,
    contact_transition,
    step,
)
from .params import VehicleParams, hover_throttle, params_from_dict, saturate
from .so3 import euler_to_rotation
from .telemetry import SimLog, TelemetryRow

_EVENT_KEYS = {
    "t", "mode", "armed", "roll_deg", "pitch_deg", "yaw_deg", "throttle",
    "throttle_ramp", "theta_deg", "v", "yaw_rate_deg", "pitch_impulse",
}
_TOP_KEYS = {
    "name", "dt", "duration", "gravity_tilt_deg", "params", "gains",
    "start", "events",
}
_START_GROUND_KEYS = {
    "mode", "x", "x_dot", "theta_deg", "theta_rate_deg", "gamma_deg",
    "gamma_rate_deg",
}
_START_AERIAL_KEYS = {"mode", "p", "v", "rpy_deg", "omega"}


@dataclass(frozen=True)
class Event:
    """One scripted change; unset fields leave the setpoint untouched."""

    t: float
    mode: str | None = None
    armed: bool | None = None
    roll_d: float | None = None       # rad
    pitch_d: float | None = None      # rad
    yaw_d: float | None = None        # rad
    throttle: float | None = None
    ramp_to: float | None = None      # linear throttle ramp target
    ramp_over: float | None = None    # ramp duration, s
    theta_d: float | None = None      # decoupled pitch target, rad
    v_d: float | None = None          # m/s
    yaw_rate_d: float | None = None   # rad/s
    pitch_impulse: float | None = None  # N m s, about the pitch axis


@dataclass(frozen=True)
class Scenario:
    name: str
    params: VehicleParams
    gains: ControlGains
    dt: float
    duration: float
    gravity_tilt: float = 0.0
    start: VehicleState = field(default_factory=lambda: VehicleState(
        mode=GROUND, ground=GroundState()))
    events: tuple[Event, ...] = ()

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if not 0.0 < self.dt <= 0.01:
            raise ValueError("dt must be in (0, 0.01]")
        last = -math.inf
        for ev in self.events:
            if ev.t < last:
                raise ValueError("events must be sorted by time")
            last = ev.t
            ratio = ev.t / self.dt
            if abs(ratio - round(ratio)) > 1e-6:
                raise ValueError(
                    f"event at t={ev.t} is off the dt={self.dt} grid")
            if ev.t > self.duration:
                raise ValueError(f"event at t={ev.t} is past the duration")


def _resolve_throttle(value: Any, p: VehicleParams) -> float:
    """Numbers pass through; 'hover', 'hover+x', 'hover-x' use the params."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if not text.startswith("hover"):
        raise ValueError(f"bad throttle value {value!r}")
    base = hover_throttle(p)
    rest = text[len("hover"):].strip()
    if not rest:
        return base
    return base + float(rest)


def _parse_event(raw: dict[str, Any], p: VehicleParams) -> Event:
    unknown = set(raw) - _EVENT_KEYS
    if unknown:
        raise KeyError(f"unknown event keys {sorted(unknown)}")
    if "t" not in raw:
        raise KeyError("event missing 't'")
    deg = math.radians
    ramp_to = ramp_over = None
    if "throttle_ramp" in raw:
        ramp = raw["throttle_ramp"]
        if set(ramp) != {"to", "over"}:
            raise KeyError("throttle_ramp needs exactly {to, over}")
        ramp_to = _resolve_throttle(ramp["to"], p)
        ramp_over = float(ramp["over"])
        if ramp_over <= 0.0:
            raise ValueError("throttle_ramp 'over' must be positive")
    mode = raw.get("mode")
    if mode is not None and mode not in (AERIAL, GROUND, DECOUPLED):
        raise ValueError(f"unknown mode {mode!r}")
    return Event(
        t=float(raw["t"]),
        mode=mode,
        armed=None if "armed" not in raw else bool(raw["armed"]),
        roll_d=None if "roll_deg" not in raw else deg(float(raw["roll_deg"])),
        pitch_d=None if "pitch_deg" not in raw else deg(float(raw["pitch_deg"])),
        yaw_d=None if "yaw_deg" not in raw else deg(float(raw["yaw_deg"])),
        throttle=None if "throttle" not in raw else _resolve_throttle(raw["throttle"], p),
        ramp_to=ramp_to,
        ramp_over=ramp_over,
        theta_d=None if "theta_deg" not in raw else deg(float(raw["theta_deg"])),
        v_d=None if "v" not in raw else float(raw["v"]),
        yaw_rate_d=None if "yaw_rate_deg" not in raw else deg(float(raw["yaw_rate_deg"])),
        pitch_impulse=None if "pitch_impulse" not in raw else float(raw["pitch_impulse"]),
    )


def _parse_start(raw: dict[str, Any]) -> VehicleState:
    mode = raw.get("mode", GROUND)
    deg = math.radians
    if mode == GROUND:
        unknown = set(raw) - _START_GROUND_KEYS
        if unknown:
            raise KeyError(f"unknown start keys {sorted(unknown)}")
        g = GroundState(
            x=float(raw.get("x", 0.0)),
            x_dot=float(raw.get("x_dot", 0.0)),
            theta=deg(float(raw.get("theta_deg", 0.0))),
            theta_dot=deg(float(raw.get("theta_rate_deg", 0.0))),
            gamma=deg(float(raw.get("gamma_deg", 0.0))),
            gamma_dot=deg(float(raw.get("gamma_rate_deg", 0.0))),
        )
        return VehicleState(mode=GROUND, ground=g)
    if mode == AERIAL:
        unknown = set(raw) - _START_AERIAL_KEYS
        if unknown:
            raise KeyError(f"unknown start keys {sorted(unknown)}")
        rpy = [deg(float(x)) for x in raw.get("rpy_deg", [0.0, 0.0, 0.0])]
        a = AerialState(
            p=[float(x) for x in raw.get("p", [0.0, 0.0, 0.0])],
            v=[float(x) for x in raw.get("v", [0.0, 0.0, 0.0])],
            r=euler_to_rotation(*rpy),
            omega=[float(x) for x in raw.get("omega", [0.0, 0.0, 0.0])],
        )
        return VehicleState(mode=AERIAL, aerial=a)
    raise ValueError(f"unknown start mode {mode!r}")


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise KeyError(f"unknown scenario keys {sorted(unknown)}")
    params = params_from_dict(doc.get("params", {}))
    gains = gains_from_dict(doc.get("gains", {}), base=default_gains(params))
    events = tuple(_parse_event(e, params) for e in doc.get("events", []))
    return Scenario(
        name=str(doc.get("name", "unnamed")),
        params=params,
        gains=gains,
        dt=float(doc.get("dt", 1e-3)),
        duration=float(doc["duration"]),
        gravity_tilt=math.radians(float(doc.get("gravity_tilt_deg", 0.0))),
        start=_parse_start(doc.get("start", {})),
        events=events,
    )


def load_scenario(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"scenario file {path} is not a mapping")
    return scenario_from_dict(doc)


def apply_pitch_impulse(state: VehicleState, imp: float, p: VehicleParams) -> VehicleState:
    """Instantaneous angular impulse about the pitch axis.

    On the ground the impulse enters through the coupled (travel, pitch)
    mass matrix, so it legitimately kicks the forward speed as well; in
    the air it divides by the pitch moment of inertia of the assembly.
    """
    from dataclasses import replace as _rep

    if state.mode == GROUND:
        g = state.ground
        ct = math.cos(g.theta)
        m11 = p.m + 2.0 * p.m_w + 2.0 * p.j_wy / p.r**2
        m12 = p.m * p.l_wz * ct
        m22 = p.m * p.l_wz**2 + p.jy
        det = m11 * m22 - m12 * m12
        ds = -m12 * imp / det
        dth = m11 * imp / det
        # chassis velocity follows from the axle-travel rate and lean rate
        dx = ds + p.l_wz * ct * dth
        g2 = _rep(g, x_dot=g.x_dot + dx, theta_dot=g.theta_dot + dth)
        return _rep(state, ground=g2)
    a = state.aerial
    j_pitch = p.j_total()[1, 1]
    omega = a.omega.copy()
    omega[1] += imp / j_pitch
    a2 = AerialState(p=a.p, v=a.v, r=a.r, omega=omega)
    return _rep(state, aerial=a2)


class _Ramp:
    """Linear throttle schedule between two events."""

    __slots__ = ("t0", "t1", "u0", "u1")

    def __init__(self, t0: float, u0: float, u1: float, over: float) -> None:
        self.t0 = t0
        self.t1 = t0 + over
        self.u0 = u0
        self.u1 = u1

    def value(self, t: float) -> float:
        if t >= self.t1:
            return self.u1
        f = (t - self.t0) / (self.t1 - self.t0)
        return self.u0 + (self.u1 - self.u0) * f


def run_scenario(sc: Scenario) -> SimLog:
    """Fixed-step closed-loop run; returns the complete telemetry log."""
    p = sc.params
    mm = ModeManager(p, sc.gains)
    st = sc.start
    n = int(round(sc.duration / sc.dt))

    sp = ControlSetpoint(mode_request=GROUND, armed=True)
    rpy_d = [0.0, 0.0, 0.0]
    ramp: _Ramp | None = None
    ev_idx = 0
    transitions = sc.gravity_tilt == 0.0

    rows = [TelemetryRow.from_state(0.0, st, None, None, 0.0)]
    for i in range(n):
        t = i * sc.dt
        while ev_idx < len(sc.events) and sc.events[ev_idx].t <= t + sc.dt * 0.5:
            ev = sc.events[ev_idx]
            ev_idx += 1
            if ev.mode is not None:
                sp.mode_request = ev.mode
            if ev.armed is not None:
                sp.armed = ev.armed
            changed_att = False
            for k, v in ((0, ev.roll_d), (1, ev.pitch_d), (2, ev.yaw_d)):
                if v is not None:
                    rpy_d[k] = v
                    changed_att = True
            if changed_att:
                sp.r_d = euler_to_rotation(*rpy_d)
            if ev.throttle is not None:
                sp.throttle_d = ev.throttle
                ramp = None
            if ev.ramp_to is not None:
                ramp = _Ramp(ev.t, sp.throttle_d, ev.ramp_to, ev.ramp_over)
            if ev.theta_d is not None:
                sp.theta_d = ev.theta_d
            if ev.v_d is not None:
                sp.v_d = ev.v_d
            if ev.yaw_rate_d is not None:
                sp.yaw_rate_d = ev.yaw_rate_d
            if ev.pitch_impulse is not None:
                st = apply_pitch_impulse(st, ev.pitch_impulse, p)
        if ramp is not None:
            sp.throttle_d = ramp.value(t)
            if t >= ramp.t1:
                ramp = None

        cmd, info = mm.update(sp, st, sc.dt)
        cmd = saturate(cmd, p)
        st = step(st, cmd, p, sc.dt, sc.gravity_tilt)
        if transitions:
            st = contact_transition(st, p)
        prev_energy = rows[-1].energy
        power = (st.energy_used - prev_energy) / sc.dt
        rows.append(TelemetryRow.from_state(t + sc.dt, st, cmd, info, power))

    return SimLog(name=sc.name, dt=sc.dt, rows=rows)
