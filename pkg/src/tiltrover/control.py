"""Flight and ground controllers plus the mode-dispatch state machine.

Four control paths share one actuator vocabulary (two thrusts, two tilt
servos, two wheel torques):

  * aerial: proportional attitude loop cascaded into a PID body-rate
    loop, then a static mixer maps the (roll, pitch, yaw) efforts onto
    thrusts and tilt angles,
  * ground balance: a velocity-scheduled lean PID drives both wheels
    together, with a differential steer term,
  * transition: throttle-scheduled cross-fade between the two above,
  * decoupled: thrust plus a servo bias regulate pitch while the wheels
    take translation commands open loop.

Mixer unit bridge: the roll effort is a thrust differential in N, the
pitch and yaw efforts are tilt angles in rad. The rate-loop gains absorb
the units; see the gain notes in README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

from .dynamics import AERIAL, GROUND, GroundState, VehicleState
from .params import (
    ActuatorCommand,
    VehicleParams,
    hover_throttle,
    throttle_to_thrust,
)
from .so3 import attitude_error, rot_y, rot_z

DECOUPLED = "decoupled"

_REQUESTS = (AERIAL, GROUND, DECOUPLED)


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


class Pid:
    """Discrete PID state: clamped integrator, filtered derivative.

    Gains are passed per call so a reloaded gain set takes effect without
    touching controller state. The integral accumulates in output units,
    making the anti-windup limit a direct bound on that term. The
    derivative acts on the measurement when one is supplied (standard
    setpoint-kick avoidance), otherwise on the error, and is smoothed by
    a first-order low-pass; the first call after a reset contributes no
    derivative.
    """

    __slots__ = ("integral", "_prev", "_d_filt", "_primed")

    def __init__(self) -> None:
        self.integral = 0.0
        self._prev = 0.0
        self._d_filt = 0.0
        self._primed = False

    def reset(self) -> None:
        self.integral = 0.0
        self._prev = 0.0
        self._d_filt = 0.0
        self._primed = False

    def step(
        self,
        error: float,
        dt: float,
        kp: float,
        ki: float,
        kd: float,
        i_lim: float,
        d_tau: float,
        measurement: float | None = None,
    ) -> float:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.integral = _clip(self.integral + ki * error * dt, -i_lim, i_lim)
        # d/dt(error) == -d/dt(measurement) while the setpoint holds still
        signal = error if measurement is None else -measurement
        raw = (signal - self._prev) / dt if self._primed else 0.0
        self._prev = signal
        self._primed = True
        alpha = dt / (d_tau + dt)
        self._d_filt += alpha * (raw - self._d_filt)
        return kp * error + self.integral + kd * self._d_filt


@dataclass(frozen=True)
class ControlGains:
    """Gain set for all four control paths, flat for config loading.

    Defaults are tuned against the default VehicleParams; the throttle
    levels t_hold and thr_hover are rounded here, so prefer
    default_gains(), which computes them exactly from the parameters.
    """

    # aerial attitude: outer P on rotation error, inner PID on body rates
    kp_att: tuple[float, float, float] = (6.0, 6.0, 4.0)
    kp_rate: tuple[float, float, float] = (0.7, 0.10, 0.16)
    ki_rate: tuple[float, float, float] = (0.8, 0.12, 0.20)
    kd_rate: tuple[float, float, float] = (0.02, 0.003, 0.005)
    i_lim_rate: float = 0.5

    # ground balance: lean PID (outer velocity term folded into the error)
    kv_lean: float = 0.10     # velocity error -> lean setpoint, rad/(m/s)
    kp_bal: float = 1.0
    ki_bal: float = 0.2
    kd_bal: float = 0.15
    k_steer: float = 0.05     # yaw-rate error -> differential torque
    i_lim_bal: float = 0.4    # N m

    # decoupled: thrust + tilt bias hold pitch, wheels translate open loop
    kp_tilt: float = 2.2      # pitch error -> desired pitch rate, 1/s
    kp_thr: float = 0.035     # throttle PID on the signed rate error
    ki_thr: float = 0.12
    kd_thr: float = 0.006
    i_lim_thr: float = 0.12   # throttle units
    kp_bias: float = 0.22     # tilt-bias PID on the pitch rate error
    ki_bias: float = 0.15
    kd_bias: float = 0.03
    i_lim_bias: float = 0.18  # rad
    kv_drive: float = 0.15    # desired speed -> wheel torque, N m/(m/s)
    k_steer_dec: float = 0.1
    thr_cap_dec: float = 0.60  # throttle ceiling; keeps the wheels loaded

    # throttle schedule levels (normalized throttle)
    t_hold: float = 0.4086    # holds pitch torque equilibrium at any lean
    thr_idle: float = 0.10
    thr_hover: float = 0.6742

    # derivative low-pass time constant, s (all loops)
    d_tau: float = 0.02

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            vals = v if isinstance(v, tuple) else (v,)
            if len(vals) != (3 if isinstance(v, tuple) else 1):
                raise ValueError(f"{f.name} must have 3 components")
            for x in vals:
                if not math.isfinite(x) or x < 0.0:
                    raise ValueError(f"{f.name} must be finite and >= 0")
        for name in ("i_lim_rate", "i_lim_bal", "i_lim_thr", "i_lim_bias", "d_tau"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.thr_idle < self.thr_hover:
            raise ValueError("thr_idle must be below thr_hover")
        for name in ("t_hold", "thr_idle", "thr_hover", "thr_cap_dec"):
            if getattr(self, name) > 1.0:
                raise ValueError(f"{name} is a normalized throttle, <= 1")


def default_gains(p: VehicleParams) -> ControlGains:
    """Default gains with the throttle levels computed from the params.

    t_hold is the per-motor throttle whose thrust cancels the chassis
    gravity moment about the axle at the straight-tilt operating point;
    it is independent of the pitch angle.
    """
    hold_thrust = p.m * p.g * p.l_wz / (p.l_z + p.l_wz) / 2.0
    return replace(
        ControlGains(),
        t_hold=float(math.sqrt(hold_thrust / p.t_max)),
        thr_hover=hover_throttle(p),
    )


def gains_from_dict(overrides: dict[str, Any], base: ControlGains | None = None) -> ControlGains:
    """Apply a flat mapping of gain overrides; unknown keys are an error."""
    if base is None:
        base = ControlGains()
    known = {f.name for f in fields(ControlGains)}
    clean: dict[str, Any] = {}
    for key, value in overrides.items():
        if key not in known:
            raise KeyError(f"unknown gain {key!r}")
        if isinstance(value, (list, tuple)):
            clean[key] = tuple(float(x) for x in value)
        else:
            clean[key] = float(value)
    return replace(base, **clean)


@dataclass
class ControlSetpoint:
    """Pilot-side command set consumed by the mode manager."""

    mode_request: str = GROUND
    r_d: np.ndarray = field(default_factory=lambda: np.eye(3))
    throttle_d: float = 0.0
    theta_d: float = 0.0      # decoupled pitch target, rad
    v_d: float = 0.0          # forward speed target, m/s
    yaw_rate_d: float = 0.0   # rad/s
    armed: bool = True

    def __post_init__(self) -> None:
        if self.mode_request not in _REQUESTS:
            raise ValueError(f"unknown mode request {self.mode_request!r}")
        self.r_d = np.array(self.r_d, dtype=float)
        if self.r_d.shape != (3, 3):
            raise ValueError("r_d must be a 3x3 rotation matrix")
        if not 0.0 <= self.throttle_d <= 1.0:
            raise ValueError("throttle_d outside [0, 1]")
        for name in ("theta_d", "v_d", "yaw_rate_d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class ControlInfo:
    """Diagnostics emitted alongside each actuator command."""

    branch: str               # idle | ground | transition | aerial | decoupled
    c: float                  # transition blend factor in [0, 1]
    decoupled_rejected: bool = False


def aerial_attitude_control(
    r_d: np.ndarray,
    r: np.ndarray,
    omega: np.ndarray,
    gains: ControlGains,
    dt: float,
    pids: tuple[Pid, Pid, Pid],
) -> np.ndarray:
    """Attitude P loop cascaded into body-rate PIDs.

    Returns the effort vector consumed by the mixer: roll as a thrust
    differential (N), pitch and yaw as tilt angles (rad).
    """
    # error taken current-to-desired so a positive component commands a
    # rotation toward the setpoint
    err = attitude_error(r, r_d)
    omega_d = np.array(gains.kp_att) * err
    omega_e = omega_d - omega
    tau = np.empty(3)
    for i in range(3):
        tau[i] = pids[i].step(
            float(omega_e[i]),
            dt,
            gains.kp_rate[i],
            gains.ki_rate[i],
            gains.kd_rate[i],
            gains.i_lim_rate,
            gains.d_tau,
            measurement=float(omega[i]),
        )
    return tau


def mixer(tau: np.ndarray, collective: float) -> tuple[float, float, float, float]:
    """Static map from (roll, pitch, yaw) efforts to (T1, T2, sigma1, sigma2).

    Exactly linear; saturation is the vehicle model's job.
    """
    roll, pitch, yaw = float(tau[0]), float(tau[1]), float(tau[2])
    return (roll + collective, -roll + collective, pitch - yaw, pitch + yaw)


def ground_balance_control(
    setpoint: ControlSetpoint,
    s: GroundState,
    gains: ControlGains,
    p: VehicleParams,
    dt: float,
    pid: Pid,
) -> tuple[float, float]:
    """Two-wheel balance law: lean PID plus differential steer.

    The wheel torque convention here is positive = roll toward +x, which
    is opposite to the classic balance-robot formulation this law comes
    from, so the stabilizing feedback enters negated. The steer term is
    unaffected.
    """
    v = s.wheel_speed(p)
    theta_e = gains.kv_lean * (setpoint.v_d - v) - s.theta
    u = pid.step(
        theta_e,
        dt,
        gains.kp_bal,
        gains.ki_bal,
        gains.kd_bal,
        gains.i_lim_bal,
        gains.d_tau,
        measurement=gains.kv_lean * v + s.theta,
    )
    steer = gains.k_steer * (setpoint.yaw_rate_d - s.gamma_dot)
    return (-u - steer, -u + steer)


def transition_scale(throttle_d: float, thr_idle: float, thr_hover: float) -> float:
    """Blend factor C: 0 at/below idle throttle, 1 at/above hover, linear between."""
    if not thr_idle < thr_hover:
        raise ValueError("thr_idle must be below thr_hover")
    return _clip((throttle_d - thr_idle) / (thr_hover - thr_idle), 0.0, 1.0)


def apply_transition(
    c: float,
    aerial_cmd: ActuatorCommand,
    ground_cmd: tuple[float, float],
) -> ActuatorCommand:
    """Cross-fade: tilt authority scales with C, wheel torque with 1 - C.

    Thrusts pass through unscaled. The + 0.0 normalizes -0.0 so the C = 1
    output is bit-identical to a pure aerial command.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError("blend factor outside [0, 1]")
    return ActuatorCommand(
        t1=aerial_cmd.t1,
        t2=aerial_cmd.t2,
        sigma1=c * aerial_cmd.sigma1 + 0.0,
        sigma2=c * aerial_cmd.sigma2 + 0.0,
        tau_w1=(1.0 - c) * ground_cmd[0] + 0.0,
        tau_w2=(1.0 - c) * ground_cmd[1] + 0.0,
    )


def decoupled_control(
    setpoint: ControlSetpoint,
    s: GroundState,
    gains: ControlGains,
    p: VehicleParams,
    dt: float,
    thr_pid: Pid,
    bias_pid: Pid,
) -> ActuatorCommand:
    """Pitch via thrust + tilt bias; translation via open-loop wheel torque.

    The thrust-to-pitch-torque gain scales with -sin(pitch) when the tilt
    angles track the negative pitch, so the throttle loop's error flips
    sign with the pitch angle. Its derivative acts on the signed error,
    which the regime rule makes discontinuous; the low-pass absorbs the
    steps. The throttle output is capped below the level that would
    unload the wheels.
    """
    omega_d = gains.kp_tilt * (setpoint.theta_d - s.theta)
    omega_e = omega_d - s.theta_dot
    t_e = -omega_e if s.theta > 0.0 else omega_e
    u = gains.t_hold + thr_pid.step(
        t_e, dt, gains.kp_thr, gains.ki_thr, gains.kd_thr,
        gains.i_lim_thr, gains.d_tau,
    )
    u = _clip(u, 0.0, gains.thr_cap_dec)
    thrust = throttle_to_thrust(u, p)
    bias = bias_pid.step(
        omega_e, dt, gains.kp_bias, gains.ki_bias, gains.kd_bias,
        gains.i_lim_bias, gains.d_tau,
        measurement=gains.kp_tilt * s.theta + s.theta_dot,
    )
    sigma = -s.theta + bias
    tau_w1 = gains.kv_drive * setpoint.v_d - gains.k_steer_dec * setpoint.yaw_rate_d
    tau_w2 = gains.kv_drive * setpoint.v_d + gains.k_steer_dec * setpoint.yaw_rate_d
    return ActuatorCommand(thrust, thrust, sigma, sigma, tau_w1, tau_w2)


# pid groups engaged by each dispatch branch; a group is reset when a
# branch change newly engages it
_FAMILIES = {
    "idle": frozenset(),
    "aerial": frozenset({"rate"}),
    "ground": frozenset({"rate", "bal"}),
    "decoupled": frozenset({"dec"}),
}


class ModeManager:
    """Dispatches the active controller and owns all loop state.

    Grounded, non-decoupled operation always runs both the aerial cascade
    and the balance law and blends them by the throttle-scheduled factor;
    C = 0 degenerates to pure balance (tilt centered), C = 1 to the pure
    aerial command. A decoupled request while airborne is refused and
    flagged. Tilt commands leave here slew-limited so a mode hop cannot
    snap the servos.
    """

    def __init__(self, p: VehicleParams, gains: ControlGains) -> None:
        self.params = p
        self.gains = gains
        self.rate_pids = (Pid(), Pid(), Pid())
        self.bal_pid = Pid()
        self.thr_pid = Pid()
        self.bias_pid = Pid()
        self._active: frozenset[str] = frozenset()
        self._sigma1 = 0.0
        self._sigma2 = 0.0

    def reset(self) -> None:
        for pid in (*self.rate_pids, self.bal_pid, self.thr_pid, self.bias_pid):
            pid.reset()
        self._active = frozenset()
        self._sigma1 = 0.0
        self._sigma2 = 0.0

    def _reset_group(self, name: str) -> None:
        if name == "rate":
            for pid in self.rate_pids:
                pid.reset()
        elif name == "bal":
            self.bal_pid.reset()
        else:
            self.thr_pid.reset()
            self.bias_pid.reset()

    def _slew(self, prev: float, target: float, dt: float) -> float:
        lim = self.params.sigma_rate * dt
        out = _clip(target, prev - lim, prev + lim)
        return _clip(out, -self.params.sigma_max, self.params.sigma_max)

    def update(
        self,
        setpoint: ControlSetpoint,
        state: VehicleState,
        dt: float,
    ) -> tuple[ActuatorCommand, ControlInfo]:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        rejected = False
        if not setpoint.armed:
            branch = "idle"
        elif state.mode == AERIAL:
            branch = "aerial"
            rejected = setpoint.mode_request == DECOUPLED
        elif setpoint.mode_request == DECOUPLED:
            branch = "decoupled"
        else:
            branch = "ground"

        fam = _FAMILIES[branch]
        for name in fam - self._active:
            self._reset_group(name)
        self._active = fam

        if branch == "idle":
            cmd = ActuatorCommand()
            c = 0.0
            label = "idle"
        elif branch == "aerial":
            a = state.aerial
            tau = aerial_attitude_control(
                setpoint.r_d, a.r, a.omega, self.gains, dt, self.rate_pids)
            coll = throttle_to_thrust(setpoint.throttle_d, self.params)
            t1, t2, s1, s2 = mixer(tau, coll)
            cmd = ActuatorCommand(t1, t2, s1, s2, 0.0, 0.0)
            c = 1.0
            label = "aerial"
        elif branch == "decoupled":
            cmd = decoupled_control(
                setpoint, state.ground, self.gains, self.params, dt,
                self.thr_pid, self.bias_pid)
            c = 0.0
            label = "decoupled"
        else:
            g = state.ground
            r = rot_z(g.gamma) @ rot_y(g.theta)
            st, ct = math.sin(g.theta), math.cos(g.theta)
            omega = np.array([
                -g.gamma_dot * st, g.theta_dot, g.gamma_dot * ct])
            tau = aerial_attitude_control(
                setpoint.r_d, r, omega, self.gains, dt, self.rate_pids)
            coll = throttle_to_thrust(setpoint.throttle_d, self.params)
            a_cmd = ActuatorCommand(*mixer(tau, coll))
            g_cmd = ground_balance_control(
                setpoint, g, self.gains, self.params, dt, self.bal_pid)
            c = transition_scale(
                setpoint.throttle_d, self.gains.thr_idle, self.gains.thr_hover)
            cmd = apply_transition(c, a_cmd, g_cmd)
            label = "ground" if c <= 0.0 else "aerial" if c >= 1.0 else "transition"

        self._sigma1 = self._slew(self._sigma1, cmd.sigma1, dt)
        self._sigma2 = self._slew(self._sigma2, cmd.sigma2, dt)
        cmd = replace(cmd, sigma1=self._sigma1, sigma2=self._sigma2)
        return cmd, ControlInfo(branch=label, c=c, decoupled_rejected=rejected)
