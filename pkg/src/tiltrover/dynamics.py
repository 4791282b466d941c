"""Rigid-body dynamics for both drive modes, with a fixed-step integrator.

Aerial mode: 6-DOF rigid body (chassis plus locked wheels), thrust from two
rotors tilted about body y at +-l_y, l_z from the CG.

Ground mode: planar wheeled inverted pendulum with yaw. Both wheels keep
rolling contact (no slip, no bounce); the chassis pitches about the axle.
State is (x, x_dot, theta, theta_dot, gamma, gamma_dot, delta1, delta2)
where x is chassis-CG displacement along the track, theta pitch (0 =
upright, positive leans toward +x), gamma heading, delta_i wheel angles.

The ground accelerations come from a 9x9 linear system assembled each call:

    unknowns  [x_dd, th_dd, ga_dd, d1_dd, d2_dd, H, V, F1, F2]
    rows      chassis x-force, chassis pitch torque, chassis vertical
              balance (z_cg = r + l_wz*cos(theta) differentiated twice),
              both-wheels x-force, per-wheel spin, per-wheel rolling
              constraint, whole-vehicle yaw

H is the summed horizontal hub force on the chassis, V the summed vertical
hub force, F_i the ground friction under each wheel. The same accelerations
are re-derived independently in lagrangian_oracle() from the planar
Lagrangian in (wheel position, pitch); docs/dynamics_notes.md carries both
derivations. Inclines are modeled by tilting the gravity vector inside the
planar model (gravity_tilt, rad; x then runs along the slope).

Everything here is deterministic: identical inputs give bit-identical
outputs, no RNG, no wall clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .params import ActuatorCommand, VehicleParams, propeller_power, wheel_power
from .so3 import renormalize, rotation_to_euler, skew

AERIAL = "aerial"
GROUND = "ground"


@dataclass(frozen=True)
class AerialState:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))      # world position, m
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))      # world velocity, m/s
    r: np.ndarray = field(default_factory=lambda: np.eye(3))        # body->world rotation
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))  # body angular velocity, rad/s

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", np.array(self.p, dtype=float))
        object.__setattr__(self, "v", np.array(self.v, dtype=float))
        object.__setattr__(self, "r", np.array(self.r, dtype=float))
        object.__setattr__(self, "omega", np.array(self.omega, dtype=float))


@dataclass(frozen=True)
class GroundState:
    x: float = 0.0          # chassis CG displacement along track, m
    x_dot: float = 0.0
    theta: float = 0.0      # pitch from slope normal, rad
    theta_dot: float = 0.0
    gamma: float = 0.0      # heading, rad
    gamma_dot: float = 0.0
    delta1: float = 0.0     # wheel rotation angles, rad
    delta2: float = 0.0

    def z_cg(self, p: VehicleParams) -> float:
        return p.r + p.l_wz * math.cos(self.theta)

    def wheel_speed(self, p: VehicleParams) -> float:
        """Mean wheel ground speed (what wheel odometry measures), m/s."""
        return self.x_dot - p.l_wz * math.cos(self.theta) * self.theta_dot

    def wheel_rates(self, p: VehicleParams) -> tuple[float, float]:
        """Wheel spin rates from the rolling constraint, rad/s."""
        vw = self.wheel_speed(p)
        dy = self.gamma_dot * p.l_wy
        return (vw - dy) / p.r, (vw + dy) / p.r


@dataclass(frozen=True)
class ContactForces:
    h1: float  # horizontal hub force on the chassis, per wheel, N
    h2: float
    n1: float  # ground normal force under each wheel, N
    n2: float
    f1: float  # ground friction under each wheel, N
    f2: float

    @property
    def n_total(self) -> float:
        return self.n1 + self.n2


@dataclass(frozen=True)
class VehicleState:
    mode: str
    aerial: AerialState | None = None
    ground: GroundState | None = None
    t: float = 0.0
    energy_used: float = 0.0   # J
    contact: ContactForces | None = None  # last solved ground forces

    def __post_init__(self) -> None:
        if self.mode not in (AERIAL, GROUND):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == AERIAL and self.aerial is None:
            raise ValueError("aerial mode needs an AerialState")
        if self.mode == GROUND and self.ground is None:
            raise ValueError("ground mode needs a GroundState")


class GroundDeriv(NamedTuple):
    x_dot: float
    x_ddot: float
    theta_dot: float
    theta_ddot: float
    gamma_dot: float
    gamma_ddot: float
    delta1_dot: float
    delta2_dot: float


def j_sigma_z(p: VehicleParams) -> float:
    """Yaw inertia of chassis plus wheels about the CG vertical axis."""
    return p.jz + 2.0 * (p.j_wz + p.m_w * p.l_wy**2)


# --- aerial mode -----------------------------------------------------------

def _thrust_body(cmd: ActuatorCommand) -> tuple[np.ndarray, np.ndarray]:
    f1 = np.array([cmd.t1 * math.sin(cmd.sigma1), 0.0, cmd.t1 * math.cos(cmd.sigma1)])
    f2 = np.array([cmd.t2 * math.sin(cmd.sigma2), 0.0, cmd.t2 * math.cos(cmd.sigma2)])
    return f1, f2


def aerial_derivative(
    s: AerialState, cmd: ActuatorCommand, p: VehicleParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Time derivative (p_dot, v_dot, r_dot, omega_dot). Wheels are dead mass."""
    f1, f2 = _thrust_body(cmd)
    m_tot = p.total_mass
    v_dot = np.array([0.0, 0.0, -p.g]) + s.r @ (f1 + f2) / m_tot

    d1 = np.array([0.0, p.l_y, p.l_z])
    d2 = np.array([0.0, -p.l_y, p.l_z])
    torque = np.cross(d1, f1) + np.cross(d2, f2)
    j = p.j_total()
    omega_dot = np.linalg.solve(j, torque - np.cross(s.omega, j @ s.omega))
    r_dot = s.r @ skew(s.omega)
    return s.v.copy(), v_dot, r_dot, omega_dot


def _aerial_pack(s: AerialState) -> np.ndarray:
    return np.concatenate([s.p, s.v, s.r.reshape(9), s.omega])


def _aerial_unpack(y: np.ndarray) -> AerialState:
    return AerialState(p=y[0:3], v=y[3:6], r=y[6:15].reshape(3, 3), omega=y[15:18])


def _aerial_rhs(y: np.ndarray, cmd: ActuatorCommand, p: VehicleParams) -> np.ndarray:
    s = _aerial_unpack(y)
    dp, dv, dr, dw = aerial_derivative(s, cmd, p)
    return np.concatenate([dp, dv, dr.reshape(9), dw])


# --- ground mode -----------------------------------------------------------

def _ground_system(
    y: tuple[float, ...], cmd: ActuatorCommand, p: VehicleParams, gravity_tilt: float
) -> np.ndarray:
    """Assemble and solve the 9x9 constraint system; see module docstring."""
    x_dot, theta, theta_dot = y[1], y[2], y[3]
    st, ct = math.sin(theta), math.cos(theta)
    sa, ca = math.sin(gravity_tilt), math.cos(gravity_tilt)

    t1, t2 = cmd.t1, cmd.t2
    tx = t1 * math.sin(theta + cmd.sigma1) + t2 * math.sin(theta + cmd.sigma2)
    tz = t1 * math.cos(theta + cmd.sigma1) + t2 * math.cos(theta + cmd.sigma2)
    t_pitch = p.l_z * (t1 * math.sin(cmd.sigma1) + t2 * math.sin(cmd.sigma2))
    tau_sum = cmd.tau_w1 + cmd.tau_w2

    m, mw, lwz, lwy, r = p.m, p.m_w, p.l_wz, p.l_wy, p.r
    jzz = j_sigma_z(p)
    td2 = theta_dot * theta_dot

    a = np.zeros((9, 9))
    b = np.zeros(9)
    # chassis x:  m*x_dd - H = Tx - m g sin(a)
    a[0, 0] = m
    a[0, 5] = -1.0
    b[0] = tx - m * p.g * sa
    # chassis pitch:  jy*th_dd + H lwz cos(th) - V lwz sin(th) = T_pitch - tau_sum
    a[1, 1] = p.jy
    a[1, 5] = lwz * ct
    a[1, 6] = -lwz * st
    b[1] = t_pitch - tau_sum
    # chassis vertical (z_cg twice differentiated):
    #   m lwz sin(th) th_dd + V = m g cos(a) - Tz - m lwz cos(th) th_dot^2
    a[2, 1] = m * lwz * st
    a[2, 6] = 1.0
    b[2] = m * p.g * ca - tz - m * lwz * ct * td2
    # both wheels x:  2 mw (x_dd - lwz cos(th) th_dd) + H - F1 - F2
    #                 = -2 mw g sin(a) - 2 mw lwz sin(th) th_dot^2
    a[3, 0] = 2.0 * mw
    a[3, 1] = -2.0 * mw * lwz * ct
    a[3, 5] = 1.0
    a[3, 7] = -1.0
    a[3, 8] = -1.0
    b[3] = -2.0 * mw * p.g * sa - 2.0 * mw * lwz * st * td2
    # wheel spin:  j_wy d_dd + r F = tau
    a[4, 3] = p.j_wy
    a[4, 7] = r
    b[4] = cmd.tau_w1
    a[5, 4] = p.j_wy
    a[5, 8] = r
    b[5] = cmd.tau_w2
    # rolling constraint per wheel:
    #   r d_dd = x_dd - lwz cos(th) th_dd + lwz sin(th) th_dot^2 -+ lwy ga_dd
    a[6, 0] = -1.0
    a[6, 1] = lwz * ct
    a[6, 2] = lwy
    a[6, 3] = r
    b[6] = lwz * st * td2
    a[7, 0] = -1.0
    a[7, 1] = lwz * ct
    a[7, 2] = -lwy
    a[7, 4] = r
    b[7] = lwz * st * td2
    # yaw:  jzz ga_dd = (F2 - F1) lwy
    a[8, 2] = jzz
    a[8, 7] = lwy
    a[8, 8] = -lwy
    b[8] = 0.0

    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"singular ground dynamics system (theta={theta!r}, "
            f"theta_dot={theta_dot!r}, x_dot={x_dot!r}, cmd={cmd!r})"
        ) from exc


def _ground_rhs_full(
    y: tuple[float, ...], cmd: ActuatorCommand, p: VehicleParams, gravity_tilt: float
) -> tuple[tuple[float, ...], np.ndarray]:
    sol = _ground_system(y, cmd, p, gravity_tilt)
    x_dot, theta, theta_dot, gamma_dot = y[1], y[2], y[3], y[5]
    vw = x_dot - p.l_wz * math.cos(theta) * theta_dot
    dy = gamma_dot * p.l_wy
    rhs = (
        x_dot, float(sol[0]),
        theta_dot, float(sol[1]),
        gamma_dot, float(sol[2]),
        (vw - dy) / p.r, (vw + dy) / p.r,
    )
    return rhs, sol


def _ground_rhs(
    y: tuple[float, ...], cmd: ActuatorCommand, p: VehicleParams, gravity_tilt: float
) -> tuple[float, ...]:
    return _ground_rhs_full(y, cmd, p, gravity_tilt)[0]


def _contact_from_solution(
    sol: np.ndarray, p: VehicleParams, gravity_tilt: float
) -> ContactForces:
    ca = math.cos(gravity_tilt)
    sa = math.sin(gravity_tilt)
    # per-wheel hub force from the per-wheel x balance; normals split evenly
    # (the model only ever determines the sum)
    h1 = float(sol[7] - p.m_w * (p.r * sol[3] + p.g * sa))
    h2 = float(sol[8] - p.m_w * (p.r * sol[4] + p.g * sa))
    n_half = float(0.5 * sol[6] + p.m_w * p.g * ca)
    return ContactForces(h1=h1, h2=h2, n1=n_half, n2=n_half,
                         f1=float(sol[7]), f2=float(sol[8]))


def ground_derivative(
    s: GroundState, cmd: ActuatorCommand, p: VehicleParams, gravity_tilt: float = 0.0
) -> tuple[GroundDeriv, ContactForces]:
    """Accelerations and solved constraint forces for the current instant."""
    y = (s.x, s.x_dot, s.theta, s.theta_dot, s.gamma, s.gamma_dot)
    sol = _ground_system(y, cmd, p, gravity_tilt)
    vw = s.wheel_speed(p)
    dy = s.gamma_dot * p.l_wy
    deriv = GroundDeriv(
        x_dot=s.x_dot, x_ddot=float(sol[0]),
        theta_dot=s.theta_dot, theta_ddot=float(sol[1]),
        gamma_dot=s.gamma_dot, gamma_ddot=float(sol[2]),
        delta1_dot=(vw - dy) / p.r, delta2_dot=(vw + dy) / p.r,
    )
    return deriv, _contact_from_solution(sol, p, gravity_tilt)


def lagrangian_oracle(
    s: GroundState, cmd: ActuatorCommand, p: VehicleParams, gravity_tilt: float = 0.0
) -> tuple[float, float, float]:
    """Independent re-derivation of (x_ddot, theta_ddot, gamma_ddot).

    Planar Lagrangian in generalized coordinates (wheel ground position,
    pitch), plus the reduced closed form for yaw. Shares no code with the
    constraint-system path; used to cross-check it.
    """
    m, mw, lwz, r = p.m, p.m_w, p.l_wz, p.r
    st, ct = math.sin(s.theta), math.cos(s.theta)
    sa, ca = math.sin(gravity_tilt), math.cos(gravity_tilt)
    td = s.theta_dot

    m11 = m + 2.0 * mw + 2.0 * p.j_wy / r**2
    m12 = m * lwz * ct
    m22 = m * lwz**2 + p.jy

    tau_sum = cmd.tau_w1 + cmd.tau_w2
    thrust_x = (cmd.t1 * math.sin(s.theta + cmd.sigma1)
                + cmd.t2 * math.sin(s.theta + cmd.sigma2))
    tilt_torque = (p.l_z + lwz) * (cmd.t1 * math.sin(cmd.sigma1)
                                   + cmd.t2 * math.sin(cmd.sigma2))

    q_s = (m * lwz * st * td * td + tau_sum / r + thrust_x
           - (m + 2.0 * mw) * p.g * sa)
    q_t = m * p.g * lwz * (ca * st - sa * ct) - tau_sum + tilt_torque

    det = m11 * m22 - m12 * m12
    s_dd = (m22 * q_s - m12 * q_t) / det
    t_dd = (m11 * q_t - m12 * q_s) / det
    x_dd = s_dd + lwz * ct * t_dd - lwz * st * td * td

    # yaw: friction couple about the CG with spin inertia folded in
    jzz_eff = j_sigma_z(p) + 2.0 * p.j_wy * p.l_wy**2 / r**2
    g_dd = p.l_wy * (cmd.tau_w2 - cmd.tau_w1) / (r * jzz_eff)
    return x_dd, t_dd, g_dd


def mechanical_energy(s: GroundState, p: VehicleParams, gravity_tilt: float = 0.0) -> float:
    """Planar mechanical energy of the ground model (yaw at rest).

    Wheel translation and spin, chassis translation and pitch, plus the
    gravitational potential of the chassis CG. Conserved when thrusts and
    wheel torques are zero.
    """
    st, ct = math.sin(s.theta), math.cos(s.theta)
    s_dot = s.wheel_speed(p)
    m11 = p.m + 2.0 * p.m_w + 2.0 * p.j_wy / p.r**2
    ke = (0.5 * m11 * s_dot**2
          + p.m * p.l_wz * ct * s_dot * s.theta_dot
          + 0.5 * (p.m * p.l_wz**2 + p.jy) * s.theta_dot**2)
    x_c = s.x
    z_c = p.r + p.l_wz * ct
    pe = p.m * p.g * (math.sin(gravity_tilt) * x_c + math.cos(gravity_tilt) * z_c)
    pe += 2.0 * p.m_w * p.g * math.sin(gravity_tilt) * (x_c - p.l_wz * st)
    return ke + pe


# --- integrator ------------------------------------------------------------

def _check_dt(dt: float) -> None:
    if not 0.0 < dt <= 0.01:
        raise ValueError(f"dt {dt!r} outside (0, 0.01]")


def step(
    state: VehicleState,
    cmd: ActuatorCommand,
    p: VehicleParams,
    dt: float,
    gravity_tilt: float = 0.0,
) -> VehicleState:
    """Advance one RK4 step under a zero-order-hold command.

    Energy use is metered at the start-of-step operating point:
    dt * (prop power + wheel power + idle power). Mode is never changed
    here; contact_transition() decides that between steps.
    """
    _check_dt(dt)
    p_elec = (propeller_power(cmd.t1, p) + propeller_power(cmd.t2, p) + p.p_idle)

    if state.mode == GROUND:
        g = state.ground
        w1, w2 = g.wheel_rates(p)
        p_elec += wheel_power(cmd.tau_w1, w1, p) + wheel_power(cmd.tau_w2, w2, p)

        y0 = (g.x, g.x_dot, g.theta, g.theta_dot, g.gamma, g.gamma_dot)
        k1, sol0 = _ground_rhs_full(y0, cmd, p, gravity_tilt)
        y1 = tuple(a + 0.5 * dt * b for a, b in zip(y0, k1[:6]))
        k2 = _ground_rhs(y1, cmd, p, gravity_tilt)
        y2 = tuple(a + 0.5 * dt * b for a, b in zip(y0, k2[:6]))
        k3 = _ground_rhs(y2, cmd, p, gravity_tilt)
        y3 = tuple(a + dt * b for a, b in zip(y0, k3[:6]))
        k4 = _ground_rhs(y3, cmd, p, gravity_tilt)

        h = dt / 6.0
        x, x_dot, theta, theta_dot, gamma, gamma_dot = (
            a + h * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(y0, k1[:6], k2[:6], k3[:6], k4[:6])
        )
        d1 = g.delta1 + h * (k1[6] + 2.0 * k2[6] + 2.0 * k3[6] + k4[6])
        d2 = g.delta2 + h * (k1[7] + 2.0 * k2[7] + 2.0 * k3[7] + k4[7])

        contact = _contact_from_solution(sol0, p, gravity_tilt)
        new_ground = GroundState(x=x, x_dot=x_dot, theta=theta,
                                 theta_dot=theta_dot, gamma=gamma,
                                 gamma_dot=gamma_dot, delta1=d1, delta2=d2)
        return VehicleState(mode=GROUND, ground=new_ground, t=state.t + dt,
                            energy_used=state.energy_used + dt * p_elec,
                            contact=contact)

    # wheels are locked in the air; commanded torque still burns holding loss
    p_elec += wheel_power(cmd.tau_w1, 0.0, p) + wheel_power(cmd.tau_w2, 0.0, p)
    y0 = _aerial_pack(state.aerial)
    k1 = _aerial_rhs(y0, cmd, p)
    k2 = _aerial_rhs(y0 + 0.5 * dt * k1, cmd, p)
    k3 = _aerial_rhs(y0 + 0.5 * dt * k2, cmd, p)
    k4 = _aerial_rhs(y0 + dt * k3, cmd, p)
    y = y0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    s = _aerial_unpack(y)
    s = AerialState(p=s.p, v=s.v, r=renormalize(s.r), omega=s.omega)
    return VehicleState(mode=AERIAL, aerial=s, t=state.t + dt,
                        energy_used=state.energy_used + dt * p_elec,
                        contact=None)


# --- contact transitions ---------------------------------------------------

def wheel_axle_height(s: AerialState, p: VehicleParams) -> float:
    """Height of the wheel axle midpoint above where it sits on flat ground."""
    d_w = np.array([0.0, 0.0, -p.l_wz])
    return float(s.p[2] + (s.r @ d_w)[2] - p.r)


def contact_transition(state: VehicleState, p: VehicleParams) -> VehicleState:
    """Switch mode when the contact condition flips; identity otherwise.

    Touchdown (aerial -> ground) happens when the axle reaches wheel-radius
    height while moving down. The landing is inelastic: vertical speed and
    roll are discarded, heading and pitch carry over, wheel odometry
    restarts at zero. Liftoff (ground -> aerial) happens when the solved
    ground normal force drops to zero or below. Both projections assume
    flat ground; incline scenarios are expected to stay on the ground.
    """
    if state.mode == AERIAL:
        s = state.aerial
        d_w = np.array([0.0, 0.0, -p.l_wz])
        h = s.p[2] + (s.r @ d_w)[2] - p.r
        vz_axle = s.v[2] + (s.r @ np.cross(s.omega, d_w))[2]
        if h <= 0.0 and vz_axle < 0.0:
            _, pitch, yaw = rotation_to_euler(s.r)
            cp = math.cos(pitch)
            gamma_dot = float(s.omega[2]) / cp if abs(cp) > 1e-6 else 0.0
            cy, sy = math.cos(yaw), math.sin(yaw)
            g = GroundState(
                x=float(s.p[0] * cy + s.p[1] * sy),
                x_dot=float(s.v[0] * cy + s.v[1] * sy),
                theta=pitch, theta_dot=float(s.omega[1]),
                gamma=yaw, gamma_dot=gamma_dot,
                delta1=0.0, delta2=0.0,
            )
            return VehicleState(mode=GROUND, ground=g, t=state.t,
                                energy_used=state.energy_used, contact=None)
        return state

    if state.contact is not None and state.contact.n_total <= 0.0:
        g = state.ground
        st, ct = math.sin(g.theta), math.cos(g.theta)
        cy, sy = math.cos(g.gamma), math.sin(g.gamma)
        r = np.array([
            [cy * ct, -sy, cy * st],
            [sy * ct, cy, sy * st],
            [-st, 0.0, ct],
        ])  # Rz(gamma) @ Ry(theta)
        omega = np.array([-g.gamma_dot * st, g.theta_dot, g.gamma_dot * ct])
        a = AerialState(
            p=np.array([g.x * cy, g.x * sy, p.r + p.l_wz * ct]),
            v=np.array([g.x_dot * cy, g.x_dot * sy, -p.l_wz * st * g.theta_dot]),
            r=r, omega=omega,
        )
        return VehicleState(mode=AERIAL, aerial=a, t=state.t,
                            energy_used=state.energy_used, contact=None)
    return state
