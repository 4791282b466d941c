"""Physical parameters, actuator limits, and electrical power models.

All numbers live here so the dynamics and controllers stay symbolic.
Defaults describe a 2.78 kg build: two tilting rotors on a transverse
axis, two 120 mm wheels below the chassis CG. Only the totals (mass,
wheel size, prop size) come from hardware; the split between chassis
and wheels, the inertias, and the offsets are documented estimates and
every field can be overridden from a config file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Any

import numpy as np
import yaml


@dataclass(frozen=True)
class VehicleParams:
    m: float = 2.48          # chassis mass, kg
    m_w: float = 0.15        # per-wheel mass, kg
    jx: float = 0.026        # chassis inertia about body x, kg m^2
    jy: float = 0.057        # chassis inertia about body y (pitch), kg m^2
    jz: float = 0.079        # chassis inertia about body z, kg m^2
    j_wx: float = 1.35e-4    # wheel inertia about a diameter, kg m^2
    j_wy: float = 2.7e-4     # wheel inertia about the spin axis (0.5*m_w*r^2)
    j_wz: float = 1.35e-4
    l_y: float = 0.18        # CG to propeller, body y, m
    l_z: float = 0.20        # CG to propeller, body z (props above CG), m
    l_wy: float = 0.15       # CG to wheel, body y, m
    l_wz: float = 0.14       # CG to wheel axle, body -z (wheels below CG), m
    r: float = 0.06          # wheel radius, m
    g: float = 9.81          # m/s^2
    t_max: float = 30.0      # per-motor thrust limit, N
    sigma_max: float = np.deg2rad(95.0)   # servo tilt limit, rad
    sigma_rate: float = 6.0  # servo slew rate, rad/s
    tau_max: float = 1.2     # per-wheel motor torque limit, N m
    rho: float = 1.225       # air density, kg/m^3
    a_prop: float = np.pi * 0.127**2      # 10 in propeller disk area, m^2
    fm: float = 0.6          # propeller figure of merit
    eta_wheel: float = 0.7   # wheel drivetrain efficiency
    k_h: float = 2.0         # wheel holding-loss coefficient, W/(N m)^2
    p_idle: float = 5.0      # avionics idle power, W

    def __post_init__(self) -> None:
        positive = (
            "m", "m_w", "jx", "jy", "jz", "j_wx", "j_wy", "j_wz",
            "l_y", "l_z", "l_wy", "l_wz", "r", "g", "t_max",
            "sigma_max", "sigma_rate", "tau_max", "rho", "a_prop",
        )
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ValueError(f"VehicleParams.{name} must be > 0")
        if not 0.0 < self.fm <= 1.0:
            raise ValueError("VehicleParams.fm must be in (0, 1]")
        if not 0.0 < self.eta_wheel <= 1.0:
            raise ValueError("VehicleParams.eta_wheel must be in (0, 1]")
        if self.k_h < 0.0 or self.p_idle < 0.0:
            raise ValueError("k_h and p_idle must be >= 0")

    @property
    def total_mass(self) -> float:
        return self.m + 2.0 * self.m_w

    @property
    def j_chassis(self) -> np.ndarray:
        return np.diag([self.jx, self.jy, self.jz])

    def j_total(self) -> np.ndarray:
        """Rigid-body inertia of chassis plus both locked wheels about the CG.

        Each wheel contributes its own inertia (diagonal in body axes:
        the spin axis is body y) plus a parallel-axis term for its offset.
        """
        j = self.j_chassis.copy()
        j_wheel = np.diag([self.j_wx, self.j_wy, self.j_wz])
        for sy in (+1.0, -1.0):
            d = np.array([0.0, sy * self.l_wy, -self.l_wz])
            j += j_wheel + self.m_w * (np.dot(d, d) * np.eye(3) - np.outer(d, d))
        return j


@dataclass(frozen=True)
class ActuatorCommand:
    t1: float = 0.0      # left propeller thrust, N
    t2: float = 0.0      # right propeller thrust, N
    sigma1: float = 0.0  # left tilt angle, rad
    sigma2: float = 0.0  # right tilt angle, rad
    tau_w1: float = 0.0  # left wheel torque, N m
    tau_w2: float = 0.0  # right wheel torque, N m


def default_params() -> VehicleParams:
    return VehicleParams()


def throttle_to_thrust(u: float, p: VehicleParams) -> float:
    """Static quadratic throttle map, T = T_max * u^2 (per motor)."""
    if not 0.0 <= u <= 1.0:
        raise ValueError(f"throttle {u!r} outside [0, 1]")
    return p.t_max * u * u


def hover_throttle(p: VehicleParams) -> float:
    """Throttle at which two motors exactly carry the vehicle weight."""
    weight = p.total_mass * p.g
    if weight > 2.0 * p.t_max:
        raise ValueError("vehicle too heavy to hover: weight exceeds total thrust")
    return float(np.sqrt(weight / (2.0 * p.t_max)))


def propeller_power(t: float, p: VehicleParams) -> float:
    """Momentum-theory electrical power for one propeller at thrust t."""
    if t < 0.0:
        raise ValueError("thrust must be >= 0")
    return t**1.5 / (p.fm * np.sqrt(2.0 * p.rho * p.a_prop))


def wheel_power(tau: float, omega: float, p: VehicleParams) -> float:
    """Electrical power of one wheel motor: shaft power plus holding loss."""
    return abs(tau * omega) / p.eta_wheel + p.k_h * tau * tau


def saturate(cmd: ActuatorCommand, p: VehicleParams) -> ActuatorCommand:
    """Clamp a command to the actuator limits. Idempotent."""
    clip = lambda v, lo, hi: lo if v < lo else hi if v > hi else v
    return ActuatorCommand(
        t1=clip(cmd.t1, 0.0, p.t_max),
        t2=clip(cmd.t2, 0.0, p.t_max),
        sigma1=clip(cmd.sigma1, -p.sigma_max, p.sigma_max),
        sigma2=clip(cmd.sigma2, -p.sigma_max, p.sigma_max),
        tau_w1=clip(cmd.tau_w1, -p.tau_max, p.tau_max),
        tau_w2=clip(cmd.tau_w2, -p.tau_max, p.tau_max),
    )


_PARAM_KEYS = {f.name for f in fields(VehicleParams)}


def params_from_dict(overrides: dict[str, Any], base: VehicleParams | None = None) -> VehicleParams:
    """Apply a flat {field: value} mapping on top of base (or defaults).

    Unknown keys are an error: a typo in a config file must not silently
    fall back to a default.
    """
    unknown = set(overrides) - _PARAM_KEYS
    if unknown:
        raise KeyError(f"unknown parameter keys: {sorted(unknown)}")
    base = base if base is not None else default_params()
    return replace(base, **{k: float(v) for k, v in overrides.items()})


def load_params(path: str) -> VehicleParams:
    """Load a YAML config file holding a flat parameter mapping."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping of parameter names to numbers")
    return params_from_dict(data)
