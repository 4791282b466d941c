"""Telemetry logging, bit-exact CSV round trip, replay, energy report.

One row per control period. Each row carries the post-step state together
with the actuator command that produced it, so the whole run can be
replayed by re-stepping the command column and compared bitwise. Floats
are written with 17 significant digits, which round-trips IEEE doubles
exactly; a rerun of the same scenario therefore produces byte-identical
files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import (
    AERIAL,
    GROUND,
    AerialState,
    ContactForces,
    GroundState,
    VehicleState,
)
from .params import ActuatorCommand

FORMAT_VERSION = 1

_GROUND_COLS = ("x", "x_dot", "theta", "theta_dot", "gamma", "gamma_dot",
                "delta1", "delta2")
_AERIAL_COLS = ("px", "py", "pz", "vx", "vy", "vz",
                "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22",
                "wx", "wy", "wz")
_CMD_COLS = ("t1", "t2", "sigma1", "sigma2", "tau_w1", "tau_w2")
_CONTACT_COLS = ("h1", "h2", "n1", "n2", "f1", "f2")

COLUMNS = (("t", "mode", "branch", "c") + _GROUND_COLS + _AERIAL_COLS
           + _CMD_COLS + _CONTACT_COLS + ("power", "energy"))

_NAN6 = (math.nan,) * 6


def contact_tuple(cf: ContactForces | None) -> tuple[float, ...]:
    if cf is None:
        return _NAN6
    return (cf.h1, cf.h2, cf.n1, cf.n2, cf.f1, cf.f2)


@dataclass(frozen=True)
class TelemetryRow:
    t: float
    mode: str
    branch: str
    c: float
    ground: tuple[float, ...] | None   # 8 planar values, None when airborne
    aerial: tuple[float, ...] | None   # 18 values, None when grounded
    cmd: tuple[float, ...] | None      # command applied over the last period
    contact: tuple[float, ...]         # nan sextuple when airborne
    power: float                       # W, mean electrical draw over the period
    energy: float                      # J, cumulative since scenario start

    @classmethod
    def from_state(cls, t, state, cmd, info, power):
        if state.mode == GROUND:
            g = state.ground
            ground = (g.x, g.x_dot, g.theta, g.theta_dot,
                      g.gamma, g.gamma_dot, g.delta1, g.delta2)
            aerial = None
        else:
            a = state.aerial
            aerial = (tuple(a.p) + tuple(a.v) + tuple(a.r.ravel())
                      + tuple(a.omega))
            ground = None
        return cls(
            t=t,
            mode=state.mode,
            branch=info.branch if info is not None else "init",
            c=info.c if info is not None else math.nan,
            ground=ground,
            aerial=aerial,
            cmd=None if cmd is None else (cmd.t1, cmd.t2, cmd.sigma1,
                                          cmd.sigma2, cmd.tau_w1, cmd.tau_w2),
            contact=contact_tuple(state.contact),
            power=power,
            energy=state.energy_used,
        )

    def state(self) -> VehicleState:
        """Rebuild the dynamic state this row recorded."""
        import numpy as np

        if self.mode == GROUND:
            g = GroundState(*self.ground)
            return VehicleState(mode=GROUND, ground=g, t=self.t,
                                energy_used=self.energy)
        a = AerialState(
            p=np.array(self.aerial[0:3]),
            v=np.array(self.aerial[3:6]),
            r=np.array(self.aerial[6:15]).reshape(3, 3),
            omega=np.array(self.aerial[15:18]),
        )
        return VehicleState(mode=AERIAL, aerial=a, t=self.t,
                            energy_used=self.energy)

    def command(self) -> ActuatorCommand:
        if self.cmd is None:
            raise ValueError("row carries no command")
        return ActuatorCommand(*self.cmd)


@dataclass(frozen=True)
class SimLog:
    name: str
    dt: float
    rows: list[TelemetryRow]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _row_line(row: TelemetryRow) -> str:
    ground = row.ground if row.ground is not None else (math.nan,) * 8
    aerial = row.aerial if row.aerial is not None else (math.nan,) * 18
    cmd = row.cmd if row.cmd is not None else _NAN6
    vals = [_fmt(row.t), row.mode, row.branch, _fmt(row.c)]
    vals += [_fmt(v) for v in ground]
    vals += [_fmt(v) for v in aerial]
    vals += [_fmt(v) for v in cmd]
    vals += [_fmt(v) for v in row.contact]
    vals += [_fmt(row.power), _fmt(row.energy)]
    return ",".join(vals)


def write_log(log: SimLog, path: str) -> None:
    lines = [f"# tiltrover telemetry v{FORMAT_VERSION} "
             f"scenario={log.name} dt={_fmt(log.dt)}",
             ",".join(COLUMNS)]
    lines += [_row_line(r) for r in log.rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _all_nan(vals) -> bool:
    return all(math.isnan(v) for v in vals)


def read_log(path: str) -> SimLog:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        cols = fh.readline().rstrip("\n")
        body = fh.read().splitlines()
    prefix = f"# tiltrover telemetry v{FORMAT_VERSION} "
    if not header.startswith(prefix):
        raise ValueError(f"unrecognized telemetry header: {header!r}")
    meta = dict(kv.split("=", 1) for kv in header[len(prefix):].split())
    if cols != ",".join(COLUMNS):
        raise ValueError("telemetry column set does not match this version")
    rows = []
    for line in body:
        f = line.split(",")
        if len(f) != len(COLUMNS):
            raise ValueError(f"bad telemetry row: {line!r}")
        ground = tuple(float(v) for v in f[4:12])
        aerial = tuple(float(v) for v in f[12:30])
        cmd = tuple(float(v) for v in f[30:36])
        contact = tuple(float(v) for v in f[36:42])
        rows.append(TelemetryRow(
            t=float(f[0]), mode=f[1], branch=f[2], c=float(f[3]),
            ground=None if _all_nan(ground) else ground,
            aerial=None if _all_nan(aerial) else aerial,
            cmd=None if _all_nan(cmd) else cmd,
            contact=contact,
            power=float(f[42]), energy=float(f[43]),
        ))
    return SimLog(name=meta["scenario"], dt=float(meta["dt"]), rows=rows)


def replay_log(log: SimLog, params, gravity_tilt: float = 0.0) -> None:
    """Re-step the command column; raise if any state mismatches bitwise.

    This is the integrity check for the log format: position, velocity,
    attitude, energy and contact forces must all reproduce exactly from
    row zero plus the recorded commands.
    """
    from .dynamics import contact_transition, step

    state = log.rows[0].state()
    for i, row in enumerate(log.rows[1:], start=1):
        state = step(state, row.command(), params, log.dt, gravity_tilt)
        if gravity_tilt == 0.0:
            state = contact_transition(state, params)
        rebuilt = row.state()
        if state.mode != rebuilt.mode:
            raise AssertionError(f"row {i}: mode diverged")
        want = TelemetryRow.from_state(row.t, state, row.command(), None, 0.0)
        for name, a, b in (("ground", want.ground, row.ground),
                           ("aerial", want.aerial, row.aerial),
                           ("contact", want.contact, row.contact)):
            if (a is None) != (b is None):
                raise AssertionError(f"row {i}: {name} block presence differs")
            if a is None:
                continue
            for j, (x, y) in enumerate(zip(a, b)):
                same = (x == y) or (math.isnan(x) and math.isnan(y))
                if not same:
                    raise AssertionError(
                        f"row {i}: {name}[{j}] {x!r} != {y!r}")
        if state.energy_used != row.energy:
            raise AssertionError(f"row {i}: energy diverged")


@dataclass(frozen=True)
class Segment:
    label: str           # idle | ground | decoupled | aerial
    t_start: float
    t_end: float
    energy: float        # J spent inside the segment
    mean_power: float    # W

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class EnergyReport:
    segments: tuple[Segment, ...]
    total: float         # J, cumulative at the end of the log

    def by_label(self) -> dict[str, float]:
        """Mean power per label, averaged over that label's total time."""
        acc: dict[str, list[float]] = {}
        for s in self.segments:
            e, d = acc.setdefault(s.label, [0.0, 0.0])
            acc[s.label] = [e + s.energy, d + s.duration]
        return {k: e / d for k, (e, d) in acc.items()}


def _segment_label(row: TelemetryRow) -> str:
    # transition blending is a flavor of the grounded regime, so segments
    # split only where the energy story changes: disarmed, decoupled
    # posture work, grounded balance, or airborne flight
    if row.branch in ("idle", "decoupled"):
        return row.branch
    return row.mode


def energy_report(log: SimLog) -> EnergyReport:
    rows = log.rows
    if len(rows) < 2:
        raise ValueError("log has no steps to report on")
    segments = []
    seg_start = 1
    label = _segment_label(rows[1])
    for i in range(2, len(rows) + 1):
        nxt = _segment_label(rows[i]) if i < len(rows) else None
        if nxt != label:
            e0 = rows[seg_start - 1].energy
            e1 = rows[i - 1].energy
            t0 = rows[seg_start - 1].t
            t1 = rows[i - 1].t
            segments.append(Segment(label=label, t_start=t0, t_end=t1,
                                    energy=e1 - e0,
                                    mean_power=(e1 - e0) / (t1 - t0)))
            if nxt is None:
                break
            seg_start = i
            label = nxt
    return EnergyReport(segments=tuple(segments), total=rows[-1].energy)


def format_energy_report(rep: EnergyReport) -> str:
    lines = [f"{'segment':>8s}  {'label':<10s}{'start s':>9s}{'end s':>9s}"
             f"{'energy J':>12s}{'mean W':>10s}"]
    for i, s in enumerate(rep.segments):
        lines.append(f"{i:>8d}  {s.label:<10s}{s.t_start:>9.3f}"
                     f"{s.t_end:>9.3f}{s.energy:>12.3f}{s.mean_power:>10.3f}")
    seg_sum = sum(s.energy for s in rep.segments)
    lines.append(f"{'total':>8s}  {'':<10s}{'':>9s}{'':>9s}"
                 f"{seg_sum:>12.3f}{'':>10s}")
    return "\n".join(lines)
