"""Render telemetry logs to figure files for the CLI report path."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .telemetry import EnergyReport, SimLog

_SHADE = {"idle": "0.85", "ground": "#d8ecd8", "decoupled": "#f4e6c8",
          "aerial": "#d4e4f7"}


def _pitch_deg(row) -> float:
    if row.ground is not None:
        return math.degrees(row.ground[2])
    r = row.aerial
    # pitch from the body-x column of the rotation matrix
    return math.degrees(math.asin(max(-1.0, min(1.0, -r[12]))))


def _shade_modes(ax, rep: EnergyReport) -> None:
    for seg in rep.segments:
        ax.axvspan(seg.t_start, seg.t_end,
                   color=_SHADE.get(seg.label, "white"), zorder=0)


def render_report(log: SimLog, rep: EnergyReport, stem: str) -> list[str]:
    """Write <stem>.png (time series) and <stem>_energy.png; return paths."""
    rows = log.rows
    t = np.array([r.t for r in rows])
    pitch = np.array([_pitch_deg(r) for r in rows])
    alt = np.array([r.aerial[2] if r.aerial is not None else np.nan
                    for r in rows])
    cmd = np.array([r.cmd if r.cmd is not None else (np.nan,) * 6
                    for r in rows])
    speed = np.array([r.ground[1] if r.ground is not None else np.nan
                      for r in rows])
    power = np.array([r.power for r in rows])
    energy = np.array([r.energy for r in rows])
    c = np.array([r.c for r in rows])

    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(9, 11))
    for ax in axes:
        _shade_modes(ax, rep)

    ax = axes[0]
    ax.plot(t, pitch, "C0", lw=1.0, label="pitch deg")
    ax.set_ylabel("pitch, deg")
    ax2 = ax.twinx()
    ax2.plot(t, alt, "C3", lw=1.0, label="altitude m")
    ax2.set_ylabel("altitude, m")
    ax.set_title(f"{log.name}  (shading: mode segments)")

    ax = axes[1]
    ax.plot(t, cmd[:, 0], "C0", lw=0.8, label="thrust 1, N")
    ax.plot(t, cmd[:, 1], "C1", lw=0.8, label="thrust 2, N")
    ax.set_ylabel("thrust, N")
    ax2 = ax.twinx()
    ax2.plot(t, np.degrees(cmd[:, 2]), "C2", lw=0.8, label="tilt 1")
    ax2.plot(t, np.degrees(cmd[:, 3]), "C4", lw=0.8, label="tilt 2")
    ax2.set_ylabel("tilt, deg")
    ax.legend(loc="upper left", fontsize=8)
    ax2.legend(loc="upper right", fontsize=8)

    ax = axes[2]
    ax.plot(t, cmd[:, 4], "C0", lw=0.8, label="wheel torque 1")
    ax.plot(t, cmd[:, 5], "C1", lw=0.8, label="wheel torque 2")
    ax.set_ylabel("wheel torque, N m")
    ax2 = ax.twinx()
    ax2.plot(t, speed, "C3", lw=0.8)
    ax2.plot(t, c, "k", lw=0.7, alpha=0.5)
    ax2.set_ylabel("speed m/s / blend")
    ax.legend(loc="upper left", fontsize=8)

    ax = axes[3]
    ax.plot(t, power, "C0", lw=0.8)
    ax.set_ylabel("power, W")
    ax.set_xlabel("time, s")
    ax2 = ax.twinx()
    ax2.plot(t, energy, "C3", lw=1.0)
    ax2.set_ylabel("energy, J")

    fig.tight_layout()
    ts_path = f"{stem}.png"
    fig.savefig(ts_path, dpi=110)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7, 3.2))
    labels = [f"{i}: {s.label}" for i, s in enumerate(rep.segments)]
    powers = [s.mean_power for s in rep.segments]
    colors = [_SHADE.get(s.label, "white") for s in rep.segments]
    bars = ax.bar(labels, powers, color=colors, edgecolor="0.3")
    ax.bar_label(bars, fmt="%.1f", fontsize=8)
    ax.set_ylabel("mean power, W")
    ax.set_title("energy use by segment")
    fig.tight_layout()
    en_path = f"{stem}_energy.png"
    fig.savefig(en_path, dpi=110)
    plt.close(fig)
    return [ts_path, en_path]
