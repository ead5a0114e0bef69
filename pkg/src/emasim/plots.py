"""Figure rendering for trajectories and envelopes (file output only).

Uses the Agg backend so runs stay headless; every helper writes PNG files
next to the delimited output and returns the written paths.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bounds import envelope_table
from .controller import GainCertificate
from .model import PlantParams
from .sim import Trajectory

_STYLE = {
    "figure.figsize": (7.0, 4.2),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.1,
    "font.size": 9,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_trajectory_figures(
    traj: Trajectory,
    out_dir: str | Path,
    certificate: GainCertificate | None = None,
    prefix: str = "",
) -> list[Path]:
    """Standard figure set for one run; returns the written file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if len(traj) == 0:
        return []
    written: list[Path] = []
    y_ref = (
        np.asarray([traj.reference_at(t) for t in traj.t])
        if traj.reference is not None
        else None
    )

    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True)
        ax1.plot(traj.t, 1e3 * traj.x1, label="position")
        if y_ref is not None:
            ax1.plot(traj.t, 1e3 * y_ref, "--", color="tab:red", label="reference")
        ax1.set_ylabel("x1 [mm]")
        ax1.legend(loc="lower right")
        ax2.plot(traj.t, 1e3 * traj.x2, color="tab:green")
        ax2.set_ylabel("x2 [mm/s]")
        ax2.set_xlabel("t [s]")
        written.append(_save(fig, out_dir / f"{prefix}position_velocity.png"))

        fig, ax = plt.subplots()
        ax.plot(traj.t, traj.x3, label="coil current")
        ax.plot(traj.t, traj.x3d, "--", color="tab:red", label="virtual current")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("x3 [A]")
        ax.legend(loc="upper right")
        written.append(_save(fig, out_dir / f"{prefix}coil_current.png"))

        fig, ax = plt.subplots()
        ax.plot(traj.t, traj.u, linewidth=0.4)
        ax.set_xlabel("t [s]")
        ax.set_ylabel("u [V]")
        written.append(_save(fig, out_dir / f"{prefix}control_voltage.png"))

        fig, ax = plt.subplots(figsize=(4.8, 4.4))
        ax.plot(1e3 * traj.z1, 1e3 * traj.z2, linewidth=0.8)
        ax.plot([1e3 * traj.z1[0]], [1e3 * traj.z2[0]], "o", color="tab:green", label="start")
        ax.plot([1e3 * traj.z1[-1]], [1e3 * traj.z2[-1]], "s", color="tab:red", label="end")
        if certificate is not None and np.isfinite(certificate.radius_extreme):
            phi = np.linspace(0.0, 2.0 * np.pi, 181)
            r = 1e3 * certificate.radius_extreme
            ax.plot(r * np.cos(phi), r * np.sin(phi), ":", color="gray", label="inner disc")
        ax.set_xlabel("z1 [mm]")
        ax.set_ylabel("z2 [mm/s]")
        ax.legend(loc="best")
        written.append(_save(fig, out_dir / f"{prefix}error_plane.png"))

        fig, ax = plt.subplots()
        ax.semilogy(traj.t, np.maximum(traj.V, 1e-300), label="V = V1 + V2")
        ax.semilogy(traj.t, np.maximum(traj.V1, 1e-300), "--", label="V1 (tracking)")
        ax.semilogy(traj.t, np.maximum(traj.V2, 1e-300), ":", label="V2 (surface)")
        ax.set_xlabel("t [s]")
        ax.set_ylabel("storage")
        ax.legend(loc="upper right")
        written.append(_save(fig, out_dir / f"{prefix}storage.png"))
    return written


def render_envelope_figure(p: PlantParams, x1_grid, path: str | Path) -> Path:
    """Envelope bands for rho, L, mu over a gap grid, one three-panel figure."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = envelope_table(p, x1_grid)
    x_mm = 1e3 * table["x1"]
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7.0, 6.4))
        panels = (
            ("rho_lo", "rho_hi", "reluctance [1/H]"),
            ("L_lo", "L_hi", "inductance [H]"),
            ("mu_lo", "mu_hi", "mu [H/m]"),
        )
        for ax, (lo, hi, label) in zip(axes, panels):
            ax.fill_between(x_mm, table[lo], table[hi], alpha=0.3, color="tab:blue")
            ax.plot(x_mm, table[lo], color="tab:blue", linewidth=0.8)
            ax.plot(x_mm, table[hi], color="tab:blue", linewidth=0.8)
            ax.set_ylabel(label)
        axes[-1].set_xlabel("x1 [mm]")
        _save(fig, path)
    return path
