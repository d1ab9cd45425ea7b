"""Figure rendering for the CLI report path.

Each function takes the result object produced by the owning analysis module
and writes a PNG next to the delimited output.  Rendering is headless (Agg).
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .frequency import MarginGrid, MarginReport, loop_magnitude, loop_phase
from .model import PiGains, PlantParams
from .pade import ErrorMap
from .semidiscrete import SimulationTrace
from .tuner import GainGrid

DPI = 150


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_sweep(points, path) -> None:
    kp = [p[0] for p in points]
    ki = [p[1] for p in points]
    j = [p[2] for p in points]
    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    ax1.plot(kp, j, "b-", label="minimum abscissa")
    ax1.set_xlabel(r"$K_P$")
    ax1.set_ylabel("spectral abscissa", color="b")
    ax2 = ax1.twinx()
    ax2.plot(kp, ki, "r--", label=r"optimal $K_I$")
    ax2.set_ylabel(r"optimal $K_I$", color="r")
    ax1.set_title("Per-gain optimal integral action")
    _save(fig, path)


def plot_grid(grid: GainGrid, path, star: tuple[float, float] | None = None) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    levels = np.linspace(np.nanmin(grid.abscissa), min(np.nanmax(grid.abscissa), 1.0), 30)
    cs = ax.contourf(grid.kp_axis, grid.ki_axis, grid.abscissa, levels=levels, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="spectral abscissa")
    ax.contour(grid.kp_axis, grid.ki_axis, grid.abscissa, levels=[0.0], colors="k", linewidths=1.2)
    red = np.where(grid.real_dominant & (grid.abscissa < 0), 1.0, np.nan)
    ax.contourf(grid.kp_axis, grid.ki_axis, red, levels=[0.5, 1.5], colors="red", alpha=0.25)
    if star is not None:
        ax.plot(*star, "k*", markersize=14)
    ax.set_xlabel(r"$K_P$")
    ax.set_ylabel(r"$K_I$")
    ax.set_title("Stability region and dominant-root character")
    _save(fig, path)


def plot_trace(trace: SimulationTrace, path) -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax1.plot(trace.times, trace.error)
    ax1.axhline(0.0, color="k", lw=0.5)
    ax1.set_ylabel("error")
    ax2.plot(trace.times, trace.control, color="tab:orange")
    ax2.set_ylabel("control")
    ax2.set_xlabel("time [s]")
    ax1.set_title(f"{trace.scenario} response")
    _save(fig, path)


def plot_margins(report: MarginReport, plant: PlantParams, gains: PiGains, path) -> None:
    w = np.logspace(-2, math.log10(50.0 / plant.delay), 800)
    mag_db = 20.0 * np.log10(loop_magnitude(w, plant, gains))
    ph = np.degrees(loop_phase(w, plant, gains))
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5.5))
    ax1.semilogx(w, mag_db)
    ax1.axhline(0.0, color="k", ls="--", lw=0.8)
    ax1.axvline(report.gain_crossover, color="tab:orange", ls=":")
    ax1.axvline(report.phase_crossover, color="tab:green", ls=":")
    ax1.set_ylabel("magnitude [dB]")
    ax1.set_title(
        f"PM = {report.phase_margin_deg:.1f} deg at {report.gain_crossover:.4g} rad/s, "
        f"GM = {report.gain_margin:.2f} at {report.phase_crossover:.4g} rad/s"
    )
    ax2.semilogx(w, ph)
    ax2.axhline(-180.0, color="k", ls="--", lw=0.8)
    ax2.axvline(report.gain_crossover, color="tab:orange", ls=":")
    ax2.axvline(report.phase_crossover, color="tab:green", ls=":")
    ax2.set_ylabel("phase [deg]")
    ax2.set_xlabel("frequency [rad/s]")
    _save(fig, path)


def plot_margin_grid(grid: MarginGrid, boundary: np.ndarray, path, points=None) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.contourf(
        grid.kp_axis, grid.ki_axis, np.where(grid.stable, np.nan, 1.0),
        levels=[0.5, 1.5], colors="lightgray",
    )
    cs_pm = ax.contour(grid.kp_axis, grid.ki_axis, grid.pm_deg, levels=[30, 45, 60],
                       colors="blue", linestyles="dashed")
    ax.clabel(cs_pm, fmt="PM %d")
    cs_gm = ax.contour(grid.kp_axis, grid.ki_axis, grid.gm, levels=[1, 2, 3, 4, 5], colors="red")
    ax.clabel(cs_gm, fmt="GM %d")
    ax.plot(boundary[:, 0], boundary[:, 1], "k-", lw=1.5)
    if points:
        for label, kp, ki in points:
            ax.plot(kp, ki, "o", ms=5)
            ax.annotate(label, (kp, ki), fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel(r"$K_P$")
    ax.set_ylabel(r"$K_I$")
    ax.set_title("Phase/gain margin contours and stability limit")
    _save(fig, path)


def plot_baseline_traces(traces: dict[str, tuple[SimulationTrace, SimulationTrace]], path) -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7.5, 6))
    for method, (track, dist) in traces.items():
        ax1.plot(track.times, 1.0 - track.error, label=method)
        ax2.plot(dist.times, -dist.error, label=method)
    ax1.set_ylabel("output (reference step)")
    ax2.set_ylabel("output (load step)")
    ax2.set_xlabel("time [s]")
    ax1.legend(fontsize=8)
    ax1.set_title("Step responses by tuning method")
    _save(fig, path)


def plot_trajectory(curves: dict[str, list], path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for label, points in curves.items():
        alphas = [a for a, g in points if g is not None]
        kps = [g.kp for _, g in points if g is not None]
        kis = [g.ki for _, g in points if g is not None]
        ax1.plot(alphas, kps, marker="o", label=label)
        ax2.plot(alphas, kis, marker="o", label=label)
    ax1.set_xlabel(r"$\alpha$")
    ax1.set_ylabel(r"$K_P$")
    ax2.set_xlabel(r"$\alpha$")
    ax2.set_ylabel(r"$K_I$")
    ax1.legend(fontsize=8)
    fig.suptitle("Gain trajectories vs tracking/disturbance weight")
    _save(fig, path)


def plot_error_map(emap: ErrorMap, path) -> None:
    n = len(emap.methods)
    fig, axes = plt.subplots(1, n, figsize=(4 * n, 3.6), squeeze=False)
    for ax, method in zip(axes[0], emap.methods):
        arr = emap.errors[method]
        with np.errstate(divide="ignore"):
            logerr = np.log10(np.where(arr > 0, arr, np.nan))
        pc = ax.pcolormesh(emap.kp_axis, emap.ki_axis, logerr, shading="auto", cmap="magma")
        fig.colorbar(pc, ax=ax, label=r"$\log_{10}$ error")
        ax.contourf(emap.kp_axis, emap.ki_axis, np.where(emap.unstable, 1.0, np.nan),
                    levels=[0.5, 1.5], colors="gray")
        ax.set_title(method, fontsize=9)
        ax.set_xlabel(r"$K_P$")
        ax.set_ylabel(r"$K_I$")
    fig.suptitle("Dominant-pole real-part error (gray = unstable)")
    _save(fig, path)


def plot_pole_comparison(groups: dict[str, list[complex]], path) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 5))
    styles = {"refined": ("b", "x", 70), "semi-discrete": ("tab:orange", "o", 35), "pade-2": ("r", "+", 60),
              "pade-3": ("r", "+", 60)}
    for label, poles in groups.items():
        c, m, s = styles.get(label, ("k", ".", 30))
        ax.scatter([p.real for p in poles], [p.imag for p in poles], c=c, marker=m, s=s, label=label)
    ax.axvline(0.0, color="k", lw=0.5)
    ax.set_xlabel(r"Re $s$")
    ax.set_ylabel(r"Im $s$")
    ax.legend(fontsize=8)
    ax.set_title("Pole estimates by model")
    _save(fig, path)
