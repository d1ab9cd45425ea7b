"""Open-loop frequency response, stability margins, and the stability boundary.

The loop transfer function is ``L(jw) = K*(K_P*jw + K_I)/(jw)^2 * e^(-jwL)``.
Its magnitude is strictly decreasing in w, so the gain crossover is unique;
the phase, taken in unwrapped analytic form

    phase(w) = -pi + atan2(K_P*w, K_I) - w*L,

decreases without bound, so there are infinitely many -180 deg crossings and
the smallest one defines the gain margin.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import PiGains, PlantParams
from .semidiscrete import DEFAULT_SEGMENTS, EigensolverError
from .spectral import NewtonConvergenceError, spectral_abscissa

__all__ = [
    "MarginReport",
    "MarginGrid",
    "CrossoverError",
    "loop_response",
    "loop_magnitude",
    "loop_phase",
    "margins",
    "margin_grid",
    "stability_boundary",
    "margins_to_dict",
    "margin_grid_to_csv",
    "boundary_to_csv",
]

PRESCAN_POINTS = 2048


class CrossoverError(RuntimeError):
    """The loop has no usable crossover in the search window."""

    def __init__(self, missing: str, message: str):
        super().__init__(message)
        self.missing = missing


@dataclass(frozen=True)
class MarginReport:
    """Classical stability margins of the open loop."""

    gain_crossover: float
    phase_margin_deg: float
    phase_crossover: float
    gain_margin: float
    gain_margin_db: float


def _check_omega(omega) -> None:
    arr = np.asarray(omega, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("omega must be positive (the double integrator is singular at 0)")


def loop_response(omega, plant: PlantParams, gains: PiGains):
    """Complex loop value(s) at frequency omega (rad/s); accepts arrays."""
    _check_omega(omega)
    K, L = plant.gain, plant.delay
    if isinstance(omega, np.ndarray):
        jw = 1j * omega
        return K * (gains.kp * jw + gains.ki) / (jw * jw) * np.exp(-L * jw)
    jw = 1j * float(omega)
    return K * (gains.kp * jw + gains.ki) / (jw * jw) * complex(math.cos(L * omega), -math.sin(L * omega))


def loop_magnitude(omega, plant: PlantParams, gains: PiGains):
    """|L(jw)| = K*sqrt((K_P*w)^2 + K_I^2)/w^2."""
    _check_omega(omega)
    w = np.asarray(omega, dtype=float) if isinstance(omega, np.ndarray) else float(omega)
    return plant.gain * np.hypot(gains.kp * w, gains.ki) / (w * w)


def loop_phase(omega, plant: PlantParams, gains: PiGains):
    """Unwrapped loop phase in radians: -pi + atan2(K_P*w, K_I) - w*L."""
    _check_omega(omega)
    w = np.asarray(omega, dtype=float) if isinstance(omega, np.ndarray) else float(omega)
    return -math.pi + np.arctan2(gains.kp * w, gains.ki) - w * plant.delay


def _bisect(fn, lo: float, hi: float, iterations: int = 100) -> float:
    flo = fn(lo)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(lo)):
            break
    return 0.5 * (lo + hi)


def margins(plant: PlantParams, gains: PiGains, prescan: int = PRESCAN_POINTS) -> MarginReport:
    """Gain/phase crossovers and margins via log prescan plus bisection.

    The window is (1e-4, 50/L) rad/s.  PM = 180 deg + phase(w_gc); GM is the
    reciprocal loop magnitude at the smallest -180 deg crossing.  Raises
    :class:`CrossoverError` naming the missing crossover when the loop never
    crosses unity magnitude or -180 deg inside the window.
    """
    L = plant.delay
    w = np.logspace(math.log10(1e-4), math.log10(50.0 / L), prescan)
    mag = loop_magnitude(w, plant, gains)

    below = np.flatnonzero(mag < 1.0)
    if below.size == 0 or below[0] == 0:
        raise CrossoverError("gain", "no gain crossover: loop magnitude does not cross unity in the window")
    i = below[0]
    w_gc = _bisect(lambda x: loop_magnitude(x, plant, gains) - 1.0, w[i - 1], w[i])
    pm = 180.0 + math.degrees(loop_phase(w_gc, plant, gains))

    # -180 deg crossings are integer crossings of (phase + pi)/(2*pi).
    q = (loop_phase(w, plant, gains) + math.pi) / (2.0 * math.pi)
    floors = np.floor(q)
    changes = np.flatnonzero(floors[1:] != floors[:-1])
    if changes.size == 0:
        raise CrossoverError("phase", "no phase crossover: loop phase does not cross -180 deg in the window")
    i = int(changes[0])
    level = max(floors[i], floors[i + 1])  # first multiple of 2*pi crossed
    target = 2.0 * math.pi * level - math.pi
    w_pc = _bisect(lambda x: loop_phase(x, plant, gains) - target, w[i], w[i + 1])
    gm = 1.0 / float(loop_magnitude(w_pc, plant, gains))
    return MarginReport(
        gain_crossover=float(w_gc),
        phase_margin_deg=float(pm),
        phase_crossover=float(w_pc),
        gain_margin=float(gm),
        gain_margin_db=float(20.0 * math.log10(gm)),
    )


@dataclass(frozen=True, eq=False)
class MarginGrid:
    """Phase/gain margins over a gain lattice, with a stability flag per cell."""

    kp_axis: np.ndarray
    ki_axis: np.ndarray
    pm_deg: np.ndarray
    gm: np.ndarray
    stable: np.ndarray


def margin_grid(
    plant: PlantParams,
    kp_axis,
    ki_axis,
    segments: int = DEFAULT_SEGMENTS,
    workers: int = 1,
) -> MarginGrid:
    """Margins per cell; ``stable`` comes from the refined spectral abscissa.

    Cells whose margins are undefined carry NaN; cells whose pole refinement
    fails are marked unstable=False.
    """
    kp_axis = np.asarray(kp_axis, dtype=float)
    ki_axis = np.asarray(ki_axis, dtype=float)
    if kp_axis.size == 0 or ki_axis.size == 0 or np.any(kp_axis <= 0) or np.any(ki_axis <= 0):
        raise ValueError("axes must be nonempty and positive")

    cells = [(i, j) for i in range(ki_axis.size) for j in range(kp_axis.size)]

    def cell(idx):
        i, j = idx
        g = PiGains(kp_axis[j], ki_axis[i])
        try:
            rep = margins(plant, g)
            pm, gm = rep.phase_margin_deg, rep.gain_margin
        except CrossoverError:
            pm, gm = math.nan, math.nan
        try:
            stable = spectral_abscissa(plant, g, segments) < 0.0
        except (NewtonConvergenceError, EigensolverError):
            stable = False
        return pm, gm, stable

    if workers <= 1:
        results = [cell(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(cell, cells))
    pm = np.empty((ki_axis.size, kp_axis.size))
    gm = np.empty_like(pm)
    stable = np.zeros(pm.shape, dtype=bool)
    for (i, j), (p, g_, s) in zip(cells, results):
        pm[i, j], gm[i, j], stable[i, j] = p, g_, s
    return MarginGrid(kp_axis=kp_axis, ki_axis=ki_axis, pm_deg=pm, gm=gm, stable=stable)


def stability_boundary(plant: PlantParams, omega_samples) -> np.ndarray:
    """Parametric marginal-stability curve from char_fn(jw) = 0.

    Splitting the characteristic function on the imaginary axis into real and
    imaginary parts gives K_P(w) = w*sin(w*L)/K and K_I(w) = w^2*cos(w*L)/K
    for w in (0, pi/(2L)).  Returns an (n, 2) array of (kp, ki) points.
    """
    K, L = plant.gain, plant.delay
    w = np.asarray(omega_samples, dtype=float)
    if w.size == 0:
        raise ValueError("omega_samples must be nonempty")
    if np.any(w <= 0) or np.any(w >= math.pi / (2.0 * L)):
        raise ValueError(f"omega samples must lie in the open interval (0, pi/(2L)) = (0, {math.pi/(2*L):.6g})")
    kp = w * np.sin(w * L) / K
    ki = w * w * np.cos(w * L) / K
    return np.column_stack([kp, ki])


def margins_to_dict(report: MarginReport) -> dict:
    return {
        "gain_crossover_rad_s": report.gain_crossover,
        "phase_margin_deg": report.phase_margin_deg,
        "phase_crossover_rad_s": report.phase_crossover,
        "gain_margin": report.gain_margin,
        "gain_margin_db": report.gain_margin_db,
    }


def margin_grid_to_csv(grid: MarginGrid, path) -> None:
    from .serialize import write_csv

    rows = []
    for i, ki in enumerate(grid.ki_axis):
        for j, kp in enumerate(grid.kp_axis):
            rows.append((kp, ki, grid.pm_deg[i, j], grid.gm[i, j], bool(grid.stable[i, j])))
    write_csv(path, ["kp", "ki", "pm_deg", "gm", "stable"], rows)


def boundary_to_csv(omega_samples, points: np.ndarray, path) -> None:
    from .serialize import write_csv

    rows = [(w, p[0], p[1]) for w, p in zip(np.asarray(omega_samples, dtype=float), points)]
    write_csv(path, ["omega", "kp", "ki"], rows)
