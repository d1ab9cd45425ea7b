"""Gain optimization over the spectral abscissa.

Differential evolution (rand/1/bin, deferred updating) drives the global
search; a coarse-scan-plus-golden-section inner search produces the optimal
integral gain for each fixed proportional gain; dense gain grids back the
stability-region contours.

All tuning runs on the normalized plant (K=1, L=1); results are scaled to the
requested plant at the API boundary, which maps poles exactly by s -> s/L.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import NORMALIZED_PLANT, PiGains, PlantParams, scale_gains_to_plant
from .semidiscrete import DEFAULT_SEGMENTS, EigensolverError
from .spectral import NewtonConvergenceError, PoleSet, dominant_poles, spectral_abscissa

__all__ = [
    "DeConfig",
    "GainGrid",
    "InfeasibleError",
    "INFEASIBLE_COST",
    "tune",
    "optimal_ki_sweep",
    "stability_grid",
    "grid_to_csv",
    "grid_to_json_dict",
]

# Bounded stand-in for +inf so the DE arithmetic stays finite.
INFEASIBLE_COST = 1e6


class InfeasibleError(RuntimeError):
    """Raised when no candidate in the search box stabilizes the loop."""


@dataclass(frozen=True)
class DeConfig:
    """Differential-evolution settings (rand/1/bin).

    The defaults are standard Storn-Price settings over a box that covers the
    whole stabilizing region of the normalized plant.  ``seed`` makes every
    run bit-reproducible.
    """

    population: int = 30
    weight_f: float = 0.7
    crossover_cr: float = 0.9
    max_generations: int = 200
    kp_bounds: tuple[float, float] = (0.01, 1.5)
    ki_bounds: tuple[float, float] = (0.001, 0.6)
    seed: int = 42

    def __post_init__(self) -> None:
        if self.population < 4:
            raise ValueError("population must be at least 4 for rand/1 mutation")
        if not 0.0 < self.weight_f < 2.0:
            raise ValueError(f"weight_f must be in (0, 2), got {self.weight_f}")
        if not 0.0 <= self.crossover_cr <= 1.0:
            raise ValueError(f"crossover_cr must be in [0, 1], got {self.crossover_cr}")
        if self.max_generations < 1:
            raise ValueError("max_generations must be positive")
        for name, (lo, hi) in (("kp_bounds", self.kp_bounds), ("ki_bounds", self.ki_bounds)):
            if not (0.0 < lo < hi):
                raise ValueError(f"{name} must satisfy 0 < lo < hi, got ({lo}, {hi})")


@dataclass(frozen=True, eq=False)
class GainGrid:
    """Spectral abscissa and dominant-root classification over a gain lattice.

    ``abscissa[i, j]`` belongs to (kp_axis[j], ki_axis[i]); NaN marks cells
    whose refinement failed.
    """

    kp_axis: np.ndarray
    ki_axis: np.ndarray
    abscissa: np.ndarray
    real_dominant: np.ndarray


def _ordered_map(fn, items, workers: int):
    """Apply fn preserving input order; thread-parallel when workers > 1."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _de_minimize(
    config: DeConfig,
    cost_fn=None,
    batch_cost_fn=None,
    init_center: np.ndarray | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, float]:
    """DE/rand/1/bin with deferred (generation-wise) updating.

    All random draws for a generation happen before any evaluation, and
    selections are applied in candidate order, so serial and parallel runs
    produce bit-identical populations.
    """
    if (cost_fn is None) == (batch_cost_fn is None):
        raise ValueError("exactly one of cost_fn or batch_cost_fn is required")

    def evaluate(X: np.ndarray) -> np.ndarray:
        if batch_cost_fn is not None:
            return np.asarray(batch_cost_fn(X), dtype=float)
        return np.asarray(_ordered_map(cost_fn, list(X), workers), dtype=float)

    rng = np.random.default_rng(config.seed)
    lb = np.array([config.kp_bounds[0], config.ki_bounds[0]])
    ub = np.array([config.kp_bounds[1], config.ki_bounds[1]])
    NP, dim = config.population, 2
    if init_center is None:
        pop = lb + rng.random((NP, dim)) * (ub - lb)
    else:
        center = np.clip(np.asarray(init_center, dtype=float), lb, ub)
        pop = np.clip(center + (rng.random((NP, dim)) - 0.5) * 0.2 * (ub - lb), lb, ub)
        pop[0] = center
    cost = evaluate(pop)
    for _ in range(config.max_generations):
        trials = np.empty_like(pop)
        for i in range(NP):
            choices = np.delete(np.arange(NP), i)
            r1, r2, r3 = rng.choice(choices, size=3, replace=False)
            mutant = np.clip(pop[r1] + config.weight_f * (pop[r2] - pop[r3]), lb, ub)
            cross = rng.random(dim) < config.crossover_cr
            cross[rng.integers(dim)] = True
            trials[i] = np.where(cross, mutant, pop[i])
        trial_cost = evaluate(trials)
        improved = trial_cost <= cost
        pop[improved] = trials[improved]
        cost[improved] = trial_cost[improved]
    best = int(np.argmin(cost))
    return pop[best].copy(), float(cost[best])


def _abscissa_cost(x: np.ndarray, segments: int) -> float:
    try:
        j = spectral_abscissa(NORMALIZED_PLANT, PiGains(float(x[0]), float(x[1])), segments)
    except (NewtonConvergenceError, EigensolverError):
        return INFEASIBLE_COST
    return j if j < 0.0 else INFEASIBLE_COST


def tune(
    plant: PlantParams,
    config: DeConfig | None = None,
    segments: int = DEFAULT_SEGMENTS,
    workers: int = 1,
) -> tuple[PiGains, PoleSet]:
    """Globally minimize the spectral abscissa over (K_P, K_I).

    The search runs on the normalized plant with ``config.bounds`` interpreted
    in normalized units; the returned gains are scaled to ``plant`` and the
    pole set is re-analyzed on it.  Candidates that are unstable or whose
    evaluation fails cost ``INFEASIBLE_COST``.

    Raises
    ------
    InfeasibleError
        If no candidate in the box stabilizes the loop.
    """
    cfg = config if config is not None else DeConfig()
    x, cost = _de_minimize(cfg, cost_fn=lambda v: _abscissa_cost(v, segments), workers=workers)
    if cost >= INFEASIBLE_COST:
        raise InfeasibleError("no stabilizing gains in bounds")
    gains = scale_gains_to_plant(PiGains(float(x[0]), float(x[1])), plant)
    return gains, dominant_poles(plant, gains, segments)


def _golden_section(fn, lo: float, hi: float, tol: float = 1e-6) -> tuple[float, float]:
    """Golden-section minimum of a scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimal_ki_sweep(
    plant: PlantParams,
    kp_values,
    segments: int = DEFAULT_SEGMENTS,
    ki_max: float = 0.6,
    coarse: int = 32,
    workers: int = 1,
) -> list[tuple[float, float, float]]:
    """Best integral gain and its abscissa for each proportional gain.

    A coarse scan over (0, ki_max] brackets the valley, golden-section search
    refines it.  Entries with no stabilizing K_I carry (kp, nan, inf).
    """
    kp_values = [float(k) for k in kp_values]

    def entry(kp: float) -> tuple[float, float, float]:
        def j_of(ki: float) -> float:
            try:
                return spectral_abscissa(plant, PiGains(kp, float(ki)), segments)
            except (NewtonConvergenceError, EigensolverError):
                return math.inf

        grid = np.linspace(ki_max / coarse, ki_max, coarse)
        vals = np.array([j_of(k) for k in grid])
        b = int(np.argmin(vals))
        if not np.isfinite(vals[b]):
            return (kp, math.nan, math.inf)
        lo = grid[max(b - 1, 0)]
        hi = grid[min(b + 1, coarse - 1)]
        ki_star, j_star = _golden_section(j_of, float(lo), float(hi))
        if vals[b] < j_star:
            ki_star, j_star = float(grid[b]), float(vals[b])
        if j_star >= 0.0:
            return (kp, math.nan, math.inf)
        return (kp, float(ki_star), float(j_star))

    return _ordered_map(entry, kp_values, workers)


def stability_grid(
    plant: PlantParams,
    kp_axis,
    ki_axis,
    segments: int = DEFAULT_SEGMENTS,
    workers: int = 1,
) -> GainGrid:
    """Spectral abscissa over a gain lattice with dominant-root classification.

    Per-cell numerical failures are recorded as NaN; the call itself fails
    only when more than half of the cells cannot be evaluated.
    """
    kp_axis = np.asarray(kp_axis, dtype=float)
    ki_axis = np.asarray(ki_axis, dtype=float)
    for name, ax in (("kp_axis", kp_axis), ("ki_axis", ki_axis)):
        if ax.size == 0 or np.any(ax <= 0):
            raise ValueError(f"{name} must be nonempty and positive")
        if np.any(np.diff(ax) <= 0):
            raise ValueError(f"{name} must be strictly increasing")

    cells = [(i, j) for i in range(ki_axis.size) for j in range(kp_axis.size)]

    def cell(idx: tuple[int, int]) -> tuple[float, bool]:
        i, j = idx
        try:
            ps = dominant_poles(plant, PiGains(kp_axis[j], ki_axis[i]), segments)
            return ps.abscissa, ps.dominant_is_real
        except (NewtonConvergenceError, EigensolverError):
            return math.nan, False

    results = _ordered_map(cell, cells, workers)
    abscissa = np.empty((ki_axis.size, kp_axis.size))
    real_dom = np.zeros((ki_axis.size, kp_axis.size), dtype=bool)
    for (i, j), (a, rd) in zip(cells, results):
        abscissa[i, j] = a
        real_dom[i, j] = rd
    failed = int(np.isnan(abscissa).sum())
    if failed > abscissa.size // 2:
        raise RuntimeError(f"{failed} of {abscissa.size} grid cells failed to evaluate")
    return GainGrid(kp_axis=kp_axis, ki_axis=ki_axis, abscissa=abscissa, real_dominant=real_dom)


def grid_to_csv(grid: GainGrid, path) -> None:
    from .serialize import write_csv

    rows = []
    for i, ki in enumerate(grid.ki_axis):
        for j, kp in enumerate(grid.kp_axis):
            rows.append((kp, ki, grid.abscissa[i, j], bool(grid.real_dominant[i, j])))
    write_csv(path, ["kp", "ki", "abscissa", "real_dominant"], rows)


def grid_to_json_dict(grid: GainGrid) -> dict:
    return {
        "kp_axis": grid.kp_axis,
        "ki_axis": grid.ki_axis,
        "abscissa": grid.abscissa,
        "real_dominant": grid.real_dominant,
    }
