"""Classical tuning rules and integral-performance-index optimization.

Ziegler-Nichols and SIMC give closed-form PI gains for the integrating
process with dead time.  The IAE/ITAE route minimizes a weighted sum of
tracking and disturbance integral errors with the same differential-evolution
setup as the spectral tuner, using the semi-discrete simulation as the
objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PiGains, PlantParams, scale_gains_to_plant
from .semidiscrete import SimulationTrace, build_model, simulate
from .tuner import INFEASIBLE_COST, DeConfig, InfeasibleError, _de_minimize

__all__ = [
    "TuningResult",
    "ziegler_nichols",
    "simc",
    "simc_gains",
    "classical_rules",
    "integral_error",
    "integral_index_tune",
    "gain_trajectory",
    "trajectory_to_csv",
    "SIMC_CONSERVATIVE",
    "SIMC_AGGRESSIVE",
]

SIMC_CONSERVATIVE = "conservative"
SIMC_AGGRESSIVE = "aggressive"

# Closed-loop time constants backed out of the published rule variants:
# conservative tau_c = 2.5*L, aggressive tau_c = 0.05*L.
_SIMC_TAU_FACTORS = {SIMC_CONSERVATIVE: 2.5, SIMC_AGGRESSIVE: 0.05}

INDEX_IAE = "iae"
INDEX_ITAE = "itae"

PERF_SEGMENTS = 50
PERF_HORIZON_FACTOR = 50.0


@dataclass(frozen=True)
class TuningResult:
    """A named tuning method together with the gains it produced."""

    method: str
    gains: PiGains
    alpha: float | None = None


def ziegler_nichols(plant: PlantParams) -> PiGains:
    """Ultimate-sensitivity PI rule.

    For this plant class the ultimate gain and period are exact:
    K_u = pi/(2*L*K), P_u = 4*L; the PI settings are K_P = 0.45*K_u,
    T_i = P_u/1.2.
    """
    K, L = plant.gain, plant.delay
    ku = math.pi / (2.0 * L * K)
    pu = 4.0 * L
    kp = 0.45 * ku
    ti = pu / 1.2
    return PiGains(kp, kp / ti)


def simc_gains(plant: PlantParams, tau_c: float) -> PiGains:
    """SIMC PI rule for an integrating process with dead time.

    K_P = 1/(K*(tau_c + L)), T_i = 4*(tau_c + L).
    """
    if tau_c <= 0:
        raise ValueError(f"tau_c must be positive, got {tau_c}")
    K, L = plant.gain, plant.delay
    kp = 1.0 / (K * (tau_c + L))
    ti = 4.0 * (tau_c + L)
    return PiGains(kp, kp / ti)


def simc(plant: PlantParams, variant: str = SIMC_CONSERVATIVE) -> PiGains:
    """SIMC rule with the conservative (tau_c=2.5L) or aggressive (0.05L) choice."""
    try:
        factor = _SIMC_TAU_FACTORS[variant]
    except KeyError:
        raise ValueError(f"variant must be one of {sorted(_SIMC_TAU_FACTORS)}, got {variant!r}") from None
    return simc_gains(plant, factor * plant.delay)


def classical_rules(plant: PlantParams) -> list[TuningResult]:
    """Ziegler-Nichols and both SIMC variants for the given plant."""
    return [
        TuningResult("ziegler-nichols", ziegler_nichols(plant)),
        TuningResult("simc-conservative", simc(plant, SIMC_CONSERVATIVE)),
        TuningResult("simc-aggressive", simc(plant, SIMC_AGGRESSIVE)),
    ]


def integral_error(trace: SimulationTrace, index: str) -> float:
    """IAE or ITAE of a simulated trace: sum |e[k]|*h, optionally t-weighted."""
    if index not in (INDEX_IAE, INDEX_ITAE):
        raise ValueError(f"index must be '{INDEX_IAE}' or '{INDEX_ITAE}', got {index!r}")
    h = float(trace.times[1] - trace.times[0]) if len(trace.times) > 1 else 0.0
    ae = np.abs(trace.error)
    if index == INDEX_IAE:
        return float(np.sum(ae) * h)
    return float(np.sum(trace.times * ae) * h)


def _batched_weighted_costs(
    kp: np.ndarray,
    ki: np.ndarray,
    index: str,
    alpha: float,
    segments: int,
    horizon: float,
    disturbance: float,
) -> np.ndarray:
    """Weighted tracking/disturbance integral errors for a candidate batch.

    Runs the normalized order-2 recurrence directly (ring buffer instead of a
    matrix product) for all candidates and both scenarios at once.  Candidates
    whose error fails to settle below its initial scale, or that overflow, get
    ``INFEASIBLE_COST``.  Agrees with trace-based integral_error to roundoff.
    """
    n = kp.size
    M = int(segments)
    h = 1.0 / M
    steps = int(math.floor(horizon / h))
    kp2 = np.concatenate([kp, kp])
    ki2 = np.concatenate([ki, ki])
    c_err = h / 2.0
    a = kp2 * h / 2.0 + ki2 * h * h / 4.0
    b = ki2 * h * h / 12.0
    kih = ki2 * h

    e = np.concatenate([np.ones(n), np.zeros(n)])
    buf = np.zeros((M + 1, 2 * n))
    buf[0] = np.concatenate([kp, np.full(n, disturbance)])
    iae = np.abs(e).copy()
    itae = np.zeros(2 * n)
    tail_peak = np.zeros(2 * n)
    tail_start = int(0.8 * steps)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            u_old = buf[(k + 1) % (M + 1)]
            u_new = buf[(k + 2) % (M + 1)]
            pair = u_old + u_new
            e_next = e - c_err * pair
            buf[(k + 1) % (M + 1)] = buf[k % (M + 1)] + kih * e - a * pair - b * (u_new - u_old)
            e = e_next
            ae = np.abs(e)
            iae += ae
            itae += ((k + 1) * h) * ae
            if k >= tail_start:
                np.maximum(tail_peak, ae, out=tail_peak)
    metric = (iae if index == INDEX_IAE else itae) * h
    settled_scale = np.concatenate([np.ones(n), np.full(n, max(1.0, abs(disturbance)))])
    bad = ~np.isfinite(metric) | (tail_peak > settled_scale)
    metric = np.where(bad, INFEASIBLE_COST, metric)
    cost = alpha * metric[:n] + (1.0 - alpha) * metric[n:]
    return np.where(np.isfinite(cost), np.minimum(cost, INFEASIBLE_COST), INFEASIBLE_COST)


def _integral_tune_normalized(
    index: str,
    alpha: float,
    segments: int,
    horizon: float,
    disturbance: float,
    config: DeConfig,
    init_center: np.ndarray | None = None,
) -> tuple[PiGains, float]:
    def batch(X: np.ndarray) -> np.ndarray:
        return _batched_weighted_costs(X[:, 0], X[:, 1], index, alpha, segments, horizon, disturbance)

    x, cost = _de_minimize(config, batch_cost_fn=batch, init_center=init_center)
    if cost >= INFEASIBLE_COST:
        raise InfeasibleError("no stabilizing gains in bounds")
    return PiGains(float(x[0]), float(x[1])), cost


def integral_index_tune(
    plant: PlantParams,
    index: str,
    alpha: float,
    segments: int = PERF_SEGMENTS,
    horizon: float | None = None,
    disturbance: float = 1.0,
    config: DeConfig | None = None,
) -> PiGains:
    """Minimize ``alpha*I_track + (1-alpha)*I_dist`` over the PI gains.

    ``index`` selects IAE or ITAE; both integrals come from the semi-discrete
    step responses (unit reference step and constant input disturbance).  The
    search uses the same differential-evolution setup as the spectral tuner
    and runs on the normalized plant, scaling the result to ``plant``.
    """
    if index not in (INDEX_IAE, INDEX_ITAE):
        raise ValueError(f"index must be '{INDEX_IAE}' or '{INDEX_ITAE}', got {index!r}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    cfg = config if config is not None else DeConfig()
    horizon_norm = PERF_HORIZON_FACTOR if horizon is None else horizon / plant.delay
    norm_gains, _ = _integral_tune_normalized(index, alpha, segments, horizon_norm, disturbance, cfg)
    return scale_gains_to_plant(norm_gains, plant)


def gain_trajectory(
    plant: PlantParams,
    index: str,
    alpha_values,
    segments: int = PERF_SEGMENTS,
    horizon: float | None = None,
    disturbance: float = 1.0,
    config: DeConfig | None = None,
) -> list[tuple[float, PiGains | None]]:
    """Optimal gains along a sweep of the tracking/disturbance weight.

    Each point warm-starts the search from the previous optimum (the initial
    population is centered there).  A failed point is recorded as None and
    the sweep continues.
    """
    cfg = config if config is not None else DeConfig()
    horizon_norm = PERF_HORIZON_FACTOR if horizon is None else horizon / plant.delay
    points: list[tuple[float, PiGains | None]] = []
    center: np.ndarray | None = None
    for alpha in alpha_values:
        alpha = float(alpha)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha values must be in [0, 1], got {alpha}")
        try:
            norm_gains, _ = _integral_tune_normalized(
                index, alpha, segments, horizon_norm, disturbance, cfg, init_center=center
            )
        except InfeasibleError:
            points.append((alpha, None))
            continue
        center = np.array([norm_gains.kp, norm_gains.ki])
        points.append((alpha, scale_gains_to_plant(norm_gains, plant)))
    return points


def trajectory_to_csv(points: list[tuple[float, PiGains | None]], path) -> None:
    from .serialize import write_csv

    rows = []
    for alpha, gains in points:
        if gains is None:
            rows.append((alpha, math.nan, math.nan))
        else:
            rows.append((alpha, gains.kp, gains.ki))
    write_csv(path, ["alpha", "kp", "ki"], rows)


def performance_trace(
    plant: PlantParams,
    gains: PiGains,
    scenario: str,
    segments: int = PERF_SEGMENTS,
    horizon: float | None = None,
    disturbance: float = 1.0,
) -> SimulationTrace:
    """Convenience wrapper: build the order-2 model and simulate one scenario."""
    hz = PERF_HORIZON_FACTOR * plant.delay if horizon is None else horizon
    model = build_model(plant, gains, segments, order=2)
    return simulate(model, plant, gains, scenario, hz, disturbance=disturbance)
