"""Semi-discrete closed-loop model of the PI + integrator-with-delay loop.

The dead time L is split into M segments of length h = L/M.  The state vector
is ``x[k] = [e[k], u[k], u[k-1], ..., u[k-M]]`` (dimension M+2); the integral
state is never stored, it is eliminated through ``K_I*s[k] = u[k] - K_P*e[k]``.

Two update stencils are provided:

* ``order=2`` (default): trapezoidal error update over the delayed control
  samples plus a higher-order correction on the integral channel,

      e[k+1] = e[k] - (h*K/2) * (u[k-M] + u[k-M+1])
      u[k+1] = K_P*e[k+1] + (u[k] - K_P*e[k])
               + K_I*(h/2)*(e[k] + e[k+1])
               - K_I*(K*h^2/12)*(u[k-M+1] - u[k-M])

* ``order=1``: forward-Euler error update with the single delayed sample and
  a left-rectangle integral,

      e[k+1] = e[k] - h*K*u[k-M]
      u[k+1] = u[k] + K_I*h*e[k] - K_P*h*K*u[k-M]
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PiGains, PlantParams

__all__ = [
    "SemiDiscreteModel",
    "SimulationTrace",
    "EigensolverError",
    "build_model",
    "eigenvalues",
    "dominant_discrete_poles",
    "simulate",
    "trace_to_csv",
    "oscillation_count",
    "decay_slope",
    "TRACKING",
    "DISTURBANCE",
]

TRACKING = "tracking"
DISTURBANCE = "disturbance"

DEFAULT_SEGMENTS = 20


class EigensolverError(RuntimeError):
    """Dense eigensolve did not converge or produced residuals above tolerance."""


@dataclass(frozen=True, eq=False)
class SemiDiscreteModel:
    """Transition matrix x[k+1] = A x[k] with its discretization metadata."""

    matrix: np.ndarray
    step: float
    segments: int
    order: int

    @property
    def dimension(self) -> int:
        return self.segments + 2


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Sampled closed-loop response: times, error channel, control channel."""

    times: np.ndarray
    error: np.ndarray
    control: np.ndarray
    scenario: str

    def __post_init__(self) -> None:
        if not (len(self.times) == len(self.error) == len(self.control)):
            raise ValueError("times, error, and control must have equal length")


def build_model(
    plant: PlantParams,
    gains: PiGains,
    segments: int = DEFAULT_SEGMENTS,
    order: int = 2,
) -> SemiDiscreteModel:
    """Assemble the (M+2)x(M+2) transition matrix for the closed loop.

    Parameters
    ----------
    segments : int
        Number of delay segments M; must be >= 2 so that u[k-M+1] and u[k]
        are distinct buffer slots.
    order : int
        Accuracy order of the update stencil, 1 or 2.
    """
    if segments < 2:
        raise ValueError(f"segments must be at least 2 (two delayed samples are needed), got {segments}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")

    K, L = plant.gain, plant.delay
    kp, ki = gains.kp, gains.ki
    M = int(segments)
    h = L / M
    n = M + 2
    col_new = M      # u[k-M+1]
    col_old = M + 1  # u[k-M]

    A = np.zeros((n, n))
    A[0, 0] = 1.0
    A[1, 0] = ki * h
    A[1, 1] = 1.0
    if order == 2:
        A[0, col_new] = -h * K / 2.0
        A[0, col_old] = -h * K / 2.0
        # u-row after substituting the error update and eliminating s[k]
        a = K * kp * h / 2.0 + K * ki * h * h / 4.0
        b = K * ki * h * h / 12.0
        A[1, col_new] = -a - b
        A[1, col_old] = -a + b
    else:
        A[0, col_old] = -h * K
        A[1, col_old] = -K * kp * h
    for j in range(1, M + 1):
        A[1 + j, j] = 1.0  # delay buffer shift
    return SemiDiscreteModel(matrix=A, step=h, segments=M, order=order)


def eigenvalues(model: SemiDiscreteModel, residual_tol: float = 1e-8) -> np.ndarray:
    """All M+2 eigenvalues of the transition matrix.

    Every eigenpair is verified against ``|A v - lambda v| / |v| < residual_tol``;
    a failed solve or residual breach raises :class:`EigensolverError` rather
    than silently truncating the spectrum.
    """
    A = model.matrix
    try:
        lams, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigensolver failed on {A.shape[0]}x{A.shape[0]} matrix: {exc}") from exc
    if not np.all(np.isfinite(lams.view(float))):
        raise EigensolverError("eigensolver returned non-finite eigenvalues")
    resid = A @ vecs - vecs * lams[None, :]
    rel = np.linalg.norm(resid, axis=0) / np.linalg.norm(vecs, axis=0)
    worst = float(np.max(rel))
    if worst > residual_tol:
        raise EigensolverError(f"eigenpair residual {worst:.2e} exceeds {residual_tol:.1e}")
    return lams


def dominant_discrete_poles(model: SemiDiscreteModel, count: int) -> np.ndarray:
    """The ``count`` largest-modulus eigenvalues, modulus-descending.

    Conjugate pairs are never split: if the cut would separate a pair the
    slice is extended, so the result may hold count+1 values.
    """
    n = model.dimension
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    lams = eigenvalues(model)
    order = np.lexsort((-lams.imag, -lams.real, -np.abs(lams)))
    lams = lams[order]
    k = count
    scale = max(1.0, float(np.abs(lams[0])))
    while k < n:
        head = lams[:k]
        missing = False
        for lam in head:
            if abs(lam.imag) > 1e-12 * scale:
                if np.min(np.abs(head - np.conj(lam))) > 1e-9 * scale:
                    missing = True
                    break
        if not missing:
            break
        k += 1
    return lams[:k]


def simulate(
    model: SemiDiscreteModel,
    plant: PlantParams,
    gains: PiGains,
    scenario: str,
    horizon: float,
    disturbance: float = 1.0,
) -> SimulationTrace:
    """Step-response simulation by iterating x[k+1] = A x[k].

    Scenarios set the initial state only; the recurrence is autonomous:

    * ``"tracking"``: unit reference step, x[0] = [1, K_P, 0, ..., 0].
    * ``"disturbance"``: constant load D at the controller output folded into
      a shifted integral state, x[0] = [0, D, 0, ..., 0].

    The trace covers floor(horizon/h) steps; the error channel is state
    component 0 and the control channel (the plant input) is component 1.
    """
    if scenario not in (TRACKING, DISTURBANCE):
        raise ValueError(f"scenario must be '{TRACKING}' or '{DISTURBANCE}', got {scenario!r}")
    h = model.step
    if horizon < h:
        raise ValueError(f"horizon {horizon} is shorter than one step h={h}")
    steps = int(math.floor(horizon / h))
    n = model.dimension
    x = np.zeros(n)
    if scenario == TRACKING:
        x[0] = 1.0
        x[1] = gains.kp
    else:
        x[1] = disturbance
    A = model.matrix
    err = np.empty(steps + 1)
    ctl = np.empty(steps + 1)
    err[0], ctl[0] = x[0], x[1]
    for k in range(steps):
        x = A @ x
        err[k + 1], ctl[k + 1] = x[0], x[1]
    times = np.arange(steps + 1) * h
    return SimulationTrace(times=times, error=err, control=ctl, scenario=scenario)


def trace_to_csv(trace: SimulationTrace, path) -> None:
    from .serialize import write_csv

    write_csv(path, ["t", "e", "u"], zip(trace.times, trace.error, trace.control))


def oscillation_count(trace: SimulationTrace, threshold: float = 0.01) -> int:
    """Zero crossings of the error after its first peak.

    Samples inside the +-threshold settle band are ignored so that the
    exponentially small ringing of a settled loop does not count.  A response
    is treated as non-oscillatory when this count is at most 2.
    """
    e = trace.error
    start = int(np.argmax(np.abs(e)))
    sig = e[start:]
    sig = sig[np.abs(sig) > threshold]
    if sig.size < 2:
        return 0
    return int(np.sum(np.signbit(sig[1:]) != np.signbit(sig[:-1])))


def decay_slope(trace: SimulationTrace, tail_fraction: float = 0.5) -> float:
    """Asymptotic exponential rate of the response, per unit time.

    Fits log of the (e, u) envelope over the trace tail using the local maxima
    of hypot(e, u), which removes the ripple of oscillatory modes.  For a
    stable loop this estimates the real part of the slowest pole.
    """
    r = np.hypot(trace.error, trace.control)
    n = len(r)
    start = int(n * (1.0 - tail_fraction))
    t = trace.times[start:]
    r = r[start:]
    keep = r > 1e-280
    t, r = t[keep], r[keep]
    if len(r) < 4:
        raise ValueError("trace tail too short for a slope fit")
    interior = (r[1:-1] >= r[:-2]) & (r[1:-1] >= r[2:])
    idx = np.flatnonzero(interior) + 1
    if len(idx) >= 4:
        t, r = t[idx], r[idx]
    slope, _ = np.polyfit(t, np.log(r), 1)
    return float(slope)
