"""Rational delay approximations and model-accuracy error maps.

Diagonal Pade approximants replace ``e^(-Ls)`` with a rational function that
is all-pass on the imaginary axis, turning the closed loop into a polynomial
whose roots approximate the dominant poles.  The error maps compare, per gain
pair, each approximation's dominant-root real part against the Newton-refined
continuous value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import PiGains, PlantParams
from .semidiscrete import DEFAULT_SEGMENTS, EigensolverError, build_model, eigenvalues
from .spectral import NewtonConvergenceError, dominant_poles

__all__ = [
    "RationalDelay",
    "ErrorMap",
    "pade_coeffs",
    "pade_closed_loop_poles",
    "model_error_map",
    "error_map_to_csv",
    "METHOD_SEMI_DISCRETE",
    "METHOD_FIRST_ORDER",
    "METHOD_PADE_2",
    "METHOD_PADE_3",
    "ALL_METHODS",
]

METHOD_SEMI_DISCRETE = "semi-discrete"
METHOD_FIRST_ORDER = "first-order"
METHOD_PADE_2 = "pade-2"
METHOD_PADE_3 = "pade-3"
ALL_METHODS = (METHOD_SEMI_DISCRETE, METHOD_FIRST_ORDER, METHOD_PADE_2, METHOD_PADE_3)

UNSTABLE_SENTINEL = "unstable"


@dataclass(frozen=True)
class RationalDelay:
    """Diagonal Pade approximant of e^(-Ls); coefficients in ascending powers."""

    order: int
    numerator: tuple[float, ...]
    denominator: tuple[float, ...]

    def evaluate(self, s):
        num = np.polynomial.polynomial.polyval(s, self.numerator)
        den = np.polynomial.polynomial.polyval(s, self.denominator)
        return num / den


def pade_coeffs(order: int, delay: float) -> RationalDelay:
    """Diagonal [n/n] Pade coefficients of e^(-delay*s) for n = 2 or 3."""
    if delay <= 0:
        raise ValueError(f"delay must be positive, got {delay}")
    L = float(delay)
    if order == 2:
        num = (1.0, -L / 2.0, L * L / 12.0)
        den = (1.0, L / 2.0, L * L / 12.0)
    elif order == 3:
        num = (1.0, -L / 2.0, L * L / 10.0, -(L ** 3) / 120.0)
        den = (1.0, L / 2.0, L * L / 10.0, (L ** 3) / 120.0)
    else:
        raise ValueError(f"order must be 2 or 3, got {order}")
    return RationalDelay(order=order, numerator=num, denominator=den)


def pade_closed_loop_poles(plant: PlantParams, gains: PiGains, order: int) -> np.ndarray:
    """Roots of ``s^2*den(s) + K*(K_P*s + K_I)*num(s)``, real part descending.

    The polynomial has degree 2 + order; roots come from the companion-matrix
    eigenvalues.
    """
    rd = pade_coeffs(order, plant.delay)
    num_desc = np.array(rd.numerator[::-1])
    den_desc = np.array(rd.denominator[::-1])
    poly = np.polyadd(np.polymul(den_desc, [1.0, 0.0, 0.0]), plant.gain * np.polymul(num_desc, [gains.kp, gains.ki]))
    try:
        roots = np.roots(poly)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"companion-matrix eigensolve failed: {exc}") from exc
    order_idx = np.lexsort((-roots.imag, -roots.real))
    return roots[order_idx]


@dataclass(frozen=True, eq=False)
class ErrorMap:
    """Per-method |Re(dominant)| errors over a gain lattice.

    ``errors[method][i, j]`` belongs to (kp_axis[j], ki_axis[i]); cells inside
    ``unstable`` are masked (NaN in the arrays, the "unstable" sentinel in the
    CSV), and NaN outside the mask marks a per-cell solver failure.
    """

    kp_axis: np.ndarray
    ki_axis: np.ndarray
    methods: tuple[str, ...]
    errors: dict[str, np.ndarray]
    unstable: np.ndarray


def _log_mapped_dominant(plant: PlantParams, gains: PiGains, segments: int, order: int) -> float:
    model = build_model(plant, gains, segments, order=order)
    rho = float(np.max(np.abs(eigenvalues(model))))
    if rho == 0.0:
        raise EigensolverError("zero spectral radius")
    return math.log(rho) / model.step


def model_error_map(
    plant: PlantParams,
    kp_axis,
    ki_axis,
    methods: tuple[str, ...] = ALL_METHODS,
    segments: int = DEFAULT_SEGMENTS,
    workers: int = 1,
) -> ErrorMap:
    """Dominant-pole real-part error of each approximation over a gain lattice.

    The reference at every cell is the abscissa of the Newton-refined pole
    set.  Cells with a non-negative reference abscissa are masked unstable,
    matching the convention of showing accuracy only where the loop is stable.
    """
    kp_axis = np.asarray(kp_axis, dtype=float)
    ki_axis = np.asarray(ki_axis, dtype=float)
    if kp_axis.size == 0 or ki_axis.size == 0 or np.any(kp_axis <= 0) or np.any(ki_axis <= 0):
        raise ValueError("axes must be nonempty and positive")
    for m in methods:
        if m not in ALL_METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {ALL_METHODS}")

    cells = [(i, j) for i in range(ki_axis.size) for j in range(kp_axis.size)]

    def cell(idx):
        i, j = idx
        g = PiGains(kp_axis[j], ki_axis[i])
        try:
            ref = dominant_poles(plant, g, segments).abscissa
        except (NewtonConvergenceError, EigensolverError):
            return (math.nan,) * len(methods) + (False,)
        if ref >= 0.0:
            return (math.nan,) * len(methods) + (True,)
        out = []
        for m in methods:
            try:
                if m == METHOD_SEMI_DISCRETE:
                    approx = _log_mapped_dominant(plant, g, segments, order=2)
                elif m == METHOD_FIRST_ORDER:
                    approx = _log_mapped_dominant(plant, g, segments, order=1)
                else:
                    order = 2 if m == METHOD_PADE_2 else 3
                    approx = float(pade_closed_loop_poles(plant, g, order)[0].real)
                out.append(abs(ref - approx))
            except (NewtonConvergenceError, EigensolverError):
                out.append(math.nan)
        return tuple(out) + (False,)

    if workers <= 1:
        results = [cell(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(cell, cells))

    shape = (ki_axis.size, kp_axis.size)
    errors = {m: np.full(shape, math.nan) for m in methods}
    unstable = np.zeros(shape, dtype=bool)
    for (i, j), row in zip(cells, results):
        for k, m in enumerate(methods):
            errors[m][i, j] = row[k]
        unstable[i, j] = row[-1]
    return ErrorMap(kp_axis=kp_axis, ki_axis=ki_axis, methods=tuple(methods), errors=errors, unstable=unstable)


def error_map_to_csv(emap: ErrorMap, path) -> None:
    from .serialize import write_csv

    rows = []
    for m in emap.methods:
        arr = emap.errors[m]
        for i, ki in enumerate(emap.ki_axis):
            for j, kp in enumerate(emap.kp_axis):
                value = UNSTABLE_SENTINEL if emap.unstable[i, j] else arr[i, j]
                rows.append((kp, ki, m, value))
    write_csv(path, ["kp", "ki", "method", "delta_max"], rows)
