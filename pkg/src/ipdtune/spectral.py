"""Continuous-time dominant poles: eigenvalue mapping plus Newton refinement.

Pipeline: the dominant eigenvalues of the semi-discrete model are mapped back
to the s-plane through ``s = ln(lambda)/h`` and then polished on the exact
transcendental characteristic function until the residual is below 1e-12.

Refinement of successive seeds is deflated against the roots already found
(Maehly's trick: subtract sum 1/(s - r_j) from the Newton correction).  Near
the spectral optimum the three dominant roots nearly coalesce and undeflated
iterations all fall into the same root, which silently drops the dominant
member and under-reports the abscissa; deflation keeps the cluster resolved.
Only upper-half-plane seeds are refined and conjugates are emitted exactly,
so pole sets are conjugate-closed by construction.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .model import ComplexPole, PiGains, PlantParams, char_fn, char_fn_derivative
from .semidiscrete import DEFAULT_SEGMENTS, build_model, dominant_discrete_poles

__all__ = [
    "PoleSet",
    "NewtonConvergenceError",
    "map_to_continuous",
    "newton_refine",
    "dominant_poles",
    "spectral_abscissa",
    "root_chain",
]

NEWTON_TOL = 1e-12
POLE_RESIDUAL_TOL = 1e-10
REAL_SNAP_TOL = 1e-6
DEDUP_TOL = 1e-6
MAX_NEWTON_ITER = 100
SEED_COUNT = 3


class NewtonConvergenceError(RuntimeError):
    """Newton refinement failed; carries the best iterate seen and its residual."""

    def __init__(self, message: str, best: complex, residual: float, iterations: int):
        super().__init__(f"{message} (best iterate {best:.6g}, residual {residual:.3e}, {iterations} iterations)")
        self.best = best
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class PoleSet:
    """Refined dominant poles, sorted by real part descending, conjugate-closed."""

    poles: tuple[ComplexPole, ...]
    abscissa: float
    dominant_is_real: bool


def map_to_continuous(lam: complex, step: float) -> ComplexPole:
    """Map a discrete eigenvalue to an s-plane estimate via ln(lambda)/h.

    Uses the principal branch, so |Im| <= pi/h.  lambda = 0 is rejected: it is
    a mode with infinite decay, not a pole estimate.
    """
    z = complex(lam)
    if z == 0:
        raise ValueError("cannot map a zero eigenvalue to a pole estimate")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    return ComplexPole.from_complex(cmath.log(z) / step)


def _refine(
    seed: complex,
    plant: PlantParams,
    gains: PiGains,
    deflate: tuple[complex, ...] = (),
    tol: float = NEWTON_TOL,
    max_iter: int = MAX_NEWTON_ITER,
) -> complex:
    """Damped Newton iteration on char_fn, optionally deflated against known roots.

    Steps are halved (up to 20 times) whenever the objective does not
    decrease; the objective is |char_fn| itself when no deflation is active
    and |char_fn / prod(s - r_j)| otherwise.
    """

    def objective(z: complex, fz: complex) -> float:
        m = abs(fz)
        for r in deflate:
            d = abs(z - r)
            if d == 0.0:
                return math.inf
            m /= d
        return m

    s = complex(seed)
    f = char_fn(s, plant, gains)
    best = (abs(f), s)
    g = objective(s, f)
    for it in range(max_iter):
        if abs(f) < tol:
            return s
        fp = char_fn_derivative(s, plant, gains)
        if f == 0:
            return s
        corr = fp / f
        for r in deflate:
            d = s - r
            if d == 0:
                raise NewtonConvergenceError("iterate collided with a deflated root", best[1], best[0], it)
            corr -= 1.0 / d
        if corr == 0:
            raise NewtonConvergenceError("stationary point of the deflated iteration", best[1], best[0], it)
        step = 1.0 / corr
        accepted = False
        scale = 1.0
        for _ in range(20):
            s_new = s - scale * step
            f_new = char_fn(s_new, plant, gains)
            if abs(f_new) < tol:
                return s_new
            g_new = objective(s_new, f_new)
            if g_new < g:
                s, f, g = s_new, f_new, g_new
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            raise NewtonConvergenceError("step halving stalled", best[1], best[0], it)
        if abs(f) < best[0]:
            best = (abs(f), s)
        if not (math.isfinite(s.real) and math.isfinite(s.imag)) or abs(s) > 1e9:
            raise NewtonConvergenceError("iterate diverged", best[1], best[0], it)
    raise NewtonConvergenceError("no convergence", best[1], best[0], max_iter)


def _snap_to_real(s: complex, plant: PlantParams, gains: PiGains, tol: float) -> complex:
    """Snap a near-real root onto the axis, keeping the residual below tol.

    The snapped point is re-polished with real Newton steps; if the residual
    cannot be recovered the original complex root is kept (it already
    satisfies the tolerance).
    """
    if s.imag == 0.0 or abs(s.imag) >= REAL_SNAP_TOL:
        return s
    x = s.real
    for _ in range(10):
        f = char_fn(complex(x, 0.0), plant, gains)
        if abs(f) < tol:
            return complex(x, 0.0)
        fp = char_fn_derivative(complex(x, 0.0), plant, gains)
        if fp == 0:
            break
        x = x - (f / fp).real
    return s


def newton_refine(
    seed,
    plant: PlantParams,
    gains: PiGains,
    tol: float = NEWTON_TOL,
    max_iter: int = MAX_NEWTON_ITER,
) -> ComplexPole:
    """Refine a single pole estimate to |char_fn(s)| < tol.

    ``seed`` may be a :class:`ComplexPole` or anything convertible to complex.
    Roots with |Im| < 1e-6 are snapped to the real axis.  Non-convergence
    raises :class:`NewtonConvergenceError` carrying the best iterate.
    """
    z = seed.value if isinstance(seed, ComplexPole) else complex(seed)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"seed must be finite, got {z}")
    root = _refine(z, plant, gains, tol=tol, max_iter=max_iter)
    root = _snap_to_real(root, plant, gains, tol)
    return ComplexPole.from_complex(root)


def dominant_poles(
    plant: PlantParams,
    gains: PiGains,
    segments: int = DEFAULT_SEGMENTS,
) -> PoleSet:
    """Dominant continuous-time poles via the eigenvalue-seeded Newton pipeline.

    Builds the order-2 semi-discrete model, takes the three largest-modulus
    eigenvalues, maps them to the s-plane, and refines them with deflation.
    Refined roots closer than 1e-6 are merged and the set is conjugate-closed.
    Any refinement failure propagates with the offending seed in the message;
    there is no fallback to unrefined estimates.
    """
    model = build_model(plant, gains, segments, order=2)
    h = model.step
    lams = dominant_discrete_poles(model, SEED_COUNT)
    seed_total = len(lams)
    seeds: list[complex] = []
    for lam in lams:
        if lam == 0:  # structurally zero shift mode; not a pole estimate
            continue
        z = map_to_continuous(lam, h).value
        z = complex(z.real, abs(z.imag))  # canonical upper half-plane
        if not any(abs(z - s0) < 1e-12 * max(1.0, abs(z)) for s0 in seeds):
            seeds.append(z)
    if not seeds:
        raise NewtonConvergenceError("no usable eigenvalue seeds", 0.0, math.inf, 0)

    alias_limit = math.pi / h
    found: list[complex] = []
    # A second pass re-runs the seeds deflated against everything found so
    # far; it only matters when distinct seeds collapsed onto one root.
    for _ in range(2):
        for seed in seeds:
            try:
                root = _refine(seed, plant, gains, deflate=tuple(found))
            except NewtonConvergenceError as exc:
                raise NewtonConvergenceError(
                    f"refinement failed for seed {seed:.6g}", exc.best, exc.residual, exc.iterations
                ) from exc
            root = _snap_to_real(root, plant, gains, NEWTON_TOL)
            if abs(root.imag) >= alias_limit:
                raise NewtonConvergenceError(
                    f"root folded across the aliasing band |Im| >= pi/h for seed {seed:.6g}",
                    root,
                    abs(char_fn(root, plant, gains)),
                    0,
                )
            if any(abs(root - r) < DEDUP_TOL for r in found):
                continue
            found.append(root)
            if abs(root.imag) >= REAL_SNAP_TOL:
                found.append(root.conjugate())
        if len(found) >= seed_total:
            break
    return _make_pole_set(found, plant, gains)


def _make_pole_set(roots: list[complex], plant: PlantParams, gains: PiGains) -> PoleSet:
    ordered = sorted(roots, key=lambda z: (-z.real, -z.imag))
    for r in ordered:
        resid = abs(char_fn(r, plant, gains))
        if resid >= POLE_RESIDUAL_TOL:
            raise NewtonConvergenceError("pole residual above tolerance", r, resid, 0)
    abscissa = ordered[0].real
    dominant_is_real = abs(ordered[0].imag) < REAL_SNAP_TOL
    return PoleSet(
        poles=tuple(ComplexPole.from_complex(r) for r in ordered),
        abscissa=float(abscissa),
        dominant_is_real=bool(dominant_is_real),
    )


def spectral_abscissa(
    plant: PlantParams,
    gains: PiGains,
    segments: int = DEFAULT_SEGMENTS,
) -> float:
    """Largest real part over the refined dominant poles."""
    return dominant_poles(plant, gains, segments).abscissa


def root_chain(
    plant: PlantParams,
    gains: PiGains,
    count: int = 7,
    segments: int = DEFAULT_SEGMENTS,
) -> list[ComplexPole]:
    """Upper-half-plane chain of delay-induced roots nearest the imaginary axis.

    Seeds fan out from the abscissa with imaginary parts spaced by the chain
    period 2*pi/L; each refinement is deflated against the roots already so
    the chain members stay distinct.  Returns at most ``count`` roots sorted
    by |Re| ascending.
    """
    J = spectral_abscissa(plant, gains, segments)
    L = plant.delay
    spacing = 2.0 * math.pi / L
    found: list[complex] = []
    for k in range(count):
        seed = complex(J - k * spacing * 0.15, k * spacing)
        try:
            root = _refine(seed, plant, gains, deflate=tuple(found))
        except NewtonConvergenceError:
            continue
        root = _snap_to_real(root, plant, gains, NEWTON_TOL)
        if not any(abs(root - r) < DEDUP_TOL for r in found):
            found.append(root)
    chain = sorted(found, key=lambda z: abs(z.real))[:count]
    return [ComplexPole.from_complex(z) for z in chain]
