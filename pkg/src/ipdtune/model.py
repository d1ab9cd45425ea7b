"""Plant, controller, and characteristic-function primitives shared by all analyses.

The plant is an integrating process with input dead time, ``(K/s)e^(-Ls)``,
under unity feedback with a PI controller ``K_P + K_I/s``.  Everything else in
the package is built on the closed-loop characteristic function defined here.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PlantParams",
    "PiGains",
    "ComplexPole",
    "NORMALIZED_PLANT",
    "char_fn",
    "char_fn_derivative",
    "scale_gains_to_plant",
]


@dataclass(frozen=True)
class PlantParams:
    """Integrating-plus-dead-time process parameters.

    Attributes
    ----------
    gain : float
        Process gain K (output rate per unit input), strictly positive.
    delay : float
        Dead time L in seconds, strictly positive.
    """

    gain: float
    delay: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gain) and self.gain > 0.0):
            raise ValueError(f"process gain must be finite and positive, got {self.gain}")
        if not (math.isfinite(self.delay) and self.delay > 0.0):
            raise ValueError(f"dead time must be finite and positive, got {self.delay}")


@dataclass(frozen=True)
class PiGains:
    """Proportional/integral gain pair.

    Stability is deliberately not an invariant: unstable pairs are legal
    inputs to every analysis routine.
    """

    kp: float
    ki: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kp) and math.isfinite(self.ki)):
            raise ValueError(f"gains must be finite, got ({self.kp}, {self.ki})")


@dataclass(frozen=True)
class ComplexPole:
    """A closed-loop pole location, re + j*im (1/s and rad/s)."""

    re: float
    im: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError(f"pole components must be finite, got ({self.re}, {self.im})")

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexPole":
        return cls(float(z.real), float(z.imag))

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)


NORMALIZED_PLANT = PlantParams(gain=1.0, delay=1.0)


def char_fn(s, plant: PlantParams, gains: PiGains):
    """Closed-loop characteristic function ``s^2 + K*(K_P*s + K_I)*e^(-L*s)``.

    Accepts a complex scalar or an ndarray of complex values and returns the
    matching type.  Total over the whole complex plane.
    """
    K, L = plant.gain, plant.delay
    if isinstance(s, np.ndarray):
        return s * s + K * (gains.kp * s + gains.ki) * np.exp(-L * s)
    z = complex(s)
    return z * z + K * (gains.kp * z + gains.ki) * cmath.exp(-L * z)


def char_fn_derivative(s, plant: PlantParams, gains: PiGains):
    """Analytic derivative of :func:`char_fn` with respect to s."""
    K, L = plant.gain, plant.delay
    if isinstance(s, np.ndarray):
        return 2.0 * s + K * np.exp(-L * s) * (gains.kp - L * (gains.kp * s + gains.ki))
    z = complex(s)
    return 2.0 * z + K * cmath.exp(-L * z) * (gains.kp - L * (gains.kp * z + gains.ki))


def scale_gains_to_plant(norm_gains: PiGains, plant: PlantParams) -> PiGains:
    """Map gains tuned on the normalized plant (K=1, L=1) to a physical plant.

    The time/gain scaling is exact: kp -> kp/(K*L), ki -> ki/(K*L^2), and it
    maps every closed-loop pole s to s/L, so stability and relative damping
    are preserved.
    """
    K, L = plant.gain, plant.delay
    return PiGains(norm_gains.kp / (K * L), norm_gains.ki / (K * L * L))
