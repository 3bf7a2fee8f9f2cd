"""Perturbative dipole model for a harmonic oscillator with anharmonic control.

The system Hamiltonian is ``p^2/2m + m w^2 x^2 / 2``; the control adds
``eps m w^2 x^2 / 2 + b x``.  The quadratic control shifts the frequency to
``w' = w sqrt(1 + eps)`` and the linear term enters the 0 -> 1 dipole element
through a first-order correction factor.

The correction term ``b^2 d0 / Delta^2`` is evaluated literally (``d0`` to the
first power).  Its consequences are measured against the exact
diagonalization in :mod:`evolevel.spectral`, not patched here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

TAIL_TOLERANCE = 1e-12
N_MAX_CAP = 512


class TruncationWarning(UserWarning):
    """Boltzmann weight beyond the level cutoff exceeds the tolerance."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0
    mass: float = 1.0
    k_boltzmann: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "k_boltzmann"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


UNIT = PhysicalConstants()


@dataclass(frozen=True)
class OscillatorPoint:
    """One point ``(omega, epsilon, b)`` of Hamiltonian parameter space."""

    omega: float
    epsilon: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega!r}")
        if not 1.0 + self.epsilon > 0:
            raise ValueError(f"1 + epsilon must be > 0, got epsilon={self.epsilon!r}")


@dataclass(frozen=True)
class PerturbationBreakdown:
    omega_prime: float
    delta: float
    d01_unperturbed: float
    correction_numerator: float
    normalization_N: float
    d01: float


@dataclass(frozen=True)
class ThermalSpec:
    """Temperature and level cutoff; ``n_max=None`` picks the cutoff from the tail weight."""

    temperature: float
    n_max: int | None = None

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature!r}")
        if self.n_max is not None and self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max!r}")


def effective_frequency(point: OscillatorPoint) -> float:
    if not 1.0 + point.epsilon > 0:
        raise ValueError(f"1 + epsilon must be > 0, got epsilon={point.epsilon!r}")
    return point.omega * math.sqrt(1.0 + point.epsilon)


def baseline_dipole(omega: float, consts: PhysicalConstants = UNIT) -> float:
    """Unperturbed ``<1|x|0> = sqrt(hbar / (2 m omega))``."""
    if not omega > 0:
        raise ValueError(f"omega must be > 0, got {omega!r}")
    return math.sqrt(consts.hbar / (2.0 * consts.mass * omega))


def energy_gap(point: OscillatorPoint, consts: PhysicalConstants = UNIT) -> float:
    return consts.hbar * effective_frequency(point)


def evo_d01(point: OscillatorPoint, consts: PhysicalConstants = UNIT) -> PerturbationBreakdown:
    """First-order dipole element ``<1|x|0>`` with all intermediates.

    ``d01 = (1 - t) d0 (1 + eps) / N`` with ``t = b^2 d0 / Delta^2`` and
    ``N = 1 + t``, where ``d0`` is the unperturbed element at ``omega`` and
    ``Delta = hbar omega'``.
    """
    omega_prime = effective_frequency(point)
    delta = consts.hbar * omega_prime
    d0 = baseline_dipole(point.omega, consts)
    t = point.b**2 * d0 / delta**2
    numerator = 1.0 - t
    norm = 1.0 + t
    d01 = numerator * d0 * (1.0 + point.epsilon) / norm
    return PerturbationBreakdown(omega_prime, delta, d0, numerator, norm, d01)


def _level_cutoff(x: float) -> int:
    # smallest n with exp(-n x) (1 - exp(-x)) < TAIL_TOLERANCE
    if x <= 0:
        return N_MAX_CAP
    n = math.ceil((-math.log(TAIL_TOLERANCE) + math.log1p(-math.exp(-x))) / x)
    return int(min(max(n, 2), N_MAX_CAP))


def boltzmann_weights(energies, kT: float) -> np.ndarray:
    """Normalized ``exp(-E_n/kT) / Z``, shifted by the ground energy to avoid underflow."""
    e = np.asarray(energies, dtype=float)
    w = np.exp(-(e - e[0]) / kT)
    return w / w.sum()


def thermal_evo(point: OscillatorPoint, thermal: ThermalSpec, consts: PhysicalConstants = UNIT) -> float:
    """Boltzmann-averaged ladder dipole ``sum_n d_{n,n+1} exp(-E_n/kT) / Z``.

    Levels ``n = 0 .. n_max`` enter the partition function; transition terms
    run over ``n = 0 .. n_max - 1``.  Each ladder element at ``omega'``
    carries the same ``(1 - t_n)/(1 + t_n)`` correction as the 0 -> 1 model,
    with ``t_n = b^2 d_{n,n+1} / Delta^2``.
    """
    omega_prime = effective_frequency(point)
    kT = consts.k_boltzmann * thermal.temperature
    delta = consts.hbar * omega_prime
    n_max = thermal.n_max if thermal.n_max is not None else _level_cutoff(delta / kT)

    n = np.arange(n_max + 1)
    energies = delta * (n + 0.5)
    weights = boltzmann_weights(energies, kT)
    if weights[-1] > TAIL_TOLERANCE:
        warnings.warn(
            f"tail weight {weights[-1]:.3g} at n_max={n_max} exceeds {TAIL_TOLERANCE:g}",
            TruncationWarning,
            stacklevel=2,
        )

    ladder = np.sqrt(consts.hbar * (n[:-1] + 1) / (2.0 * consts.mass * omega_prime))
    t = point.b**2 * ladder / delta**2
    elements = ladder * (1.0 - t) / (1.0 + t)
    return float(np.dot(elements, weights[:-1]))
