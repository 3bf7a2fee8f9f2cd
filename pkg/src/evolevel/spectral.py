"""Exact dipole elements by diagonalizing the full Hamiltonian in a truncated basis.

The Hamiltonian ``p^2/2m + m w^2 (1 + eps) x^2 / 2 + b x`` is written in the
ladder basis of a reference oscillator of frequency ``omega_ref``.  Matrix
elements of ``x`` and ``x^2`` are the analytic ladder values, so truncation
only affects which states are representable, not the operator algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oscillator import UNIT, OscillatorPoint, PhysicalConstants, ThermalSpec, boltzmann_weights

CONVERGENCE_TOL = 1e-10
OFFDIAG_TOL = 1e-12
MAX_BASIS = 512


class NotSymmetricError(ValueError):
    pass


@dataclass(frozen=True)
class BasisSpec:
    """Basis size and ladder frequency; ``omega_ref=None`` means use the system omega."""

    n_basis: int = 40
    omega_ref: float | None = None

    def __post_init__(self):
        if self.n_basis < 4:
            raise ValueError(f"n_basis must be >= 4, got {self.n_basis}")
        if self.n_basis > MAX_BASIS:
            raise ValueError(f"n_basis must be <= {MAX_BASIS}, got {self.n_basis}")
        if self.omega_ref is not None and not self.omega_ref > 0:
            raise ValueError(f"omega_ref must be > 0, got {self.omega_ref!r}")

    def doubled(self) -> "BasisSpec":
        return BasisSpec(min(2 * self.n_basis, MAX_BASIS), self.omega_ref)


@dataclass(frozen=True)
class SpectralResult:
    energies: np.ndarray
    d01_exact: float
    converged: bool
    change_on_doubling: float = 0.0


def position_matrix(n_basis: int, omega_ref: float, consts: PhysicalConstants = UNIT) -> np.ndarray:
    """``x`` in the ladder basis: ``<n|x|n+1> = sqrt(hbar (n+1) / (2 m omega_ref))``."""
    off = np.sqrt(consts.hbar * np.arange(1, n_basis) / (2.0 * consts.mass * omega_ref))
    return np.diag(off, 1) + np.diag(off, -1)


def _position_squared(n_basis: int, omega_ref: float, consts: PhysicalConstants) -> np.ndarray:
    n = np.arange(n_basis)
    scale = consts.hbar / (2.0 * consts.mass * omega_ref)
    off2 = scale * np.sqrt((n[:-2] + 1.0) * (n[:-2] + 2.0))
    return np.diag(scale * (2 * n + 1.0)) + np.diag(off2, 2) + np.diag(off2, -2)


def build_hamiltonian_matrix(
    point: OscillatorPoint, basis: BasisSpec, consts: PhysicalConstants = UNIT
) -> np.ndarray:
    w_ref = basis.omega_ref if basis.omega_ref is not None else point.omega
    n = basis.n_basis
    h = np.diag(consts.hbar * w_ref * (np.arange(n) + 0.5))
    # reference oscillator already carries m w_ref^2 x^2 / 2
    k_extra = consts.mass * (point.omega**2 * (1.0 + point.epsilon) - w_ref**2)
    if k_extra != 0.0:
        h = h + 0.5 * k_extra * _position_squared(n, w_ref, consts)
    if point.b != 0.0:
        h = h + point.b * position_matrix(n, w_ref, consts)
    return h


def jacobi_eigh(a: np.ndarray, tol: float = OFFDIAG_TOL, max_sweeps: int = 100):
    """Cyclic Jacobi rotations; returns ascending eigenvalues and column eigenvectors."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    # work at unit scale so squared entries neither underflow nor overflow
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    if amax == 0.0:
        return np.zeros(n), v
    a /= amax
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(a) * amax
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def diagonalize(matrix, method: str = "eigh"):
    """Eigenpairs of a real symmetric matrix, eigenvalues ascending.

    ``method`` is ``"eigh"`` (LAPACK) or ``"jacobi"``.  Either way the rotated
    matrix ``V^T A V`` must be diagonal to ``1e-12`` of the matrix norm.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {a.shape}")
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    scale = amax * np.linalg.norm(a / amax) if amax > 0 else 0.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-14 * max(scale, 1.0)):
        raise NotSymmetricError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    if method == "eigh":
        w, v = np.linalg.eigh(a)
    elif method == "jacobi":
        w, v = jacobi_eigh(a)
    else:
        raise ValueError(f"unknown method {method!r}")
    rotated = v.T @ a @ v
    residual = np.max(np.abs(rotated - np.diag(np.diag(rotated)))) if a.size > 1 else 0.0
    if residual >= OFFDIAG_TOL * max(scale, np.finfo(float).tiny):
        raise RuntimeError(f"off-diagonal residual {residual:.3g} above tolerance")
    return w, v


def _transition_elements(point, basis, consts, count):
    w_ref = basis.omega_ref if basis.omega_ref is not None else point.omega
    h = build_hamiltonian_matrix(point, basis, consts)
    energies, vecs = diagonalize(h)
    x = position_matrix(basis.n_basis, w_ref, consts)
    lo = vecs[:, :count]
    hi = vecs[:, 1 : count + 1]
    elements = np.abs(np.einsum("in,ij,jn->n", hi, x, lo))
    return energies, elements


def exact_d01(point: OscillatorPoint, basis: BasisSpec = BasisSpec(), consts: PhysicalConstants = UNIT) -> SpectralResult:
    """``|<psi_1|x|psi_0>|`` for the two lowest eigenstates, with a basis-doubling check."""
    energies, el = _transition_elements(point, basis, consts, 1)
    _, el2 = _transition_elements(point, basis.doubled(), consts, 1)
    change = abs(el2[0] - el[0])
    return SpectralResult(energies, float(el[0]), bool(change < CONVERGENCE_TOL), float(change))


def exact_thermal(
    point: OscillatorPoint,
    thermal: ThermalSpec,
    basis: BasisSpec,
    consts: PhysicalConstants = UNIT,
) -> float:
    """Boltzmann average of exact ``|<psi_{n+1}|x|psi_n>|`` over the lowest levels.

    Uses the same level bookkeeping as :func:`evolevel.oscillator.thermal_evo`:
    ``n_max + 1`` levels in the partition function, ``n_max`` transitions.
    """
    if thermal.n_max is None:
        raise ValueError("exact_thermal needs an explicit n_max")
    if not thermal.n_max < basis.n_basis / 2:
        raise ValueError(f"n_max={thermal.n_max} must be < n_basis/2={basis.n_basis / 2}")
    kT = consts.k_boltzmann * thermal.temperature
    energies, elements = _transition_elements(point, basis, consts, thermal.n_max)
    weights = boltzmann_weights(energies[: thermal.n_max + 1], kT)
    return float(np.dot(elements, weights[:-1]))
