"""Find the control parameter that holds the dipole EVO at a target value.

Direct inversion brackets the root of ``d01(omega, eps, b) - d_target`` and
polishes it with Brent's method.  Surface inversion works from a fitted
B-spline surface ``(x, b, d)`` instead of the closed form, which is what one
would do with measured data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bspline import (
    BSplineSurface,
    ParametrizationMethod,
    SurfaceData,
    eval_lattice,
    eval_surface,
    fit_surface,
)
from .levelset import ParameterGrid, ScalarField, refine_contour
from .oscillator import UNIT, OscillatorPoint, PhysicalConstants, evo_d01

RESIDUAL_TOL = 1e-10
XTOL = 1e-12
SCAN_SUBDIVISIONS = 64

# default sampling box for the control surface
OMEGA_RANGE = (0.3, 1.0)
EPSILON_RANGE = (0.0, 1.0)
B_RANGE = (0.0, 1.0)


class NoRootError(ValueError):
    def __init__(self, message, signs=None):
        super().__init__(message)
        self.signs = signs


class UnreachableTargetError(ValueError):
    pass


def _d01(omega, epsilon, b, consts):
    return evo_d01(OscillatorPoint(omega, epsilon, b), consts).d01


def _sign_label(x):
    return "+" if x > 0 else "-" if x < 0 else "0"


def _bracketed_roots(f, lo, hi, subdivisions=SCAN_SUBDIVISIONS):
    """Roots of ``f`` located by a uniform sign-change scan, each polished by Brent."""
    xs = np.linspace(lo, hi, subdivisions + 1)
    fs = np.array([f(x) for x in xs])
    roots = []
    for k in range(subdivisions):
        if fs[k] == 0.0:
            roots.append(float(xs[k]))
        elif fs[k] * fs[k + 1] < 0:
            roots.append(brentq(f, xs[k], xs[k + 1], xtol=XTOL, rtol=4 * np.finfo(float).eps, maxiter=500))
    if fs[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots, fs


def _no_root(name, lo, hi, fs):
    signs = (_sign_label(fs[0]), _sign_label(fs[-1]))
    return NoRootError(
        f"no {name} root in [{lo:.17g}, {hi:.17g}]: d - d_target has signs {signs[0]}/{signs[1]} at the ends",
        signs,
    )


def _check_residual(value, residual, name):
    if not abs(residual) < RESIDUAL_TOL:
        raise ArithmeticError(f"{name}={value!r} leaves residual {residual:.3g} above {RESIDUAL_TOL:g}")


def solve_b(omega: float, epsilon: float, d_target: float, bracket=B_RANGE, consts: PhysicalConstants = UNIT) -> float:
    """Nonnegative ``b`` with ``d01(omega, epsilon, b) = d_target``.

    The model is even in ``b``, so the bracket is folded onto ``b >= 0``.
    """
    lo, hi = sorted(map(float, bracket))
    if lo < 0 < hi:
        lo, hi = 0.0, max(-lo, hi)
    elif hi <= 0:
        lo, hi = -hi, -lo
    if lo == hi:
        raise ValueError("empty bracket")

    def f(b):
        return _d01(omega, epsilon, b, consts) - d_target

    roots, fs = _bracketed_roots(f, lo, hi)
    if not roots:
        raise _no_root("b", lo, hi, fs)
    b = roots[0]
    _check_residual(b, f(b), "b")
    return b


@dataclass(frozen=True)
class EpsilonRoot:
    epsilon: float
    n_roots: int


def solve_epsilon(omega: float, b: float, d_target: float, bracket=EPSILON_RANGE, consts: PhysicalConstants = UNIT) -> EpsilonRoot:
    """Smallest ``epsilon`` in the bracket reaching ``d_target``; ``n_roots`` counts all found."""
    lo, hi = sorted(map(float, bracket))
    if not 1.0 + lo > 0:
        raise ValueError(f"bracket [{lo}, {hi}] violates 1 + epsilon > 0")

    def f(eps):
        return _d01(omega, eps, b, consts) - d_target

    roots, fs = _bracketed_roots(f, lo, hi)
    if not roots:
        raise _no_root("epsilon", lo, hi, fs)
    eps = roots[0]
    _check_residual(eps, f(eps), "epsilon")
    return EpsilonRoot(eps, len(roots))


@dataclass(frozen=True)
class InversionRequest:
    """Two of ``omega, epsilon, b`` known; solve for ``unknown``."""

    known: dict
    unknown: str
    d_target: float
    bracket: tuple[float, float]

    def __post_init__(self):
        names = {"omega", "epsilon", "b"}
        if self.unknown not in ("epsilon", "b"):
            raise ValueError(f"can only solve for 'epsilon' or 'b', got {self.unknown!r}")
        if set(self.known) != names - {self.unknown}:
            raise ValueError(f"known must be {sorted(names - {self.unknown})}, got {sorted(self.known)}")
        if self.unknown == "epsilon" and not 1.0 + min(self.bracket) > 0:
            raise ValueError("epsilon bracket violates 1 + epsilon > 0")


def solve(request: InversionRequest, consts: PhysicalConstants = UNIT) -> float:
    k = request.known
    if request.unknown == "b":
        return solve_b(k["omega"], k["epsilon"], request.d_target, request.bracket, consts)
    return solve_epsilon(k["omega"], k["b"], request.d_target, request.bracket, consts).epsilon


@dataclass(frozen=True, eq=False)
class DriftTrajectory:
    """Rows of ``(s, omega, epsilon)`` with strictly increasing ``s``."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if arr.size == 0:
            raise ValueError("trajectory is empty")
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"expected rows of (s, omega, epsilon), got shape {arr.shape}")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ValueError("s must be strictly increasing")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class CorrectionEntry:
    s: float
    omega: float
    epsilon: float
    b: float | None
    achieved_d: float | None
    residual: float | None
    status: str = "ok"
    message: str = ""


@dataclass
class CorrectionSchedule:
    d_target: float
    entries: list[CorrectionEntry] = field(default_factory=list)

    @property
    def failures(self) -> list[CorrectionEntry]:
        return [e for e in self.entries if e.status != "ok"]


def correction_schedule(
    trajectory: DriftTrajectory, d_target: float, bracket=B_RANGE, consts: PhysicalConstants = UNIT
) -> CorrectionSchedule:
    """Solve for ``b`` at each trajectory sample.

    Each solve first tries a bracket of the same width centred on the
    previous solution and falls back to the full bracket.  Failures are
    recorded per entry; processing continues.
    """
    lo, hi = sorted(map(float, bracket))
    width = hi - lo
    schedule = CorrectionSchedule(d_target)
    prev = None
    for s, omega, epsilon in trajectory.samples:
        s, omega, epsilon = float(s), float(omega), float(epsilon)
        try:
            b = None
            if prev is not None:
                try:
                    b = solve_b(omega, epsilon, d_target, (max(prev - width / 2, 0.0), prev + width / 2), consts)
                except NoRootError:
                    b = None
            if b is None:
                b = solve_b(omega, epsilon, d_target, (lo, hi), consts)
        except (NoRootError, ArithmeticError, ValueError) as exc:
            status = "unreachable" if isinstance(exc, NoRootError) else "failed"
            schedule.entries.append(CorrectionEntry(s, omega, epsilon, None, None, None, status, str(exc)))
            continue
        achieved = _d01(omega, epsilon, b, consts)
        schedule.entries.append(CorrectionEntry(s, omega, epsilon, b, achieved, abs(achieved - d_target)))
        prev = b
    return schedule


def evo_surface_data(
    axis: str = "omega",
    fixed: float = 0.0,
    x_range=None,
    b_range=B_RANGE,
    n: int = 9,
    consts: PhysicalConstants = UNIT,
) -> SurfaceData:
    """``n x n`` samples ``(x, b, d01)`` with ``x`` = omega (epsilon fixed) or epsilon (omega fixed)."""
    if axis not in ("omega", "epsilon"):
        raise ValueError(f"axis must be 'omega' or 'epsilon', got {axis!r}")
    if x_range is None:
        x_range = OMEGA_RANGE if axis == "omega" else EPSILON_RANGE
    xs = np.linspace(*x_range, n)
    bs = np.linspace(*b_range, n)
    pts = np.empty((n, n, 3))
    for i, x in enumerate(xs):
        for j, b in enumerate(bs):
            omega, epsilon = (x, fixed) if axis == "omega" else (fixed, x)
            pts[i, j] = (x, b, _d01(omega, epsilon, b, consts))
    return SurfaceData(pts)


def fit_evo_surface(axis="omega", fixed=0.0, x_range=None, b_range=B_RANGE, n=9, p=3, q=3,
                    method=ParametrizationMethod.EQUIDISTANT, consts=UNIT) -> BSplineSurface:
    return fit_surface(evo_surface_data(axis, fixed, x_range, b_range, n, consts), p, q, method)


@dataclass(frozen=True)
class SurfaceInversion:
    b: float
    uv: tuple[float, float]
    lattice_b: float
    lattice_gap: float
    polished: bool


def _polish(surface, uv, x_fixed, d_target, tol=1e-13, max_iter=30):
    # Newton on (u, v) for x(u, v) = x_fixed, z(u, v) = d_target
    u, v = uv
    h = 1e-7
    for _ in range(max_iter):
        r = eval_surface(surface, u, v)
        g = np.array([r[0] - x_fixed, r[2] - d_target])
        if np.max(np.abs(g)) < tol:
            return (u, v), True
        du = 1 if u + h <= 1 else -1
        dv = 1 if v + h <= 1 else -1
        ru = (eval_surface(surface, u + du * h, v) - r) / (du * h)
        rv = (eval_surface(surface, u, v + dv * h) - r) / (dv * h)
        jac = np.array([[ru[0], rv[0]], [ru[2], rv[2]]])
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            return (u, v), False
        u = min(max(u + step[0], 0.0), 1.0)
        v = min(max(v + step[1], 0.0), 1.0)
    r = eval_surface(surface, u, v)
    ok = max(abs(r[0] - x_fixed), abs(r[2] - d_target)) < 1e-9
    return (u, v), ok


def invert_via_surface(surface: BSplineSurface, x_fixed: float, d_target: float, resolution: int = 128) -> SurfaceInversion:
    """Read ``b`` off the fitted surface where ``x = x_fixed`` and ``d = d_target``.

    The surface is sliced at height ``d_target`` on a parameter lattice; the
    slice polyline is interpolated at ``x_fixed`` to get a first estimate,
    which is then refined by Newton iteration on the surface itself.  The
    result carries both values; their gap measures the slicing error.
    """
    ts = np.linspace(0.0, 1.0, resolution)
    lattice = eval_lattice(surface, ts, ts)
    grid = ParameterGrid(0.0, 1.0, 0.0, 1.0, resolution, resolution)
    contours = refine_contour(ScalarField(grid, 0.0, lattice[:, :, 2]), d_target)
    if not contours:
        raise UnreachableTargetError(f"surface never reaches d={d_target!r}")

    candidates = []
    for contour in contours:
        uv = contour.points
        if contour.closed:
            uv = np.vstack([uv, uv[:1]])
        xyz = np.array([eval_surface(surface, *np.clip(p, 0, 1)) for p in uv])
        x = xyz[:, 0] - x_fixed
        for k in range(len(uv) - 1):
            if x[k] == 0 or x[k] * x[k + 1] < 0:
                t = 0.0 if x[k] == 0 else x[k] / (x[k] - x[k + 1])
                b = xyz[k, 1] + t * (xyz[k + 1, 1] - xyz[k, 1])
                candidates.append((b, tuple(uv[k] + t * (uv[k + 1] - uv[k]))))
        if x[-1] == 0:
            candidates.append((xyz[-1, 1], tuple(uv[-1])))
    if not candidates:
        raise UnreachableTargetError(f"level d={d_target!r} does not cross x={x_fixed!r} on the surface")

    lattice_b, uv0 = min(candidates, key=lambda c: (c[0], c[1]))
    uv, ok = _polish(surface, uv0, x_fixed, d_target)
    b = float(eval_surface(surface, *uv)[1]) if ok else float(lattice_b)
    return SurfaceInversion(b, (float(uv[0]), float(uv[1])), float(lattice_b), abs(b - lattice_b), ok)


def surface_cross_validation(surface, axis, fixed, queries, consts=UNIT) -> float:
    """Max ``|b_surface - b_direct|`` over ``(x, b_true)`` query pairs."""
    worst = 0.0
    for x, b_true in queries:
        omega, epsilon = (x, fixed) if axis == "omega" else (fixed, x)
        d = _d01(omega, epsilon, b_true, consts)
        direct = solve_b(omega, epsilon, d, B_RANGE, consts)
        via = invert_via_surface(surface, x, d).b
        worst = max(worst, abs(via - direct))
    return worst
