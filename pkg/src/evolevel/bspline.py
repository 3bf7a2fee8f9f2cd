"""Tensor-product B-spline interpolation of a rectangular grid of 3-D points.

Parameters come from an equidistant or chord-length rule, knots from the
averaging rule with clamped ends.  Fitting is the usual two-stage scheme:
interpolate every column in ``u``, then every row of the result in ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_banded

from .levelset import Contour, ParameterGrid, ScalarField, refine_contour

SOLVE_RESIDUAL_TOL = 1e-12


class SingularInterpolationError(ArithmeticError):
    pass


class ParametrizationMethod(str, Enum):
    EQUIDISTANT = "equidistant"
    CHORD_LENGTH = "chord_length"


@dataclass(frozen=True, eq=False)
class SurfaceData:
    """``points[i, j]`` is the 3-D data point at the i-th ``u`` and j-th ``v`` parameter."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 3 or pts.shape[2] != 3:
            raise ValueError(f"expected an (m, n, 3) array, got shape {pts.shape}")
        if pts.shape[0] < 2 or pts.shape[1] < 2:
            raise ValueError(f"need at least a 2x2 grid, got {pts.shape[0]}x{pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("data points must be finite")
        if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=2) == 0) or np.any(
            np.linalg.norm(np.diff(pts, axis=1), axis=2) == 0
        ):
            raise ValueError("adjacent data points coincide")
        object.__setattr__(self, "points", pts)

    @property
    def shape(self) -> tuple[int, int]:
        return self.points.shape[:2]

    def diameter(self) -> float:
        flat = self.points.reshape(-1, 3)
        return float(np.linalg.norm(flat.max(axis=0) - flat.min(axis=0)))


@dataclass(frozen=True, eq=False)
class KnotVector:
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        p = self.degree
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        if t.ndim != 1 or t.size < 2 * (p + 1):
            raise ValueError(f"need at least {2 * (p + 1)} knots for degree {p}")
        if np.any(np.diff(t) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(t[: p + 1] != 0.0) or np.any(t[-p - 1 :] != 1.0):
            raise ValueError("knot vector must be clamped to [0, 1]")
        object.__setattr__(self, "knots", t)

    @property
    def n_control(self) -> int:
        return self.knots.size - self.degree - 1

    def __len__(self):
        return self.knots.size


@dataclass(frozen=True, eq=False)
class BSplineSurface:
    degree_u: int
    degree_v: int
    knots_u: KnotVector
    knots_v: KnotVector
    control_net: np.ndarray

    def __post_init__(self):
        net = np.asarray(self.control_net, dtype=float)
        if self.knots_u.degree != self.degree_u or self.knots_v.degree != self.degree_v:
            raise ValueError("knot vector degrees do not match surface degrees")
        expected = (self.knots_u.n_control, self.knots_v.n_control, 3)
        if net.shape != expected:
            raise ValueError(f"control net shape {net.shape} inconsistent with knots {expected}")
        object.__setattr__(self, "control_net", net)


def _chord_params(pts: np.ndarray) -> np.ndarray:
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=-1)
    total = chords.sum(axis=0)
    if np.any(total <= 0):
        raise ValueError("zero total chord length")
    cum = np.concatenate([np.zeros((1,) + chords.shape[1:]), np.cumsum(chords, axis=0)])
    return cum / total


def parametrize(data: SurfaceData, method=ParametrizationMethod.CHORD_LENGTH):
    """Data parameters ``(u, v)``, each strictly increasing from 0 to 1.

    Chord-length parameters are computed per grid line and averaged across
    the other direction.
    """
    method = ParametrizationMethod(method)
    m, n = data.shape
    if method is ParametrizationMethod.EQUIDISTANT:
        return np.linspace(0.0, 1.0, m), np.linspace(0.0, 1.0, n)
    u = _chord_params(data.points).mean(axis=1)
    v = _chord_params(data.points.transpose(1, 0, 2)).mean(axis=1)
    u[0], u[-1], v[0], v[-1] = 0.0, 1.0, 0.0, 1.0
    return u, v


def averaging_knots(params, p: int) -> KnotVector:
    """Clamped knots with interior knot ``t[j+p]`` = mean of ``params[j:j+p]``."""
    u = np.asarray(params, dtype=float)
    if u.size <= p:
        raise ValueError(f"need more than {p} parameters for degree {p}, got {u.size}")
    if np.any(np.diff(u) <= 0) or u[0] < 0 or u[-1] > 1:
        raise ValueError("parameters must be strictly increasing in [0, 1]")
    n = u.size
    interior = [u[j : j + p].mean() for j in range(1, n - p)]
    return KnotVector(p, np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)]))


def _as_array(knots):
    return knots.knots if isinstance(knots, KnotVector) else np.asarray(knots, dtype=float)


def basis(i: int, p: int, u: float, knots) -> float:
    """``N_{i,p}(u)`` by the Cox-de Boor recursion (``0/0 := 0``).

    Spans are half-open ``[t_i, t_{i+1})`` except that ``u`` equal to the last
    knot belongs to the last nonempty span, so the last function is 1 there.
    """
    t = _as_array(knots)
    if not 0 <= i < t.size - p - 1:
        raise IndexError(f"basis index {i} out of range for {t.size} knots and degree {p}")

    def rec(i, p):
        if p == 0:
            if t[i] <= u < t[i + 1]:
                return 1.0
            if u == t[-1] and t[i] < t[i + 1] == t[-1]:
                return 1.0
            return 0.0
        left = right = 0.0
        if t[i + p] != t[i]:
            left = (u - t[i]) / (t[i + p] - t[i]) * rec(i, p - 1)
        if t[i + p + 1] != t[i + 1]:
            right = (t[i + p + 1] - u) / (t[i + p + 1] - t[i + 1]) * rec(i + 1, p - 1)
        return left + right

    return rec(i, p)


def find_span(u: float, knots: KnotVector) -> int:
    """Index ``k`` with ``t[k] <= u < t[k+1]``, clamped to the last nonempty span at ``u = 1``."""
    t = knots.knots
    n = knots.n_control
    if u >= t[n]:
        return n - 1
    if u <= t[knots.degree]:
        return knots.degree
    return int(np.searchsorted(t, u, side="right") - 1)


def basis_funs(span: int, u: float, knots: KnotVector) -> np.ndarray:
    """The ``p + 1`` functions nonzero on ``span``, as polynomials of that span.

    Evaluating outside the span extends that span's polynomial piece.
    """
    t = knots.knots
    p = knots.degree
    out = np.zeros(p + 1)
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    out[0] = 1.0
    for j in range(1, p + 1):
        left[j] = u - t[span + 1 - j]
        right[j] = t[span + j] - u
        saved = 0.0
        for r in range(j):
            tmp = out[r] / (right[r + 1] + left[j - r])
            out[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        out[j] = saved
    return out


def basis_matrix(params, knots: KnotVector) -> np.ndarray:
    """Dense collocation matrix ``B[k, i] = N_{i,p}(params[k])``."""
    params = np.atleast_1d(np.asarray(params, dtype=float))
    p = knots.degree
    out = np.zeros((params.size, knots.n_control))
    for k, u in enumerate(params):
        span = find_span(u, knots)
        out[k, span - p : span + 1] = basis_funs(span, u, knots)
    return out


def _solve_interpolation(a: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(a)
    lower = int(max(rows - cols, default=0))
    upper = int(max(cols - rows, default=0))
    n = a.shape[0]
    ab = np.zeros((lower + upper + 1, n))
    for k in range(-lower, upper + 1):
        diag = np.diagonal(a, k)
        if k >= 0:
            ab[upper - k, k:] = diag
        else:
            ab[upper - k, : n + k] = diag
    try:
        x = solve_banded((lower, upper), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularInterpolationError(str(exc)) from exc
    resid = np.max(np.abs(a @ x - rhs))
    scale = max(np.max(np.abs(rhs)), 1.0)
    if not np.all(np.isfinite(x)) or resid > SOLVE_RESIDUAL_TOL * scale * n:
        raise SingularInterpolationError(f"interpolation residual {resid:.3g} too large")
    return x


def fit_surface(data: SurfaceData, p: int = 3, q: int = 3, method=ParametrizationMethod.CHORD_LENGTH) -> BSplineSurface:
    """Interpolating surface through every data point."""
    m, n = data.shape
    if not m > p:
        raise ValueError(f"need more than {p} points in u for degree {p}, got {m}")
    if not n > q:
        raise ValueError(f"need more than {q} points in v for degree {q}, got {n}")
    u, v = parametrize(data, method)
    ku, kv = averaging_knots(u, p), averaging_knots(v, q)
    au, av = basis_matrix(u, ku), basis_matrix(v, kv)

    stage = _solve_interpolation(au, data.points.reshape(m, n * 3)).reshape(m, n, 3)
    net = _solve_interpolation(av, stage.transpose(1, 0, 2).reshape(n, m * 3))
    net = net.reshape(n, m, 3).transpose(1, 0, 2)
    return BSplineSurface(p, q, ku, kv, net)


def _check_domain(u, v):
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError(f"parameters ({u!r}, {v!r}) outside [0, 1]")


def eval_piece(surface: BSplineSurface, u: float, v: float, span_u: int, span_v: int) -> np.ndarray:
    """Evaluate the polynomial patch of one knot-span pair, even outside that pair."""
    p, q = surface.degree_u, surface.degree_v
    nu = basis_funs(span_u, u, surface.knots_u)
    nv = basis_funs(span_v, v, surface.knots_v)
    patch = surface.control_net[span_u - p : span_u + 1, span_v - q : span_v + 1]
    return np.einsum("i,j,ijk->k", nu, nv, patch)


def eval_surface(surface: BSplineSurface, u: float, v: float) -> np.ndarray:
    """``r(u, v)`` using only the ``(p+1) x (q+1)`` control points with support there."""
    _check_domain(u, v)
    return eval_piece(surface, u, v, find_span(u, surface.knots_u), find_span(v, surface.knots_v))


def eval_lattice(surface: BSplineSurface, us, vs) -> np.ndarray:
    """Surface points on the tensor lattice ``us x vs``, shape ``(len(us), len(vs), 3)``."""
    us = np.asarray(us, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if us.min() < 0 or us.max() > 1 or vs.min() < 0 or vs.max() > 1:
        raise ValueError("lattice parameters outside [0, 1]")
    bu = basis_matrix(us, surface.knots_u)
    bv = basis_matrix(vs, surface.knots_v)
    return np.einsum("ai,ijk,bj->abk", bu, surface.control_net, bv)


def demo_cubic_surface(x, y):
    """Cubic test surface height ``x^3 + y^3 + x^2 y - x y^2``."""
    return x**3 + y**3 + x**2 * y - x * y**2


def surface_slice(surface: BSplineSurface, z_level: float, resolution: int = 128, s: float = 0.0) -> list[Contour]:
    """Contours of ``z(u, v) = z_level`` mapped back to ``(x, y)``.

    The height is sampled on a ``resolution x resolution`` parameter lattice,
    contoured by marching squares in ``(u, v)``, and every vertex is pushed
    through the surface.
    """
    if resolution < 8:
        raise ValueError(f"resolution must be >= 8, got {resolution}")
    ts = np.linspace(0.0, 1.0, resolution)
    pts = eval_lattice(surface, ts, ts)
    grid = ParameterGrid(0.0, 1.0, 0.0, 1.0, resolution, resolution)
    field = ScalarField(grid, s, pts[:, :, 2])
    out = []
    for contour in refine_contour(field, z_level):
        uv = np.clip(contour.points, 0.0, 1.0)
        xy = np.array([eval_surface(surface, u, v)[:2] for u, v in uv])
        out.append(Contour(s, z_level, xy, contour.closed))
    return out
