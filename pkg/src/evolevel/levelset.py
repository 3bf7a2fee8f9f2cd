"""Level sets of a sampled EVO field on a rectangular (a, b) grid.

Three layers:

* :func:`mark_boundary_points` - grid-point level set found by scanning
  inward from the perimeter and marking nodes whose value and a horizontal or
  vertical neighbour straddle the level.
* :func:`refine_contour` - marching squares with inverse linear interpolation
  on cell edges, linked into ordered polylines.
* :func:`normal_velocity` / :func:`advection_residual` - motion of the level
  set across the scale parameter ``s`` under the normal-motion assumption.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GRADIENT_FLOOR = 1e-10
DEGENERATE_NUDGE = 1e-12


class FieldEvaluationError(RuntimeError):
    def __init__(self, a, b, cause):
        super().__init__(f"evaluator failed at (a={a!r}, b={b!r}): {cause}")
        self.a = a
        self.b = b


@dataclass(frozen=True)
class ParameterGrid:
    a_min: float
    a_max: float
    b_min: float
    b_max: float
    n_a: int
    n_b: int

    def __post_init__(self):
        if not self.a_min < self.a_max:
            raise ValueError(f"need a_min < a_max, got {self.a_min}, {self.a_max}")
        if not self.b_min < self.b_max:
            raise ValueError(f"need b_min < b_max, got {self.b_min}, {self.b_max}")
        if self.n_a < 2 or self.n_b < 2:
            raise ValueError(f"need at least 2 points per axis, got {self.n_a}x{self.n_b}")

    @property
    def a(self) -> np.ndarray:
        return np.linspace(self.a_min, self.a_max, self.n_a)

    @property
    def b(self) -> np.ndarray:
        return np.linspace(self.b_min, self.b_max, self.n_b)

    @property
    def h_a(self) -> float:
        return (self.a_max - self.a_min) / (self.n_a - 1)

    @property
    def h_b(self) -> float:
        return (self.b_max - self.b_min) / (self.n_b - 1)

    def contains(self, a, b, slack: float = 1e-12) -> bool:
        ta = slack * (self.a_max - self.a_min)
        tb = slack * (self.b_max - self.b_min)
        return self.a_min - ta <= a <= self.a_max + ta and self.b_min - tb <= b <= self.b_max + tb


@dataclass(frozen=True, eq=False)
class ScalarField:
    """EVO samples ``values[i, j] = theta(a_i, b_j, s)``."""

    grid: ParameterGrid
    s: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_a, self.grid.n_b):
            raise ValueError(f"values shape {values.shape} does not match grid {(self.grid.n_a, self.grid.n_b)}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class Contour:
    s: float
    c: float
    points: np.ndarray
    closed: bool = False

    def __len__(self):
        return len(self.points)

    def segments(self) -> np.ndarray:
        """``(k, 2, 2)`` array of polyline segments, including the closing one."""
        p = self.points
        if self.closed and len(p) > 2:
            p = np.vstack([p, p[:1]])
        return np.stack([p[:-1], p[1:]], axis=1)


@dataclass(frozen=True)
class VelocityEstimate:
    base_point: tuple[float, float]
    normal_speed: float
    normal_direction: tuple[float, float]


@dataclass
class VelocitySet:
    """Velocity estimates plus the vertices that had to be skipped."""

    estimates: list[VelocityEstimate] = field(default_factory=list)
    skipped_flat: int = 0
    skipped_no_hit: int = 0

    def __iter__(self):
        return iter(self.estimates)

    def __len__(self):
        return len(self.estimates)


@dataclass(frozen=True)
class ResidualStats:
    max_abs: float
    mean_abs: float
    count: int


def demo_sinab(a, b, s):
    """``s - sin(ab)``, the scale-dependent demo field."""
    return s - np.sin(a * b)


def demo_circle(a, b, s):
    """``a^2 + b^2 - s``: circles of radius ``sqrt(s)`` at level 0."""
    return a * a + b * b - s


def sample_field(
    evaluator: Callable[[float, float], float],
    grid: ParameterGrid,
    s: float = 0.0,
    threads: int | None = None,
) -> ScalarField:
    """Evaluate ``evaluator(a, b)`` once per grid node.

    With ``threads`` > 1 nodes are evaluated concurrently; the result array
    is filled by index so the output does not depend on scheduling.
    """
    a_vals, b_vals = grid.a, grid.b
    nodes = [(i, j) for i in range(grid.n_a) for j in range(grid.n_b)]

    def one(node):
        i, j = node
        a, b = float(a_vals[i]), float(b_vals[j])
        try:
            value = float(evaluator(a, b))
        except Exception as exc:
            raise FieldEvaluationError(a, b, exc) from exc
        if not math.isfinite(value):
            raise FieldEvaluationError(a, b, f"non-finite value {value!r}")
        return value

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(one, nodes))
    else:
        flat = [one(node) for node in nodes]
    return ScalarField(grid, s, np.array(flat).reshape(grid.n_a, grid.n_b))


def _outer_orientation(values, c) -> int:
    rim = np.concatenate([values[0, :], values[-1, :], values[1:-1, 0], values[1:-1, -1]])
    above = np.count_nonzero(rim >= c)
    return 1 if above * 2 >= rim.size else -1


def mark_boundary_points(field: ScalarField, c: float, orientation: int | None = None) -> set[tuple[int, int]]:
    """Grid-point level set of ``theta = c``.

    The side of the level on which the perimeter mostly lies fixes the
    orientation ``sigma``; with ``w = sigma (theta - c)``, a node is marked
    when ``w >= 0`` there and ``w < 0`` at one of its four neighbours.  Nodes
    are visited breadth-first from the perimeter inward.
    """
    v = field.values
    n_a, n_b = v.shape
    sigma = orientation if orientation is not None else _outer_orientation(v, c)
    w = sigma * (v - c)

    seen = np.zeros(v.shape, dtype=bool)
    queue = deque()
    for i in range(n_a):
        for j in range(n_b):
            if i in (0, n_a - 1) or j in (0, n_b - 1):
                seen[i, j] = True
                queue.append((i, j))

    marked = set()
    while queue:
        i, j = queue.popleft()
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            k, l = i + di, j + dj
            if not (0 <= k < n_a and 0 <= l < n_b):
                continue
            if w[i, j] >= 0 and w[k, l] < 0:
                marked.add((i, j))
            if not seen[k, l]:
                seen[k, l] = True
                queue.append((k, l))
    return marked


def _nudged(values, c):
    v = values.copy()
    v[v == c] += DEGENERATE_NUDGE * abs(c) if c != 0 else DEGENERATE_NUDGE
    return v


def _cell_segments(above, v, c, i, j):
    # corners: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
    # edges:   0:0-1  1:1-2  2:3-2  3:0-3
    corners = (above[i, j], above[i + 1, j], above[i + 1, j + 1], above[i, j + 1])
    edge_ids = (("a", i, j), ("b", i + 1, j), ("a", i, j + 1), ("b", i, j))
    ends = ((0, 1), (1, 2), (3, 2), (0, 3))
    crossing = [k for k, (p, q) in enumerate(ends) if corners[p] != corners[q]]
    if len(crossing) == 2:
        return [(edge_ids[crossing[0]], edge_ids[crossing[1]])]
    if len(crossing) == 4:
        center = 0.25 * (v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1])
        if (center > c) == corners[0]:
            # corners 0 and 2 joined through the centre: isolate 1 and 3
            return [(edge_ids[0], edge_ids[1]), (edge_ids[2], edge_ids[3])]
        return [(edge_ids[0], edge_ids[3]), (edge_ids[1], edge_ids[2])]
    return []


def _edge_vertex(edge, v, a, b, c):
    kind, i, j = edge
    if kind == "a":
        v1, v2 = v[i, j], v[i + 1, j]
        t = (c - v1) / (v2 - v1)
        return (a[i] + t * (a[i + 1] - a[i]), b[j])
    v1, v2 = v[i, j], v[i, j + 1]
    t = (c - v1) / (v2 - v1)
    return (a[i], b[j] + t * (b[j + 1] - b[j]))


def refine_contour(field: ScalarField, c: float) -> list[Contour]:
    """Marching-squares polylines of ``theta = c``.

    Edge crossings require ``(v1 - c)(v2 - c) < 0`` after nodes equal to ``c``
    are nudged upward by ``1e-12 |c|`` (``1e-12`` when ``c == 0``).  Saddle
    cells are split according to the cell-centre average.
    """
    v = _nudged(field.values, c)
    above = v > c
    a, b = field.grid.a, field.grid.b
    n_a, n_b = v.shape

    adjacency: dict[tuple, list[tuple]] = {}
    for i in range(n_a - 1):
        for j in range(n_b - 1):
            for e1, e2 in _cell_segments(above, v, c, i, j):
                adjacency.setdefault(e1, []).append(e2)
                adjacency.setdefault(e2, []).append(e1)
    if not adjacency:
        return []

    vertex = {e: _edge_vertex(e, v, a, b, c) for e in adjacency}
    used = set()
    chains = []

    def walk(start):
        chain = [start]
        used.add(start)
        prev, cur = None, start
        while True:
            nxt = [e for e in adjacency[cur] if e != prev and e not in used]
            if not nxt:
                closed = len(chain) > 2 and start in adjacency[cur] and prev is not None
                return chain, closed
            prev, cur = cur, nxt[0]
            used.add(cur)
            chain.append(cur)

    order = sorted(adjacency)
    for e in order:
        if e not in used and len(adjacency[e]) == 1:
            chains.append(walk(e))
    for e in order:
        if e not in used:
            chains.append(walk(e))

    contours = []
    for chain, closed in chains:
        pts = np.array([vertex[e] for e in chain], dtype=float)
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        if closed and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
            pts = pts[:-1]
        contours.append(Contour(field.s, c, pts, closed))
    return contours


def field_gradient(field: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Nodal gradient: centred differences inside, second-order one-sided at the rim."""
    g = field.grid
    return tuple(np.gradient(field.values, g.a, g.b, edge_order=2))


def interpolate(grid: ParameterGrid, arr: np.ndarray, a: float, b: float) -> float:
    """Bilinear interpolation of a nodal array at ``(a, b)``."""
    fa = (a - grid.a_min) / grid.h_a
    fb = (b - grid.b_min) / grid.h_b
    i = int(min(max(math.floor(fa), 0), grid.n_a - 2))
    j = int(min(max(math.floor(fb), 0), grid.n_b - 2))
    ta, tb = fa - i, fb - j
    return float(
        (1 - ta) * (1 - tb) * arr[i, j]
        + ta * (1 - tb) * arr[i + 1, j]
        + ta * tb * arr[i + 1, j + 1]
        + (1 - ta) * tb * arr[i, j + 1]
    )


def _ray_hit(point, direction, segments):
    # signed distance t along the normal line to the closest segment crossing
    if len(segments) == 0:
        return None
    q0 = segments[:, 0]
    d = segments[:, 1] - q0
    r = q0 - point
    denom = direction[0] * d[:, 1] - direction[1] * d[:, 0]
    ok = np.abs(denom) > 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (r[:, 0] * d[:, 1] - r[:, 1] * d[:, 0]) / denom
        u = (r[:, 0] * direction[1] - r[:, 1] * direction[0]) / denom
    ok &= (u >= -1e-12) & (u <= 1 + 1e-12)
    if not np.any(ok):
        return None
    t = t[ok]
    return float(t[np.argmin(np.abs(t))])


def normal_velocity(
    field_lo: ScalarField,
    contours_lo: list[Contour],
    field_hi: ScalarField,
    contours_hi: list[Contour],
) -> VelocitySet:
    """Normal speed of each vertex of the lower frame.

    The direction is ``-grad(theta)/|grad(theta)|`` at the vertex; the speed
    is the signed distance along that line to the nearest crossing of the
    upper frame's polylines, divided by ``ds``.  A level set that expands
    against ``-grad(theta)`` therefore gets a negative speed.
    """
    if field_lo.grid != field_hi.grid:
        raise ValueError("frames must share a grid")
    ds = field_hi.s - field_lo.s
    if not ds > 0:
        raise ValueError(f"need s_hi > s_lo, got ds={ds!r}")
    if contours_lo and contours_hi and contours_lo[0].c != contours_hi[0].c:
        raise ValueError("frames must share the level c")

    ga, gb = field_gradient(field_lo)
    segments = [cn.segments() for cn in contours_hi if len(cn) > 1]
    segments = np.concatenate(segments) if segments else np.empty((0, 2, 2))

    out = VelocitySet()
    for contour in contours_lo:
        for a, b in contour.points:
            grad = np.array([interpolate(field_lo.grid, ga, a, b), interpolate(field_lo.grid, gb, a, b)])
            norm = math.hypot(*grad)
            if norm < GRADIENT_FLOOR:
                out.skipped_flat += 1
                continue
            direction = -grad / norm
            t = _ray_hit(np.array([a, b]), direction, segments)
            if t is None:
                out.skipped_no_hit += 1
                continue
            out.estimates.append(
                VelocityEstimate((float(a), float(b)), t / ds, (float(direction[0]), float(direction[1])))
            )
    return out


def advection_residual(fields, velocities) -> ResidualStats:
    """``|d theta/ds + u . grad theta|`` at each velocity base point.

    ``fields`` holds the frames at ``s - ds``, ``s`` and ``s + ds``; the
    s-derivative is centred and the spatial gradient comes from the middle
    frame.
    """
    lo, mid, hi = fields
    if not (lo.grid == mid.grid == hi.grid):
        raise ValueError("frames must share a grid")
    ds_lo, ds_hi = mid.s - lo.s, hi.s - mid.s
    if not (ds_lo > 0 and math.isclose(ds_lo, ds_hi, rel_tol=1e-9)):
        raise ValueError("frames must be uniformly spaced in s")
    grid = mid.grid
    dtheta = (hi.values - lo.values) / (hi.s - lo.s)
    ga, gb = field_gradient(mid)

    res = []
    for est in velocities:
        a, b = est.base_point
        ua = est.normal_speed * est.normal_direction[0]
        ub = est.normal_speed * est.normal_direction[1]
        r = interpolate(grid, dtheta, a, b) + ua * interpolate(grid, ga, a, b) + ub * interpolate(grid, gb, a, b)
        res.append(abs(r))
    if not res:
        return ResidualStats(0.0, 0.0, 0)
    res = np.array(res)
    return ResidualStats(float(res.max()), float(res.mean()), len(res))
