"""File formats: field CSV, contour/surface/schedule JSON, trajectory CSV, SVG.

Every float is written with 17 significant digits so values round-trip
bit-exactly.  Writers go through a temporary file and an atomic rename.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .bspline import BSplineSurface, KnotVector, SurfaceData
from .inversion import CorrectionSchedule, DriftTrajectory
from .levelset import Contour, ParameterGrid, ScalarField


class FormatError(ValueError):
    pass


def fmt(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise FormatError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def dumps(obj, indent: int | None = 1) -> str:
    """JSON with 17-significant-digit floats and stable key order."""

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return fmt(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            o = o.tolist()
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{" + ",".join(items) + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, level) for v in o) + "]"
            return "[" + ",".join(f"{pad}{enc(v, level + 1)}" for v in o) + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# field CSV

_GRID_KEYS = ("a_min", "a_max", "b_min", "b_max", "n_a", "n_b")


def field_to_csv(field: ScalarField, extra: dict | None = None) -> str:
    g = field.grid
    out = io.StringIO()
    meta = {k: getattr(g, k) for k in _GRID_KEYS}
    meta["s"] = field.s
    meta.update(extra or {})
    for k, v in meta.items():
        out.write(f"# {k}={v if isinstance(v, (int, str)) else fmt(v)}\n")
    out.write("a,b,value\n")
    a, b = g.a, g.b
    for i in range(g.n_a):
        for j in range(g.n_b):
            out.write(f"{fmt(a[i])},{fmt(b[j])},{fmt(field.values[i, j])}\n")
    return out.getvalue()


def _split_preamble(text: str):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    return meta, body


def field_from_csv(text: str) -> tuple[ScalarField, dict]:
    meta, body = _split_preamble(text)
    try:
        grid = ParameterGrid(
            float(meta["a_min"]), float(meta["a_max"]), float(meta["b_min"]), float(meta["b_max"]),
            int(meta["n_a"]), int(meta["n_b"]),
        )
        s = float(meta.get("s", 0.0))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad field preamble: {exc}") from exc
    rows = list(csv.reader(body))
    if not rows or [h.strip() for h in rows[0]] != ["a", "b", "value"]:
        raise FormatError("field CSV must have header a,b,value")
    data = rows[1:]
    if len(data) != grid.n_a * grid.n_b:
        raise FormatError(f"expected {grid.n_a * grid.n_b} rows, got {len(data)}")
    try:
        arr = np.array([[float(x) for x in r] for r in data])
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    if arr.shape[1] != 3:
        raise FormatError("each row needs three columns")
    values = arr[:, 2].reshape(grid.n_a, grid.n_b)
    a = arr[:, 0].reshape(grid.n_a, grid.n_b)
    b = arr[:, 1].reshape(grid.n_a, grid.n_b)
    if not (np.allclose(a[:, 0], grid.a, rtol=0, atol=1e-12 * grid.h_a) and np.allclose(b[0], grid.b, rtol=0, atol=1e-12 * grid.h_b)):
        raise FormatError("row coordinates do not match the grid preamble (expected row-major in a, then b)")
    return ScalarField(grid, s, values), meta


def field_to_surface_data(field: ScalarField) -> SurfaceData:
    g = field.grid
    A, B = np.meshgrid(g.a, g.b, indexing="ij")
    return SurfaceData(np.stack([A, B, field.values], axis=-1))


# contours

def contours_to_dict(contours: list[Contour], s: float, c: float) -> dict:
    return {
        "s": float(s),
        "c": float(c),
        "contours": [{"closed": bool(cn.closed), "points": [[float(x), float(y)] for x, y in cn.points]} for cn in contours],
    }


def contours_from_dict(obj: dict) -> list[Contour]:
    s, c = float(obj["s"]), float(obj["c"])
    return [Contour(s, c, np.array(cn["points"], dtype=float).reshape(-1, 2), bool(cn["closed"])) for cn in obj["contours"]]


# surfaces

def surface_to_dict(surface: BSplineSurface) -> dict:
    return {
        "degree_u": surface.degree_u,
        "degree_v": surface.degree_v,
        "knots_u": surface.knots_u.knots.tolist(),
        "knots_v": surface.knots_v.knots.tolist(),
        "shape": list(surface.control_net.shape[:2]),
        "control_net": surface.control_net.reshape(-1, 3).tolist(),
    }


def surface_from_dict(obj: dict) -> BSplineSurface:
    try:
        p, q = int(obj["degree_u"]), int(obj["degree_v"])
        ku, kv = KnotVector(p, obj["knots_u"]), KnotVector(q, obj["knots_v"])
        net = np.array(obj["control_net"], dtype=float).reshape(ku.n_control, kv.n_control, 3)
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"bad surface JSON: {exc}") from exc
    return BSplineSurface(p, q, ku, kv, net)


# trajectories and schedules

def trajectory_from_csv(text: str) -> DriftTrajectory:
    _, body = _split_preamble(text)
    reader = csv.DictReader(body)
    if reader.fieldnames is None or not {"s", "omega", "epsilon"} <= {f.strip() for f in reader.fieldnames}:
        raise FormatError("trajectory CSV needs columns s, omega, epsilon")
    try:
        rows = [(float(r["s"]), float(r["omega"]), float(r["epsilon"])) for r in reader]
    except (TypeError, ValueError) as exc:
        raise FormatError(str(exc)) from exc
    return DriftTrajectory(np.array(rows))


def trajectory_to_csv(traj: DriftTrajectory) -> str:
    lines = ["s,omega,epsilon"] + [",".join(fmt(x) for x in row) for row in traj.samples]
    return "\n".join(lines) + "\n"


def schedule_to_dict(schedule: CorrectionSchedule) -> dict:
    entries = []
    for e in schedule.entries:
        entry = {"s": e.s, "omega": e.omega, "epsilon": e.epsilon, "b": e.b,
                 "achieved_d": e.achieved_d, "residual": e.residual, "status": e.status}
        if e.message:
            entry["message"] = e.message
        entries.append(entry)
    return {"d_target": schedule.d_target, "entries": entries}


# SVG

def contours_svg(contours: list[Contour], bounds, size: int = 480, title: str = "") -> str:
    """Static plot of contour polylines inside the box ``(x_min, x_max, y_min, y_max)``."""
    x0, x1, y0, y1 = map(float, bounds)
    margin = 20
    inner = size - 2 * margin

    def px(x, y):
        return (margin + (x - x0) / (x1 - x0) * inner, margin + (y1 - y) / (y1 - y0) * inner)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    lines.append(f'<rect x="{margin}" y="{margin}" width="{inner}" height="{inner}" fill="none" stroke="#888"/>')
    levels = sorted({(cn.s, cn.c) for cn in contours})
    for cn in contours:
        color = palette[levels.index((cn.s, cn.c)) % len(palette)]
        pts = " ".join("{:.4f},{:.4f}".format(*px(x, y)) for x, y in cn.points)
        tag = "polygon" if cn.closed else "polyline"
        lines.append(f'<{tag} points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def wireframe_svg(points: np.ndarray, size: int = 480, title: str = "") -> str:
    """Oblique projection of an ``(m, n, 3)`` point lattice as grid lines."""
    pts = np.asarray(points, dtype=float)
    proj = np.stack([pts[..., 0] + 0.5 * pts[..., 1], pts[..., 2] + 0.35 * pts[..., 1]], axis=-1)
    lo, hi = proj.reshape(-1, 2).min(axis=0), proj.reshape(-1, 2).max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    margin = 20
    scaled = margin + (proj - lo) / span * (size - 2 * margin)
    scaled[..., 1] = size - scaled[..., 1]
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    for row in list(scaled) + list(scaled.transpose(1, 0, 2)):
        pts_s = " ".join(f"{x:.4f},{y:.4f}" for x, y in row)
        lines.append(f'<polyline points="{pts_s}" fill="none" stroke="#333" stroke-width="0.8"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
