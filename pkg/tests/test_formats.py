import json
from functools import partial
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evolevel.bspline import SurfaceData, fit_surface
from evolevel.formats import (
    FormatError,
    atomic_write,
    contours_from_dict,
    contours_svg,
    contours_to_dict,
    dumps,
    field_from_csv,
    field_to_csv,
    field_to_surface_data,
    schedule_to_dict,
    surface_from_dict,
    surface_to_dict,
    trajectory_from_csv,
    trajectory_to_csv,
    wireframe_svg,
)
from evolevel.inversion import DriftTrajectory, correction_schedule
from evolevel.levelset import ParameterGrid, demo_circle, refine_contour, sample_field

SVG = "{http://www.w3.org/2000/svg}"


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_dumps_floats_round_trip(x):
    assert json.loads(dumps([x, {"v": x}]))[1]["v"] == x


def test_dumps_rejects_nan():
    with pytest.raises(FormatError):
        dumps({"x": float("nan")})


def test_field_csv_round_trip_bit_exact():
    grid = ParameterGrid(-1.3, 1.7, -0.9, 1.1, 7, 5)
    field = sample_field(lambda a, b: np.sin(a * b + 0.3) / 3.0, grid, s=0.3)
    text = field_to_csv(field, {"model": "test"})
    back, meta = field_from_csv(text)
    np.testing.assert_array_equal(back.values, field.values)
    assert back.grid == grid and back.s == 0.3 and meta["model"] == "test"
    assert field_to_csv(back, {"model": "test"}) == text


def test_field_csv_rejects_bad_input():
    grid = ParameterGrid(0, 1, 0, 1, 3, 3)
    text = field_to_csv(sample_field(partial(demo_circle, s=0.0), grid))
    with pytest.raises(FormatError):
        field_from_csv(text.replace("# n_a=3", "# n_a=4"))
    with pytest.raises(FormatError):
        field_from_csv(text.replace("a,b,value", "x,y,z"))
    # swapped row order
    head, body = text.split("a,b,value\n")
    rows = body.strip().splitlines()
    with pytest.raises(FormatError):
        field_from_csv(head + "a,b,value\n" + "\n".join(rows[::-1]) + "\n")


def test_field_to_surface_data_layout():
    grid = ParameterGrid(0, 2, 0, 1, 3, 2)
    data = field_to_surface_data(sample_field(partial(demo_circle, s=0.0), grid))
    assert data.shape == (3, 2)
    np.testing.assert_array_equal(data.points[2, 1], [2.0, 1.0, 5.0])


def test_contours_round_trip():
    field = sample_field(partial(demo_circle, s=1.0), ParameterGrid(-2, 2, -2, 2, 21, 21), s=1.0)
    contours = refine_contour(field, 0.0)
    back = contours_from_dict(json.loads(dumps(contours_to_dict(contours, 1.0, 0.0))))
    assert len(back) == len(contours)
    for a, b in zip(contours, back):
        assert a.closed == b.closed
        np.testing.assert_array_equal(a.points, b.points)


def test_surface_json_round_trip_bit_exact():
    rng = np.random.default_rng(3)
    u, v = np.meshgrid(np.linspace(0, 1, 6), np.linspace(0, 1, 5), indexing="ij")
    surf = fit_surface(SurfaceData(np.stack([u, v, rng.normal(size=u.shape)], axis=-1)))
    back = surface_from_dict(json.loads(dumps(surface_to_dict(surf))))
    np.testing.assert_array_equal(back.control_net, surf.control_net)
    np.testing.assert_array_equal(back.knots_u.knots, surf.knots_u.knots)
    with pytest.raises(FormatError):
        surface_from_dict({"degree_u": 3})


def test_trajectory_and_schedule():
    traj = DriftTrajectory([[0.0, 1.0, 0.0], [0.5, 0.95, 0.01]])
    back = trajectory_from_csv(trajectory_to_csv(traj))
    np.testing.assert_array_equal(back.samples, traj.samples)
    with pytest.raises(FormatError):
        trajectory_from_csv("t,w\n1,2\n")
    obj = json.loads(dumps(schedule_to_dict(correction_schedule(traj, 0.7))))
    assert [e["status"] for e in obj["entries"]] == ["ok", "ok"]


def _svg_points(root):
    for el in root.iter():
        if el.tag in (SVG + "polyline", SVG + "polygon"):
            for pair in el.get("points").split():
                yield tuple(map(float, pair.split(",")))


def test_contour_svg_is_valid_and_inside_viewbox():
    field = sample_field(partial(demo_circle, s=1.0), ParameterGrid(-2, 2, -2, 2, 31, 31), s=1.0)
    svg = contours_svg(refine_contour(field, 0.0), (-2, 2, -2, 2), size=300, title="a < b & c")
    root = ET.fromstring(svg)
    assert root.get("viewBox") == "0 0 300 300"
    pts = list(_svg_points(root))
    assert pts and all(0 <= x <= 300 and 0 <= y <= 300 for x, y in pts)


def test_wireframe_svg_valid():
    u, v = np.meshgrid(np.linspace(0, 1, 4), np.linspace(0, 1, 3), indexing="ij")
    root = ET.fromstring(wireframe_svg(np.stack([u, v, u * v], axis=-1)))
    assert len([e for e in root.iter(SVG + "polyline")]) == 7
    assert all(0 <= x <= 480 and 0 <= y <= 480 for x, y in _svg_points(root))


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    atomic_write(target, "new\n")
    assert target.read_text() == "new\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]
