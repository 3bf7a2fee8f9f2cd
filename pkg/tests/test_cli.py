import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from evolevel.bspline import demo_cubic_surface, eval_surface
from evolevel.cli import EXIT_INPUT, EXIT_OK, main
from evolevel.formats import field_from_csv, surface_from_dict
from evolevel.oscillator import OscillatorPoint, evo_d01


def run(*argv):
    return main([str(a) for a in argv])


def field_rows(path):
    return [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")][1:]


def test_sample_sinab_row_count(tmp_path, capsys):
    out = tmp_path / "f.csv"
    assert run("sample", "--model", "sinab", "--s", 0.5, "--a-max", 2, "--b-max", 2, "-o", out) == EXIT_OK
    assert len(field_rows(out)) == 441
    assert "441 rows" in capsys.readouterr().err


def test_sample_cubic_grid(tmp_path):
    out = tmp_path / "f.csv"
    run("sample", "--model", "cubic", "--a-min", -1, "--b-min", -1, "--n-a", 5, "--n-b", 5, "-o", out)
    field, meta = field_from_csv(out.read_text())
    assert meta["model"] == "cubic"
    assert field.values[1, 3] == demo_cubic_surface(-0.5, 0.5)


def test_sample_d01_axes(tmp_path):
    out = tmp_path / "f.csv"
    run("sample", "--model", "d01", "--axes", "epsilon,b", "--omega", 0.8, "--n-a", 3, "--n-b", 4, "-o", out)
    field, _ = field_from_csv(out.read_text())
    assert field.values[2, 1] == evo_d01(OscillatorPoint(0.8, 1.0, 1 / 3)).d01


def test_sample_rejects_bad_flags_before_writing(tmp_path):
    out = tmp_path / "f.csv"
    assert run("sample", "--model", "d01", "--axes", "omega,omega", "-o", out) == EXIT_INPUT
    assert run("sample", "--model", "sinab", "--n-a", 1, "-o", out) == EXIT_INPUT
    assert run("sample", "--model", "sinab", "-o", tmp_path / "missing" / "f.csv") == EXIT_INPUT
    assert run("sample", "--model", "sinab", "--hbar", 0, "-o", out) == EXIT_INPUT
    assert not out.exists()
    with pytest.raises(SystemExit) as info:
        run("sample", "--model", "nope")
    assert info.value.code == 2


def test_sample_domain_error_names_coordinates(tmp_path, capsys):
    out = tmp_path / "f.csv"
    code = run("sample", "--model", "d01", "--axes", "omega,epsilon", "--a-min", 0.5, "--b-min", -2, "--b-max", -1, "-o", out)
    assert code == 3 and not out.exists()
    assert "a=0.5" in capsys.readouterr().err


def test_contour_circle_and_empty(tmp_path, capsys):
    field = tmp_path / "c.csv"
    run("sample", "--model", "circle", "--a-min", -2, "--a-max", 2, "--b-min", -2, "--b-max", 2, "--n-a", 41, "--n-b", 41, "-o", field)
    out, svg = tmp_path / "c.json", tmp_path / "c.svg"
    assert run("contour", field, "--c", 1, "-o", out, "--svg", svg) == EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["contours"]) == 1 and doc["contours"][0]["closed"]
    ET.fromstring(svg.read_text())
    assert run("contour", field, "--c", 100, "-o", out) == EXIT_OK
    assert json.loads(out.read_text())["contours"] == []
    assert "warning" in capsys.readouterr().err


def test_contour_sinab_frames(tmp_path):
    paths = []
    for s in (0.2, 0.5, 0.8):
        p = tmp_path / f"s{s}.csv"
        run("sample", "--model", "sinab", "--s", s, "--a-min", 0.2, "--a-max", 2, "--b-min", 0.2, "--b-max", 2,
            "--n-a", 41, "--n-b", 41, "-o", p)
        paths.append(p)
    out = tmp_path / "c.json"
    assert run("contour", *paths, "--c", 0, "-o", out) == EXIT_OK
    frames = json.loads(out.read_text())["frames"]
    assert [f["s"] for f in frames] == [0.2, 0.5, 0.8]
    assert all(f["contours"] for f in frames)


def test_contour_bad_input(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nonsense\n")
    assert run("contour", bad, "--c", 0) == EXIT_INPUT
    assert run("contour", tmp_path / "none.csv", "--c", 0) == EXIT_INPUT


def test_fit_cubic_recipe(tmp_path, capsys):
    field = tmp_path / "cubic.csv"
    run("sample", "--model", "cubic", "--a-min", -1, "--b-min", -1, "--n-a", 5, "--n-b", 5, "-o", field)
    out, svg = tmp_path / "s.json", tmp_path / "s.svg"
    assert run("fit", field, "--p", 3, "--q", 3, "-o", out, "--svg", svg) == EXIT_OK
    err = capsys.readouterr().err
    assert float(err.rsplit(":", 1)[1]) < 1e-9
    ET.fromstring(svg.read_text())
    surf = surface_from_dict(json.loads(out.read_text()))
    assert abs(eval_surface(surf, 0.0, 0.0)[2] - demo_cubic_surface(-1.0, -1.0)) < 1e-12

    evals = tmp_path / "e.json"
    assert run("eval", out, "--u", 0, 1, "--v", 0, 1, "-o", evals) == EXIT_OK
    pts = json.loads(evals.read_text())["points"]
    np.testing.assert_allclose(pts[1], [1.0, 1.0, demo_cubic_surface(1.0, 1.0)], atol=1e-12)
    assert run("eval", out, "--u", 0, 1, "--v", 0) == EXIT_INPUT
    assert run("eval", out, "--u", 2, "--v", 0) == EXIT_INPUT

    sl = tmp_path / "sl.json"
    assert run("slice", out, "--z", 0, "-o", sl, "--svg", tmp_path / "sl.svg") == EXIT_OK
    assert json.loads(sl.read_text())["contours"]


def test_fit_d01_recipe(tmp_path, capsys):
    field = tmp_path / "d.csv"
    run("sample", "--model", "d01", "--axes", "omega,b", "--epsilon", 0.2, "--a-min", 0.3, "--a-max", 1.0,
        "--n-a", 5, "--n-b", 5, "-o", field)
    out = tmp_path / "s.json"
    assert run("fit", field, "--method", "equidistant", "-o", out) == EXIT_OK
    assert float(capsys.readouterr().err.rsplit(":", 1)[1]) < 1e-9


def test_fit_degenerate_input(tmp_path):
    text = "# a_min=0\n# a_max=1\n# b_min=0\n# b_max=1\n# n_a=1\n# n_b=4\na,b,value\n"
    bad = tmp_path / "bad.csv"
    bad.write_text(text + "".join(f"0,{j / 3},0\n" for j in range(4)))
    out = tmp_path / "s.json"
    assert run("fit", bad, "-o", out) == EXIT_INPUT
    assert not out.exists()


def test_invert_recipes(tmp_path, capsys):
    target = evo_d01(OscillatorPoint(1.0)).d01
    traj = tmp_path / "t.csv"
    traj.write_text("s,omega,epsilon\n" + "".join(f"{k},{1 - 0.025 * k!r},0\n" for k in range(5)))
    out = tmp_path / "sched.json"
    assert run("invert", traj, "--d-target", repr(target), "-o", out) == EXIT_OK
    entries = json.loads(out.read_text())["entries"]
    assert entries[0]["b"] == 0.0
    assert all(e["status"] == "ok" and e["residual"] < 1e-10 for e in entries)

    const = tmp_path / "c.csv"
    const.write_text("s,omega,epsilon\n0,1,0\n1,1,0\n")
    run("invert", const, "--d-target", repr(target), "-o", out)
    assert [e["b"] for e in json.loads(out.read_text())["entries"]] == [0.0, 0.0]

    capsys.readouterr()
    assert run("invert", const, "--d-target", 5, "-o", out) == EXIT_OK
    assert {e["status"] for e in json.loads(out.read_text())["entries"]} == {"unreachable"}
    assert "2 of 2" in capsys.readouterr().err


def test_thermal_command(tmp_path):
    out = tmp_path / "t.json"
    assert run("thermal", "--omega", 1, "--b", 0, "--kT", 1, "--exact", "--n-max", 20, "-o", out) == EXIT_OK
    doc = json.loads(out.read_text())
    assert abs(doc["thermal_d"] - doc["exact_thermal_d"]) < 1e-8
    assert run("thermal", "--kT", 0) == EXIT_INPUT


def test_verify_reports_slope(tmp_path):
    out = tmp_path / "v.json"
    assert run("verify", "-o", out) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["slope"] >= 1.7 and doc["all_converged"]
    assert doc["b0_gap"] < 1e-8
    # b = 0 with epsilon: the gap is the model discrepancy, reported only
    assert run("verify", "--epsilon", 0.21, "--b-values", 0, "-o", out) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["sweep"][0]["gap"] == pytest.approx(abs(1.21 - 1.21**-0.25) * 0.5**0.5, rel=1e-6)


def test_verify_unconverged_exit(tmp_path):
    assert run("verify", "--epsilon", 3, "--n-basis", 4, "--b-values", 0.1, "-o", tmp_path / "v.json") == 1


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    common = ("sample", "--model", "d01", "--n-a", 9, "--n-b", 9)
    run(*common, "-o", a)
    run(*common, "--threads", 4, "-o", b)
    assert a.read_bytes() == b.read_bytes()
