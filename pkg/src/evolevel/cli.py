"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import formats
from .bspline import (
    ParametrizationMethod,
    SingularInterpolationError,
    demo_cubic_surface,
    eval_lattice,
    eval_surface,
    fit_surface,
    parametrize,
    surface_slice,
)
from .inversion import NoRootError, correction_schedule
from .levelset import FieldEvaluationError, ParameterGrid, refine_contour, sample_field
from .oscillator import OscillatorPoint, PhysicalConstants, ThermalSpec, evo_d01, thermal_evo
from .spectral import BasisSpec, exact_d01, exact_thermal

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
MODELS = ("d01", "thermal", "sinab", "cubic", "circle")
PARAMS = ("omega", "epsilon", "b")


class InputError(Exception):
    pass


def _consts(args) -> PhysicalConstants:
    try:
        return PhysicalConstants(args.hbar, args.mass, args.kB)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _out_path(path):
    if path is None:
        return None
    p = Path(path).resolve()
    if not p.parent.is_dir():
        raise InputError(f"output directory does not exist: {p.parent}")
    return p


def _in_text(path) -> str:
    p = Path(path).resolve()
    if not p.is_file():
        raise InputError(f"no such file: {p}")
    return p.read_text(encoding="utf-8")


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        formats.atomic_write(path, text)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# sample

def _model_evaluator(args, consts):
    model = args.model
    if model == "sinab":
        return lambda a, b: args.s - math.sin(a * b)
    if model == "circle":
        return lambda a, b: a * a + b * b - args.s
    if model == "cubic":
        return demo_cubic_surface
    axes = [x.strip() for x in args.axes.split(",")]
    if len(axes) != 2 or not set(axes) <= set(PARAMS) or axes[0] == axes[1]:
        raise InputError(f"--axes must name two of {PARAMS}, got {args.axes!r}")
    fixed = {"omega": args.omega, "epsilon": args.epsilon, "b": args.b}
    if model == "thermal":
        if args.kT is None:
            raise InputError("--kT is required for the thermal model")
        thermal = ThermalSpec(args.kT / consts.k_boltzmann, args.n_max)

    def evaluate(a, b):
        params = dict(fixed, **{axes[0]: a, axes[1]: b})
        point = OscillatorPoint(params["omega"], params["epsilon"], params["b"])
        if model == "d01":
            return evo_d01(point, consts).d01
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return thermal_evo(point, thermal, consts)

    return evaluate


def cmd_sample(args) -> int:
    out = _out_path(args.output)
    consts = _consts(args)
    try:
        grid = ParameterGrid(args.a_min, args.a_max, args.b_min, args.b_max, args.n_a, args.n_b)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    evaluator = _model_evaluator(args, consts)
    try:
        field = sample_field(evaluator, grid, args.s, threads=args.threads)
    except FieldEvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    extra = {"model": args.model}
    if args.model in ("d01", "thermal"):
        extra["axes"] = args.axes
    _emit(formats.field_to_csv(field, extra), out)
    print(f"{grid.n_a * grid.n_b} rows", file=sys.stderr)
    return EXIT_OK


# contour

def cmd_contour(args) -> int:
    out, svg = _out_path(args.output), _out_path(args.svg)
    fields = []
    for path in args.fields:
        try:
            fields.append(formats.field_from_csv(_in_text(path))[0])
        except (formats.FormatError, ValueError) as exc:
            raise InputError(f"{path}: {exc}") from exc
    all_contours = []
    payload = []
    for field in fields:
        contours = refine_contour(field, args.c)
        if not contours:
            _warn(f"level c={args.c} does not intersect the field at s={field.s}")
        all_contours.extend(contours)
        payload.append(formats.contours_to_dict(contours, field.s, args.c))
    doc = payload[0] if len(payload) == 1 else {"frames": payload}
    _emit(formats.dumps(doc), out)
    if svg is not None:
        g = fields[0].grid
        formats.atomic_write(svg, formats.contours_svg(all_contours, (g.a_min, g.a_max, g.b_min, g.b_max), title=f"c={args.c}"))
    return EXIT_OK


# fit / eval / slice

def _load_surface(path):
    try:
        return formats.surface_from_dict(json.loads(_in_text(path)))
    except (json.JSONDecodeError, formats.FormatError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_fit(args) -> int:
    out, svg = _out_path(args.output), _out_path(args.svg)
    try:
        field, _ = formats.field_from_csv(_in_text(args.data))
        data = formats.field_to_surface_data(field)
    except (formats.FormatError, ValueError) as exc:
        raise InputError(f"{args.data}: {exc}") from exc
    try:
        surface = fit_surface(data, args.p, args.q, args.method)
    except SingularInterpolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    u, v = parametrize(data, args.method)
    resid = np.max(np.linalg.norm(eval_lattice(surface, u, v) - data.points, axis=-1)) / data.diameter()
    _emit(formats.dumps(formats.surface_to_dict(surface)), out)
    print(f"max relative residual at data points: {resid:.3e}", file=sys.stderr)
    if svg is not None:
        ts = np.linspace(0, 1, 25)
        formats.atomic_write(svg, formats.wireframe_svg(eval_lattice(surface, ts, ts), title="fitted surface"))
    return EXIT_OK


def cmd_eval(args) -> int:
    out = _out_path(args.output)
    surface = _load_surface(args.surface)
    if len(args.u) != len(args.v):
        raise InputError("--u and --v need the same number of values")
    try:
        pts = [eval_surface(surface, u, v).tolist() for u, v in zip(args.u, args.v)]
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(formats.dumps({"u": args.u, "v": args.v, "points": pts}), out)
    return EXIT_OK


def cmd_slice(args) -> int:
    out, svg = _out_path(args.output), _out_path(args.svg)
    surface = _load_surface(args.surface)
    try:
        contours = surface_slice(surface, args.z, args.resolution)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if not contours:
        _warn(f"surface never reaches z={args.z}")
    _emit(formats.dumps(formats.contours_to_dict(contours, 0.0, args.z)), out)
    if svg is not None:
        net = surface.control_net
        box = (net[..., 0].min(), net[..., 0].max(), net[..., 1].min(), net[..., 1].max())
        formats.atomic_write(svg, formats.contours_svg(contours, box, title=f"z={args.z}"))
    return EXIT_OK


# invert

def cmd_invert(args) -> int:
    out = _out_path(args.output)
    consts = _consts(args)
    try:
        traj = formats.trajectory_from_csv(_in_text(args.trajectory))
    except (formats.FormatError, ValueError) as exc:
        raise InputError(f"{args.trajectory}: {exc}") from exc
    schedule = correction_schedule(traj, args.d_target, tuple(args.bracket), consts)
    _emit(formats.dumps(formats.schedule_to_dict(schedule)), out)
    failed = schedule.failures
    if failed:
        _warn(f"{len(failed)} of {len(schedule.entries)} samples could not be corrected")
    return EXIT_OK


# thermal

def cmd_thermal(args) -> int:
    out = _out_path(args.output)
    consts = _consts(args)
    try:
        point = OscillatorPoint(args.omega, args.epsilon, args.b)
        thermal = ThermalSpec(args.kT / consts.k_boltzmann, args.n_max)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value = thermal_evo(point, thermal, consts)
    result = {"omega": args.omega, "epsilon": args.epsilon, "b": args.b, "kT": args.kT, "thermal_d": value}
    for w in caught:
        _warn(str(w.message))
    if args.exact:
        n_max = args.n_max or 16
        n_basis = max(args.n_basis, 2 * n_max + 2)
        result["n_max"] = n_max
        result["exact_thermal_d"] = exact_thermal(point, ThermalSpec(thermal.temperature, n_max), BasisSpec(n_basis), consts)
    _emit(formats.dumps(result), out)
    return EXIT_OK


# verify

def _slope(bs, gaps):
    lb, lg = np.log(bs), np.log(gaps)
    return float(np.polyfit(lb, lg, 1)[0])


def cmd_verify(args) -> int:
    out = _out_path(args.output)
    consts = _consts(args)
    basis = BasisSpec(args.n_basis)
    rows = []
    all_converged = True
    for b in args.b_values:
        point = OscillatorPoint(args.omega, args.epsilon, b)
        pert = evo_d01(point, consts).d01
        exact = exact_d01(point, basis, consts)
        all_converged &= exact.converged
        rows.append({"b": b, "perturbative": pert, "exact": exact.d01_exact,
                     "gap": abs(pert - exact.d01_exact), "converged": exact.converged})
    report = {"omega": args.omega, "epsilon": args.epsilon, "n_basis": args.n_basis, "sweep": rows}
    nonzero = [(r["b"], r["gap"]) for r in rows if r["b"] != 0 and r["gap"] > 0]
    if len(nonzero) >= 2:
        report["slope"] = _slope(*zip(*nonzero))
    zero = OscillatorPoint(args.omega, args.epsilon, 0.0)
    report["b0_gap"] = abs(evo_d01(zero, consts).d01 - exact_d01(zero, basis, consts).d01_exact)
    report["all_converged"] = all_converged

    lines = [f"omega={args.omega:g} epsilon={args.epsilon:g} n_basis={args.n_basis}"]
    lines += [f"  b={r['b']:<8g} perturbative={r['perturbative']:.12f} exact={r['exact']:.12f} "
              f"gap={r['gap']:.3e} converged={r['converged']}" for r in rows]
    if "slope" in report:
        lines.append(f"  log-log slope of gap vs b: {report['slope']:.4f}")
    lines.append(f"  gap at b=0: {report['b0_gap']:.3e}")
    print("\n".join(lines), file=sys.stderr)
    _emit(formats.dumps(report), out)
    return EXIT_OK if all_converged else EXIT_VERIFY


# parser

def _add_consts(p):
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--kB", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evolevel", description="Constant-EVO level sets in Hamiltonian parameter space.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a model on an (a, b) grid and write field CSV")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--a-min", type=float, default=0.0)
    p.add_argument("--a-max", type=float, default=1.0)
    p.add_argument("--b-min", type=float, default=0.0)
    p.add_argument("--b-max", type=float, default=1.0)
    p.add_argument("--n-a", type=int, default=21)
    p.add_argument("--n-b", type=int, default=21)
    p.add_argument("--s", type=float, default=0.0, help="scale parameter (sinab, circle)")
    p.add_argument("--axes", default="epsilon,b", help="grid axes for d01/thermal, two of omega,epsilon,b")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--kT", type=float, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("-o", "--output")
    _add_consts(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("contour", help="extract level-set polylines from field CSV files")
    p.add_argument("fields", nargs="+")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_contour)

    p = sub.add_parser("fit", help="fit an interpolating B-spline surface to field CSV data")
    p.add_argument("data")
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--method", choices=[m.value for m in ParametrizationMethod], default="chord_length")
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a fitted surface")
    p.add_argument("surface")
    p.add_argument("--u", type=float, nargs="+", required=True)
    p.add_argument("--v", type=float, nargs="+", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("slice", help="contour a fitted surface at constant height")
    p.add_argument("surface")
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("invert", help="control corrections b(s) holding d01 at a target")
    p.add_argument("trajectory")
    p.add_argument("--d-target", type=float, required=True)
    p.add_argument("--bracket", type=float, nargs=2, default=[0.0, 1.0])
    p.add_argument("-o", "--output")
    _add_consts(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("thermal", help="Boltzmann-averaged dipole element")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--kT", type=float, required=True)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--exact", action="store_true", help="also diagonalize for the exact average")
    p.add_argument("--n-basis", type=int, default=64)
    p.add_argument("-o", "--output")
    _add_consts(p)
    p.set_defaults(func=cmd_thermal)

    p = sub.add_parser("verify", help="compare the perturbative d01 with exact diagonalization")
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--b-values", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    p.add_argument("--n-basis", type=int, default=40)
    p.add_argument("-o", "--output")
    _add_consts(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoRootError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
