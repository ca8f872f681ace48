"""Command-line front end.

Every command writes CSV (header row, LF line endings, shortest round-trip
floats) to stdout or ``--out``; diagnostics go to stderr.

Exit codes: 0 success, 1 input error, 2 convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import mmatrix, reference
from .energy import (
    QuadratureSpec,
    casimir_energy,
    cylinder_energy_per_length,
    fermionic_energy_curve,
    integrand,
    sphere_plate_energy,
)
from .geometry import SpherePlate, load_geometry, two_spheres
from .spectral import NoConvergence, choose_l_max

EXIT_OK, EXIT_INPUT, EXIT_CONVERGENCE = 0, 1, 2


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(args, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _positive(kind=float):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not (v > 0 and math.isfinite(v)):
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v

    return conv


def _quad(args) -> QuadratureSpec:
    return QuadratureSpec(k_max=args.kmax, panels=args.panels, nodes=args.nodes)


def _solver_kwargs(args) -> dict:
    kw = dict(rtol=args.rtol, safety=args.safety)
    if args.lmax_init is not None:
        kw["l_max_init"] = args.lmax_init
    return kw


def _target(args):
    """Geometry file, or inline sphere-plate parameters."""
    if args.geometry:
        return load_geometry(args.geometry)
    if args.a is None or args.L is None:
        raise InputError("give --geometry FILE or both --a and --L")
    return SpherePlate(args.a, args.L, args.sphere_bc or args.bc, args.bc)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_energy(args) -> int:
    target = _target(args)
    quad = _quad(args)
    if isinstance(target, SpherePlate):
        est = sphere_plate_energy(
            target.a, target.L, target.plate_bc, target.sphere_bc, quad,
            drop_l0=args.drop_l0, **_solver_kwargs(args),
        )
    else:
        est = casimir_energy(target, quad, **_solver_kwargs(args))
    _write_csv(
        args,
        ["value", "quad_error", "trunc_error", "l_max_used", "node_count"],
        [[est.value, est.quad_error, est.trunc_error, est.l_max_used, est.node_count]],
    )
    return EXIT_OK


def _scan_points(args) -> list[float]:
    if args.L_over_a:
        pts = [float(t) for t in args.L_over_a.split(",") if t.strip()]
    elif args.range:
        lo, hi, n = args.range
        n = int(n)
        if n < 1 or not (0 < lo <= hi):
            raise InputError("--range needs 0 < LO <= HI and N >= 1")
        pts = list(np.geomspace(lo, hi, n)) if n > 1 else [lo]
    else:
        pts = []
    if not pts:
        raise InputError("empty scan: give --L-over-a or --range")
    if any(not (p > 0) for p in pts):
        raise InputError("L/a values must be positive")
    return pts


def cmd_scan(args) -> int:
    pts = _scan_points(args)
    a = args.a if args.a is not None else 1.0
    rows = []
    for x in pts:
        L = x * a
        R = L + a
        est = sphere_plate_energy(
            a, L, args.bc, args.sphere_bc, _quad(args), drop_l0=args.drop_l0, **_solver_kwargs(args)
        )
        rows.append(
            [
                x,
                est.value,
                est.value / reference.pfa_leading(a, L),
                reference.asymptotic_series("D_all_l", a, R, order=4),
                reference.asymptotic_series("D_all_l", a, R, order=6),
                reference.swave_sphere_plate_asymptote(a, L),
            ]
        )
    _write_csv(args, ["L_over_a", "E", "E_normalized", "series4", "series6", "swave_asymptote"], rows)
    return EXIT_OK


def cmd_integrand(args) -> int:
    target = _target(args)
    if isinstance(target, SpherePlate):
        gap = target.L
    else:
        gap = target.min_gap() if target.n > 1 else 1.0
    quad = _quad(args)
    k_max = quad.k_max if quad.k_max is not None else 10.0 / gap
    k, _ = quad.points(k_max)
    if args.dump_block:
        _dump_block(args, target, gap)
    res = integrand(target, k, rtol=args.rtol)
    rows = [[kk, r.value, r.l_max if r.l_max is not None else 0, r.sign] for kk, r in zip(k, res)]
    _write_csv(args, ["k4", "log_det", "l_max", "sign"], rows)
    return EXIT_OK


def _dump_block(args, target, gap):
    k4 = args.dump_k if args.dump_k is not None else 1.0 / gap
    if isinstance(target, SpherePlate):
        l_max = args.lmax_init or choose_l_max(target.a, gap, k4, args.safety)
        block = mmatrix.assemble_two_sphere_mblock(
            target.a, target.r, k4, args.dump_m, l_max, target.sphere_bc
        )
    else:
        l_max = args.lmax_init or choose_l_max(float(target.radii.max()), gap, k4, args.safety)
        block = mmatrix.assemble_general_imag_k(target, k4, l_max)
    with open(args.dump_block, "w", encoding="utf-8", newline="") as fh:
        block.to_csv(fh)
    print(f"krein: wrote {block.shape[0]}x{block.shape[1]} block at k4={k4!r} to {args.dump_block}",
          file=sys.stderr)


def cmd_fermionic(args) -> int:
    if args.geometry:
        geom = load_geometry(args.geometry)
        if geom.n != 2:
            raise InputError("the closed form needs exactly two spheres")
        a = float(geom.radii[0])
        r = float(geom.distances[0, 1])
    else:
        if args.a is None or args.r is None:
            raise InputError("give --geometry FILE or both --a and --r")
        a, r = args.a, args.r
        geom = two_spheres(a, r, args.bc)
    if not args.kf_max > args.kf_min:
        raise InputError("--kf-max must exceed --kf-min")
    kf = np.linspace(args.kf_min, args.kf_max, args.kf_points)
    exact = fermionic_energy_curve(geom, kf)
    rows = [[k, e, reference.fermionic_two_sphere(a, r, k)] for k, e in zip(kf, exact)]
    _write_csv(args, ["k_F", "E_exact", "E_closed_form"], rows)
    return EXIT_OK


_REFERENCE = {
    "series": (lambda p: reference.asymptotic_series(p["family"], p["a"], p["R"], p["order"]), ("a", "R")),
    "swave": (lambda p: reference.swave_sphere_plate_asymptote(p["a"], p["L"]), ("a", "L")),
    "pwave": (lambda p: reference.pwave_asymptote(p["a"], p["L"]), ("a", "L")),
    "pfa": (lambda p: reference.pfa_leading(p["a"], p["L"]), ("a", "L")),
    "semiclassical": (lambda p: reference.semiclassical_sphere_plate(p["a"], p["L"]), ("a", "L")),
    "swave-dos": (lambda p: reference.swave_integrated_dos(p["k"], p["a"], p["r"]), ("k", "a", "r")),
    "semiclassical-dos": (
        lambda p: reference.semiclassical_integrated_dos(p["k"], p["a"], p["r"]),
        ("k", "a", "r"),
    ),
    "fermionic-two-sphere": (lambda p: reference.fermionic_two_sphere(p["a"], p["r"], p["kf"]), ("a", "r", "kf")),
    "fermionic-sphere-plate": (
        lambda p: reference.fermionic_sphere_plate(p["a"], p["r"], p["kf"]),
        ("a", "r", "kf"),
    ),
    "em-l-gt-0": (lambda p: reference.em_casimir_polder_l_gt_0(p["a"], p["R"]), ("a", "R")),
    "neumann-l0": (lambda p: -reference.NEUMANN_L0_CONSTANT / (4.0 * math.pi * p["R"]), ("R",)),
}


def cmd_reference(args) -> int:
    fn, needed = _REFERENCE[args.name]
    params = {
        "a": args.a, "L": args.L, "R": args.R, "r": args.r, "k": args.k, "kf": args.kf,
        "family": args.family, "order": args.order,
    }
    missing = [n for n in needed if params[n] is None]
    if missing:
        raise InputError(f"reference {args.name!r} needs " + ", ".join("--" + m for m in missing))
    _write_csv(args, ["name", "value"], [[args.name, fn(params)]])
    return EXIT_OK


def _read_table(path):
    ks, vs = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                k, v = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise InputError(f"{path}: line {lineno}: expected 'k4,value', got {row!r}") from None
            ks.append(k)
            vs.append(v)
    if len(ks) < 2:
        raise InputError(f"{path}: need at least two rows")
    ks, vs = np.array(ks), np.array(vs)
    if np.any(np.diff(ks) <= 0):
        raise InputError(f"{path}: k4 column must be strictly increasing")
    return ks, vs


def cmd_cylinder(args) -> int:
    ks, vs = _read_table(args.table)
    quad = QuadratureSpec(k_max=args.kmax or float(ks[-1]), panels=args.panels, nodes=args.nodes)
    # linear interpolation inside the table; zero beyond it
    est = cylinder_energy_per_length(
        lambda k: float(np.interp(k, ks, vs, left=vs[0], right=0.0)), quad, L=args.decay_length
    )
    _write_csv(
        args, ["value", "quad_error", "node_count"], [[est.value, est.quad_error, est.node_count]]
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_common(p, geometry=True, solver=True):
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--kmax", type=_positive(), help="integration cutoff (default 10/L)")
    p.add_argument("--panels", type=_positive(int), default=8)
    p.add_argument("--nodes", type=_positive(int), default=16, help="Gauss nodes per panel")
    if solver:
        p.add_argument("--rtol", type=_positive(), default=1e-8, help="ln det truncation tolerance")
        p.add_argument("--lmax-init", type=_positive(int), dest="lmax_init")
        p.add_argument("--safety", type=int, default=2, help="extra multipoles in the l_max rule")
    if geometry:
        p.add_argument("--geometry", help="sphere file: 'sphere a=<f> center=x,y,z bc=D|N' per line")
        p.add_argument("--a", type=_positive(), help="sphere radius")
        p.add_argument("--L", type=_positive(), help="sphere-plate surface gap")
        p.add_argument("--bc", default="D", choices=["D", "N"], help="plate boundary condition")
        p.add_argument("--sphere-bc", choices=["D", "N"], dest="sphere_bc")
        p.add_argument("--drop-l0", action="store_true", dest="drop_l0")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="krein", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("energy", help="Casimir energy of a geometry or sphere-plate")
    _add_common(p)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("scan", help="sphere-plate energy over L/a, with reference curves")
    _add_common(p)
    p.add_argument("--L-over-a", dest="L_over_a", help="comma-separated list")
    p.add_argument("--range", nargs=3, type=float, metavar=("LO", "HI", "N"), help="N log-spaced points")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("integrand", help="ln det M(i k4) at the quadrature nodes")
    _add_common(p)
    p.add_argument("--dump-block", dest="dump_block", metavar="PATH",
                   help="also write one matrix block as CSV (sphere-plate: coupling block A^(m))")
    p.add_argument("--dump-k", dest="dump_k", type=_positive(), help="k4 of the dumped block (default 1/L)")
    p.add_argument("--dump-m", dest="dump_m", type=int, default=0)
    p.set_defaults(func=cmd_integrand)

    p = sub.add_parser("fermionic", help="fermionic two-sphere energy vs k_F")
    p.add_argument("--out")
    p.add_argument("--geometry")
    p.add_argument("--a", type=_positive())
    p.add_argument("--r", type=_positive(), help="center-to-center distance")
    p.add_argument("--bc", default="D", choices=["D", "N"])
    p.add_argument("--kf-min", type=_positive(), default=0.5, dest="kf_min")
    p.add_argument("--kf-max", type=_positive(), default=5.0, dest="kf_max")
    p.add_argument("--kf-points", type=_positive(int), default=46, dest="kf_points")
    p.set_defaults(func=cmd_fermionic)

    p = sub.add_parser("reference", help="evaluate a closed-form reference value")
    p.add_argument("name", choices=sorted(_REFERENCE))
    p.add_argument("--out")
    for flag in ("a", "L", "R", "r", "k", "kf"):
        p.add_argument(f"--{flag}", type=float)
    p.add_argument("--family", default="D_all_l")
    p.add_argument("--order", type=int, default=6)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("cylinder", help="energy per length from a tabulated ln det (CSV k4,value)")
    p.add_argument("table")
    _add_common(p, geometry=False, solver=False)
    p.add_argument("--decay-length", type=_positive(), default=1.0, dest="decay_length",
                   help="L in the e^{-2 k4 L} tail envelope")
    p.set_defaults(func=cmd_cylinder)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except NoConvergence as exc:
        print(f"krein: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, OSError) as exc:
        # includes OverlapError, GeometryParseError, InputError
        print(f"krein: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
