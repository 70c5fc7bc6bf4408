"""Command-line front end.

Exit codes: 0 = success, 1 = usage or IO failure, 2 = a mathematical verdict
failed (incompatible structure, conic with real points, positivity violated,
geodesic not closed).  All numeric output is JSON or CSV at full double
precision (round-trip float formatting); identical configuration and seed
produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import validate
from .charts import chart_grid, get_chart
from .compat import compatibility_report
from .conics import Conic, ConicWeylData, fiber_section, real_point_scan
from .connections import ConnectionCoeffs
from .errors import GeometryError
from .fields import field_from_config
from .finsler import (
    ConformalWeylData,
    UTBPoint,
    coframe_invariants,
    positivity_scan,
    w1_flow_period,
)
from .geodesics import (
    GeodesicState,
    WeylDataConnection,
    closure_test,
    great_circle_residual,
    integrate,
)

VERDICT_EXIT = 2


def _write_json(payload, path):
    payload = {"schema": 1, **payload}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=True)
    if path is None or path == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise GeometryError(f"cannot read {path}: {exc}") from exc


def _parse_floats(text, n, what):
    parts = [p for p in text.split(",") if p]
    if len(parts) != n:
        raise GeometryError(f"{what} needs {n} comma-separated numbers")
    return np.array([float(p) for p in parts])


def emit_curve(path_sample, fmt, out):
    """Write a path as `s,x,y,z,chart` rows (CSV) or the same records as JSON."""
    if len(path_sample) == 0:
        raise GeometryError("refusing to emit an empty path")
    if path_sample.r3 is not None:
        xyz = path_sample.r3
    else:
        xyz = np.column_stack([path_sample.x, np.zeros(len(path_sample))])
    rows = [
        (float(s), float(p[0]), float(p[1]), float(p[2]), name)
        for s, p, name in zip(path_sample.s, xyz, path_sample.chart_names)
    ]
    if fmt == "csv":
        lines = ["s,x,y,z,chart"]
        lines += [f"{r[0]!r},{r[1]!r},{r[2]!r},{r[3]!r},{r[4]}" for r in rows]
        text = "\n".join(lines) + "\n"
        if out is None or out == "-":
            sys.stdout.write(text)
        else:
            with open(out, "w") as fh:
                fh.write(text)
    else:
        _write_json(
            {"rows": [{"s": r[0], "x": r[1], "y": r[2], "z": r[3], "chart": r[4]} for r in rows]},
            out,
        )


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------
def _projective_source(spec, field_cfg):
    """Representative coefficients of the requested projective class."""
    kind = spec.get("kind", "levi-civita")
    if kind == "levi-civita":
        metric = field_cfg.metric

        def at(chart):
            def proj(p):
                from .connections import levi_civita

                return levi_civita(metric.jet(chart, p, order=1))

            return proj

        return at
    if kind == "weyl":
        metric = field_cfg.metric
        beta = field_cfg.beta

        def at(chart):
            def proj(p):
                from .connections import weyl_connection

                return weyl_connection(metric.jet(chart, p, order=1), beta.jet(chart, p, order=0))

            return proj

        return at
    if kind == "flat-sphere":
        def at(chart):
            def proj(p):
                from .conics import flat_target_gamma

                return ConnectionCoeffs(flat_target_gamma(chart, np.asarray(p, float)))

            return proj

        return at
    if kind == "constant":
        gamma = np.asarray(spec["gamma"], dtype=float)

        def at(chart):
            return lambda p: ConnectionCoeffs(gamma)

        return at
    raise GeometryError(f"unknown projective source {kind!r}")


def cmd_compat_check(args):
    cfg = _load_json(args.field)
    fc = field_from_config(cfg)
    proj_cfg = _load_json(args.projective) if args.projective else {"kind": "levi-civita"}
    chart = get_chart(args.chart, extent=args.extent)
    proj = _projective_source(proj_cfg, fc)(chart)
    rep = compatibility_report(fc.factor, proj, chart, n=args.grid, tol=args.tol)
    _write_json(rep.to_json_dict(), args.out)
    return 0 if rep.compatible else VERDICT_EXIT


def cmd_conic_check(args):
    conic = Conic.from_json_dict(_load_json(args.infile))
    if not conic.smooth:
        _write_json({"smooth": False, "det_abs": abs(conic.det)}, args.out)
        return VERDICT_EXIT
    scan = real_point_scan(conic)
    _write_json({**scan.to_json_dict(), "smooth": True}, args.out)
    return VERDICT_EXIT if scan.real_points else 0


def cmd_conic_section(args):
    conic = Conic.from_json_dict(_load_json(args.infile))
    u = _parse_floats(args.u, 3, "--u")
    u = u / np.linalg.norm(u)
    z = fiber_section(conic, u)
    quad = complex(z.z @ conic.Q @ z.z)
    _write_json(
        {
            "u": [float(v) for v in u],
            "z_re": [float(v) for v in z.z.real],
            "z_im": [float(v) for v in z.z.imag],
            "on_conic": abs(quad),
            "on_line": float(abs(u @ z.z)),
        },
        args.out,
    )
    return 0


def cmd_conic_metric(args):
    conic = Conic.from_json_dict(_load_json(args.infile))
    chart = get_chart(args.chart)
    data = ConicWeylData(conic)
    pts = chart_grid(chart, n=args.grid)
    sample = data.sample(chart, pts)
    worst = float(np.max(sample.residual))
    payload = {
        "chart": chart.name,
        "grid_n": args.grid,
        "max_residual": worst,
        "rows": [
            {
                "x": float(p[0]),
                "y": float(p[1]),
                "g11": float(G[0, 0]),
                "g12": float(G[0, 1]),
                "g22": float(G[1, 1]),
                "b1": float(b[0]),
                "b2": float(b[1]),
                "residual": float(r),
            }
            for p, G, b, r in zip(pts, sample.G, sample.beta, sample.residual)
        ],
    }
    _write_json(payload, args.out)
    return 0 if worst < 1e-7 else VERDICT_EXIT


def cmd_weyl_from_conic(args):
    return cmd_conic_metric(args)


def _start_state(args):
    chart = get_chart(args.chart)
    x = _parse_floats(args.start, 2, "--start")
    v = _parse_floats(args.velocity, 2, "--velocity")
    return GeodesicState(chart, x, v)


def cmd_geodesics(args):
    conic = Conic.from_json_dict(_load_json(args.conic))
    conn = WeylDataConnection(ConicWeylData(conic))
    path = integrate(conn, _start_state(args), h=args.h, s_max=args.s_max)
    emit_curve(path, args.emit, args.out)
    return 0


def cmd_zoll_test(args):
    conic = Conic.from_json_dict(_load_json(args.conic))
    conn = WeylDataConnection(ConicWeylData(conic))
    res = closure_test(conn, _start_state(args), h=args.h, tol=args.tol, s_max=args.s_max)
    payload = {
        "closed": bool(res.closed),
        "s_return": res.s_return,
        "closure_err": res.err,
        "plane_residual": great_circle_residual(res.path),
        "min_self_gap": res.min_self_gap,
    }
    _write_json(payload, args.out)
    return 0 if res.closed else VERDICT_EXIT


def _weyl_data(args):
    if args.conic:
        conic = Conic.from_json_dict(_load_json(args.conic))
        return ConicWeylData(conic)
    cfg = _load_json(args.field)
    fc = field_from_config(cfg)
    chart = get_chart(args.chart, extent=args.extent)
    return ConformalWeylData(fc.factor, fc.beta, atlas=(chart,))


def cmd_finsler_invariants(args):
    data = _weyl_data(args)
    chart = data.atlas[0]
    rng = np.random.default_rng(args.seed)
    pos = positivity_scan(data, chart, n=max(9, args.samples // 20))
    if not pos.positive:
        _write_json({"positive": False, **pos.to_json_dict()}, args.out)
        return VERDICT_EXIT
    rows = []
    worst = np.zeros(3)
    worst_k = 0.0
    for _ in range(args.samples):
        p = rng.uniform(-(chart.extent - 0.3), chart.extent - 0.3, 2)
        u = UTBPoint(chart, p, rng.uniform(0.0, 2 * np.pi))
        inv = coframe_invariants(data, u)
        worst = np.maximum(worst, inv.eq_residuals)
        worst_k = max(worst_k, inv.K_residual)
        rows.append({"x": float(p[0]), "y": float(p[1]), "phi": u.phi,
                     "I": inv.I, "C": inv.C, "K_residual": inv.K_residual})
    payload = {
        "positive": True,
        "positivity_min": pos.min_value,
        "max_eq_residuals": [float(v) for v in worst],
        "max_K_residual": worst_k,
        "samples": rows,
    }
    _write_json(payload, args.out)
    return 0 if worst_k < 1e-4 and np.all(worst < 1e-4) else VERDICT_EXIT


def cmd_finsler_flow(args):
    data = _weyl_data(args)
    chart = data.atlas[0]
    x0, y0, phi0 = _parse_floats(args.start, 3, "--start")
    res = w1_flow_period(data, UTBPoint(chart, [x0, y0], phi0), tol=args.tol)
    payload = {
        "closed": bool(res.closed),
        "period": res.period,
        "err": res.err,
        "gap_to_2pi": abs(res.period - 2.0 * np.pi) if res.closed else None,
    }
    _write_json(payload, args.out)
    return 0 if res.closed else VERDICT_EXIT


def cmd_validate(args):
    results = validate.run_suite(args.suite, seed=args.seed)
    payload = {
        "suite": args.suite,
        "seed": args.seed,
        "checks": [r.to_json_dict() for r in results],
        "passed": bool(all(r.passed for r in results)),
    }
    _write_json(payload, args.out)
    return 0 if payload["passed"] else VERDICT_EXIT


# ----------------------------------------------------------------------
def build_parser():
    ap = argparse.ArgumentParser(prog="weylgeo", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output path (default stdout)")

    p = sub.add_parser("compat-check", help="isothermal compatibility sweep")
    p.add_argument("--field", required=True, help="field JSON (factor + beta)")
    p.add_argument("--projective", default=None,
                   help="projective source JSON (default: the field's own metric)")
    p.add_argument("--chart", default="planar")
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=33)
    p.add_argument("--tol", type=float, default=1e-7)
    common(p)
    p.set_defaults(fn=cmd_compat_check)

    p = sub.add_parser("conic", help="conic operations")
    csub = p.add_subparsers(dest="conic_command", required=True)

    c = csub.add_parser("check", help="real-point decision")
    c.add_argument("--in", dest="infile", required=True)
    common(c)
    c.set_defaults(fn=cmd_conic_check)

    c = csub.add_parser("section", help="fiber point over a unit vector")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--u", required=True, help="x,y,z")
    common(c)
    c.set_defaults(fn=cmd_conic_section)

    c = csub.add_parser("metric", help="induced metric and 1-form on a grid")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--chart", default="gnomonic")
    c.add_argument("--grid", type=int, default=9)
    common(c)
    c.set_defaults(fn=cmd_conic_metric)

    p = sub.add_parser("weyl-from-conic", help="alias of `conic metric`")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--chart", default="gnomonic")
    p.add_argument("--grid", type=int, default=9)
    common(p)
    p.set_defaults(fn=cmd_weyl_from_conic)

    p = sub.add_parser("geodesics", help="trace one geodesic of a conic structure")
    p.add_argument("--conic", required=True)
    p.add_argument("--chart", default="north-stereographic")
    p.add_argument("--start", required=True, help="x,y")
    p.add_argument("--velocity", required=True, help="vx,vy")
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--s-max", type=float, default=6.5)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    common(p)
    p.set_defaults(fn=cmd_geodesics)

    p = sub.add_parser("zoll-test", help="closure test for one geodesic")
    p.add_argument("--conic", required=True)
    p.add_argument("--chart", default="north-stereographic")
    p.add_argument("--start", required=True, help="x,y")
    p.add_argument("--velocity", required=True, help="vx,vy")
    p.add_argument("--h", type=float, default=4e-3)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--s-max", type=float, default=50.0)
    common(p)
    p.set_defaults(fn=cmd_zoll_test)

    p = sub.add_parser("finsler", help="coframe invariants and the dual flow")
    fsub = p.add_subparsers(dest="finsler_command", required=True)

    f = fsub.add_parser("invariants")
    f.add_argument("--conic", default=None)
    f.add_argument("--field", default=None)
    f.add_argument("--chart", default="north-stereographic")
    f.add_argument("--extent", type=float, default=1.0)
    f.add_argument("--samples", type=int, default=50)
    f.add_argument("--seed", type=int, default=0)
    common(f)
    f.set_defaults(fn=cmd_finsler_invariants)

    f = fsub.add_parser("flow")
    f.add_argument("--conic", default=None)
    f.add_argument("--field", default=None)
    f.add_argument("--chart", default="north-stereographic")
    f.add_argument("--extent", type=float, default=1.0)
    f.add_argument("--start", required=True, help="x,y,phi")
    f.add_argument("--tol", type=float, default=1e-3)
    common(f)
    f.set_defaults(fn=cmd_finsler_flow)

    p = sub.add_parser("validate", help="run a named invariant suite")
    p.add_argument("--suite", default="identities")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(fn=cmd_validate)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
